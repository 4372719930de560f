"""Finite-difference gradient checking used across the test suite.

All checks run in float64. The numeric side uses central differences with a
step small enough that truncation error sits far below the tolerances the
tests assert, while the analytic side replays the tape once per forward.
"""

from __future__ import annotations

import numpy as np

from tapgkit.autodiff import tensor as T
from tapgkit.autodiff.tensor import Tape, Tensor

FD_STEP = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise difference, normalized by the numeric scale (floor 1)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(numeric))) if numeric.size else 0.0)
    return float(np.max(np.abs(analytic - numeric))) / scale if numeric.size else 0.0


def analytic_grads(forward, params: list[Tensor]) -> list[np.ndarray]:
    """Backprop gradients of the scalar ``forward()`` result for ``params``."""
    with Tape() as tape:
        loss = forward()
        tape.backward(loss)
    return [p.grad.copy() for p in params]


def numeric_grads(forward, params: list[Tensor], step: float = FD_STEP,
                  coords: int | None = None,
                  rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Central-difference gradients, mutating each parameter in place.

    With ``coords`` set, only that many randomly chosen coordinates per
    parameter are probed; unprobed entries are NaN so callers can mask them.
    """

    def value() -> float:
        out = forward()
        return float(out.data.reshape(-1)[0])

    grads = []
    for p in params:
        if coords is None or coords >= p.data.size:
            picked = np.arange(p.data.size)
            g = np.zeros(p.data.size)
        else:
            picked = rng.choice(p.data.size, size=coords, replace=False)
            g = np.full(p.data.size, np.nan)
        for i in picked:
            original = p.data.flat[i]
            p.data.flat[i] = original + step
            up = value()
            p.data.flat[i] = original - step
            down = value()
            p.data.flat[i] = original
            g[i] = (up - down) / (2.0 * step)
        grads.append(g.reshape(p.data.shape))
    return grads


def check_gradients(forward, params: list[Tensor], tol: float,
                    coords: int | None = None,
                    rng: np.random.Generator | None = None) -> float:
    """Assert analytic and numeric gradients agree; returns the worst error."""
    analytic = analytic_grads(forward, params)
    numeric = numeric_grads(forward, params, coords=coords, rng=rng)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        mask = ~np.isnan(n)
        err = relative_error(a[mask], n[mask])
        worst = max(worst, err)
    assert worst <= tol, f"gradient mismatch: {worst} > {tol}"
    return worst


def scalarize(tensor) -> Tensor:
    """Reduce any tensor to a well-conditioned scalar for gradient checks."""
    flat = T.reshape(tensor, (-1,))
    weights = T.constant(np.linspace(0.3, 1.1, flat.data.size))
    return T.sum_(T.mul(flat, weights))

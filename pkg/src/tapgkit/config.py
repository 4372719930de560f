"""Run configuration: INI files mapped onto the component configs.

One file drives a whole run (generation, training, decoding, evaluation).
Sections and keys are strict: anything unrecognized is an error, so typos
fail loudly instead of silently using a default. Model input widths are not
configured here; they are read from the data at train time.

Threshold lists accept either an inclusive ``start:step:stop`` range
(``0.5:0.05:0.95``) or an explicit comma list (``0.5, 0.75``).
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tapgkit.boundary_net import BoundaryNetConfig
from tapgkit.data.synthetic import SyntheticConfig
from tapgkit.errors import ConfigError
from tapgkit.evaluation import EvalConfig
from tapgkit.inference import (
    HardSuppressionConfig,
    SoftSuppressionConfig,
    suppression_preset,
)
from tapgkit.representation import RepresentationConfig
from tapgkit.training import TrainConfig

DEFAULT_CONFIG = """\
[data]
root = corpus

[synthetic]
num_videos = 20
num_snippets = 32
snippet_stride = 16
fps = 8.0
env_dim = 16
actor_dim = 16
object_dim = 16
max_actors = 3
objects_per_snippet = 3
num_classes = 3
min_action_len = 2
max_action_len = 8
max_actions_per_video = 2
signal = 3.0
noise = 0.25
seed = 0

[representation]
feature_dim = 32
attention_hidden = 64
attention_mode = adaptive
use_environment = true
use_actors = true
use_objects = true

[boundary_net]
num_samples = 16
trunk_hidden = 64
trunk_out = 32
boundary_hidden = 64
proposal_conv3d_out = 128
proposal_conv2d_hidden = 32

[training]
epochs = 30
learning_rate = 0.001
mse_weight = 10.0
seed = 0

[inference]
preset = anet-tapg-snms
max_keep = 100

[evaluation]
tious = 0.5:0.05:0.95
max_budget = 100
report_budgets = 1, 5, 10, 100
"""


@dataclass
class BoundaryNetSettings:
    """Width knobs for the proposal network; input extents come from data."""
    max_duration: int | None = None
    num_samples: int = 16
    trunk_hidden: int = 64
    trunk_out: int = 32
    boundary_hidden: int = 64
    proposal_conv3d_out: int = 128
    proposal_conv2d_hidden: int = 32

    def build(self, feature_dim: int, num_snippets: int) -> BoundaryNetConfig:
        cfg = BoundaryNetConfig(feature_dim=feature_dim, num_snippets=num_snippets,
                                **dataclasses.asdict(self))
        cfg.validate()
        return cfg


@dataclass
class RunConfig:
    data_root: Path = Path("corpus")
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    representation: RepresentationConfig = field(default_factory=RepresentationConfig)
    boundary: BoundaryNetSettings = field(default_factory=BoundaryNetSettings)
    training: TrainConfig = field(default_factory=TrainConfig)
    suppression: SoftSuppressionConfig | HardSuppressionConfig = field(
        default_factory=lambda: suppression_preset("anet-tapg-snms"))
    evaluation: EvalConfig = field(default_factory=EvalConfig)


class _Section:
    """One INI section with typed access and consumed-key tracking."""

    def __init__(self, name: str, items: dict[str, str]):
        self.name = name
        self._items = items
        self._seen: set[str] = set()

    def _raw(self, key: str) -> str | None:
        self._seen.add(key)
        return self._items.get(key)

    def get_int(self, key: str, default: int) -> int:
        raw = self._raw(key)
        if raw is None or raw == "":
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {raw!r} is not an integer") from None

    def get_optional_int(self, key: str) -> int | None:
        raw = self._raw(key)
        if raw is None or raw == "":
            return None
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {raw!r} is not an integer") from None

    def get_float(self, key: str, default: float) -> float:
        raw = self._raw(key)
        if raw is None or raw == "":
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {raw!r} is not a number") from None

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self._raw(key)
        if raw is None or raw == "":
            return default
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key} = {raw!r} is not a boolean")

    def get_str(self, key: str, default: str) -> str:
        raw = self._raw(key)
        return default if raw in (None, "") else raw.strip()

    def check_consumed(self) -> None:
        unknown = sorted(set(self._items) - self._seen)
        if unknown:
            raise ConfigError(f"[{self.name}] unknown keys: {unknown}")


def parse_threshold_list(text: str, context: str) -> tuple[float, ...]:
    text = text.strip()
    try:
        if ":" in text:
            start_s, step_s, stop_s = text.split(":")
            start, step, stop = float(start_s), float(step_s), float(stop_s)
            if step <= 0 or stop < start:
                raise ValueError("range must ascend")
            count = int(round((stop - start) / step)) + 1
            values = tuple(np.round(start + step * np.arange(count), 10))
            if values and values[-1] > stop + 1e-9:
                values = values[:-1]
            return values
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as err:
        raise ConfigError(f"{context}: bad threshold list {text!r} ({err})") from None


def _int_list(text: str, context: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{context}: bad integer list {text!r}") from None


_KNOWN_SECTIONS = ("data", "synthetic", "representation", "boundary_net",
                   "training", "inference", "evaluation")


def load_run_config(path=None) -> RunConfig:
    """Parse an INI file into a RunConfig; with no path, return the defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is None:
        parser.read_string(DEFAULT_CONFIG)
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read_string(path.read_text())
        except configparser.Error as err:
            raise ConfigError(f"{path}: {err}") from err

    unknown_sections = sorted(set(parser.sections()) - set(_KNOWN_SECTIONS))
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {unknown_sections}")

    def section(name: str) -> _Section:
        items = dict(parser[name]) if parser.has_section(name) else {}
        return _Section(name, items)

    cfg = RunConfig()

    data = section("data")
    cfg.data_root = Path(data.get_str("root", "corpus"))
    data.check_consumed()

    syn = section("synthetic")
    base = SyntheticConfig()
    cfg.synthetic = SyntheticConfig(
        num_videos=syn.get_int("num_videos", base.num_videos),
        num_snippets=syn.get_int("num_snippets", base.num_snippets),
        snippet_stride=syn.get_int("snippet_stride", base.snippet_stride),
        fps=syn.get_float("fps", base.fps),
        env_dim=syn.get_int("env_dim", base.env_dim),
        actor_dim=syn.get_int("actor_dim", base.actor_dim),
        object_dim=syn.get_int("object_dim", base.object_dim),
        max_actors=syn.get_int("max_actors", base.max_actors),
        objects_per_snippet=syn.get_int("objects_per_snippet", base.objects_per_snippet),
        num_classes=syn.get_int("num_classes", base.num_classes),
        min_action_len=syn.get_int("min_action_len", base.min_action_len),
        max_action_len=syn.get_int("max_action_len", base.max_action_len),
        max_actions_per_video=syn.get_int("max_actions_per_video",
                                          base.max_actions_per_video),
        signal=syn.get_float("signal", base.signal),
        noise=syn.get_float("noise", base.noise),
        seed=syn.get_int("seed", base.seed),
    )
    syn.check_consumed()

    rep = section("representation")
    rep_base = RepresentationConfig()
    cfg.representation = RepresentationConfig(
        feature_dim=rep.get_int("feature_dim", rep_base.feature_dim),
        attention_hidden=rep.get_int("attention_hidden", rep_base.attention_hidden),
        attention_mode=rep.get_str("attention_mode", rep_base.attention_mode),
        use_environment=rep.get_bool("use_environment", rep_base.use_environment),
        use_actors=rep.get_bool("use_actors", rep_base.use_actors),
        use_objects=rep.get_bool("use_objects", rep_base.use_objects),
    )
    rep.check_consumed()

    net = section("boundary_net")
    net_base = BoundaryNetSettings()
    cfg.boundary = BoundaryNetSettings(
        max_duration=net.get_optional_int("max_duration"),
        num_samples=net.get_int("num_samples", net_base.num_samples),
        trunk_hidden=net.get_int("trunk_hidden", net_base.trunk_hidden),
        trunk_out=net.get_int("trunk_out", net_base.trunk_out),
        boundary_hidden=net.get_int("boundary_hidden", net_base.boundary_hidden),
        proposal_conv3d_out=net.get_int("proposal_conv3d_out",
                                        net_base.proposal_conv3d_out),
        proposal_conv2d_hidden=net.get_int("proposal_conv2d_hidden",
                                           net_base.proposal_conv2d_hidden),
    )
    net.check_consumed()

    tr = section("training")
    tr_base = TrainConfig()
    cfg.training = TrainConfig(
        epochs=tr.get_int("epochs", tr_base.epochs),
        learning_rate=tr.get_float("learning_rate", tr_base.learning_rate),
        mse_weight=tr.get_float("mse_weight", tr_base.mse_weight),
        seed=tr.get_int("seed", tr_base.seed),
    )
    tr.check_consumed()

    inf = section("inference")
    mode = inf.get_str("mode", "")
    max_keep = inf.get_int("max_keep", 100)
    if mode == "":
        sup = suppression_preset(inf.get_str("preset", "anet-tapg-snms"))
        sup.max_keep = max_keep
    elif mode == "soft":
        sup = SoftSuppressionConfig(
            sigma=inf.get_float("sigma", 0.4),
            overlap_offset=inf.get_float("overlap_offset", 0.0),
            distance_weight=inf.get_float("distance_weight", 0.0),
            score_floor=inf.get_float("score_floor", 1e-4),
            max_keep=max_keep,
        )
    elif mode == "hard":
        sup = HardSuppressionConfig(threshold=inf.get_float("threshold", 0.45),
                                    max_keep=max_keep)
    else:
        raise ConfigError(f"[inference] mode must be 'soft' or 'hard', got {mode!r}")
    sup.validate()
    cfg.suppression = sup
    inf.check_consumed()

    ev = section("evaluation")
    ev_base = EvalConfig()
    tious_text = ev.get_str("tious", "")
    tious = (parse_threshold_list(tious_text, "[evaluation] tious")
             if tious_text else ev_base.tious)
    budgets_text = ev.get_str("report_budgets", "")
    budgets = (_int_list(budgets_text, "[evaluation] report_budgets")
               if budgets_text else ev_base.report_budgets)
    cfg.evaluation = EvalConfig(
        tious=tuple(tious),
        max_budget=ev.get_int("max_budget", ev_base.max_budget),
        report_budgets=budgets,
    )
    cfg.evaluation.validate()
    ev.check_consumed()

    return cfg


def write_default_config(path) -> None:
    Path(path).write_text(DEFAULT_CONFIG)


def describe(cfg: RunConfig) -> dict:
    """JSON-friendly dump of a resolved run configuration."""
    payload = {
        "data": {"root": str(cfg.data_root)},
        "synthetic": dataclasses.asdict(cfg.synthetic),
        "representation": dataclasses.asdict(cfg.representation),
        "boundary_net": dataclasses.asdict(cfg.boundary),
        "training": dataclasses.asdict(cfg.training),
        "inference": {
            "kind": ("soft" if isinstance(cfg.suppression, SoftSuppressionConfig)
                     else "hard"),
            **dataclasses.asdict(cfg.suppression),
        },
        "evaluation": {
            "tious": list(cfg.evaluation.tious),
            "max_budget": cfg.evaluation.max_budget,
            "report_budgets": list(cfg.evaluation.report_budgets),
        },
    }
    return payload

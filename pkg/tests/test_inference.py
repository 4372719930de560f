"""Decoding, suppression and proposal files."""

import json
import math

import numpy as np
import pytest

from tapgkit.autodiff import tensor as T
from tapgkit.boundary_net import BoundaryNetOutput, valid_cells
from tapgkit.errors import ConfigError, EmptyInputError, FileFormatError
from tapgkit.inference import (
    HardSuppressionConfig,
    Proposal,
    SoftSuppressionConfig,
    boundary_candidates,
    generate_proposals,
    load_proposals,
    local_maxima,
    merge_class_scores,
    nms,
    normalized_center_distance,
    pair_candidates,
    save_proposals,
    soft_nms,
    suppress,
    suppression_preset,
)


def _iou(a, b):
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = (a.end - a.start) + (b.end - b.start) - inter
    return inter / union if union > 0 else 0.0


def _soft_nms_oracle(proposals, cfg):
    """Plain-list restatement of the decayed suppression loop."""
    live = [[p.start, p.end, p.score, i] for i, p in enumerate(proposals)]
    kept = []
    while live and len(kept) < cfg.max_keep:
        live.sort(key=lambda r: (-r[2], r[0], r[3]))
        top = live.pop(0)
        kept.append(Proposal(top[0], top[1], top[2]))
        survivors = []
        for row in live:
            a = Proposal(top[0], top[1], top[2])
            b = Proposal(row[0], row[1], row[2])
            centre_gap = abs(((row[0] + row[1]) / 2) - ((top[0] + top[1]) / 2))
            gap = centre_gap / (top[1] - top[0])
            if _iou(a, b) >= cfg.overlap_offset + cfg.distance_weight * gap:
                row[2] *= math.exp(-_iou(a, b) / cfg.sigma)
            if row[2] >= cfg.score_floor:
                survivors.append(row)
        live = survivors
    return kept


def _nms_oracle(proposals, cfg):
    live = sorted(([p.start, p.end, p.score, i] for i, p in enumerate(proposals)),
                  key=lambda r: (-r[2], r[0], r[3]))
    kept = []
    for row in live:
        if len(kept) >= cfg.max_keep:
            break
        candidate = Proposal(row[0], row[1], row[2])
        if all(_iou(candidate, k) <= cfg.threshold for k in kept):
            kept.append(candidate)
    return kept


class TestLocalMaxima:
    def test_interior_peak(self):
        got = local_maxima(np.array([0.1, 0.9, 0.2, 0.3, 0.1]))
        np.testing.assert_array_equal(got, [1, 3])

    def test_plateau_counts_every_point(self):
        # non-strict comparison keeps both ends of a flat top
        got = local_maxima(np.array([0.1, 0.5, 0.5, 0.1]))
        np.testing.assert_array_equal(got, [1, 2])

    def test_endpoints_compare_one_sided(self):
        got = local_maxima(np.array([0.9, 0.1, 0.8]))
        np.testing.assert_array_equal(got, [0, 2])

    def test_single_point(self):
        np.testing.assert_array_equal(local_maxima(np.array([0.4])), [0])

    def test_monotone_ramp(self):
        got = local_maxima(np.array([0.1, 0.2, 0.3, 0.4]))
        np.testing.assert_array_equal(got, [3])


class TestBoundaryCandidates:
    def test_includes_high_points_off_the_peak(self):
        # 0.55 is not a local max but clears half the sequence maximum
        values = np.array([0.1, 0.9, 0.55, 0.05, 0.2, 0.1])
        np.testing.assert_array_equal(boundary_candidates(values), [1, 2, 4])

    def test_near_flat_plateau_keeps_every_member(self):
        # float noise on a learned plateau must not hide the true boundary
        values = np.array([1e-6, 0.9999993, 0.9999992, 0.9997, 1e-4])
        np.testing.assert_array_equal(boundary_candidates(values), [1, 2, 3])

    def test_reduces_to_maxima_when_rest_is_low(self):
        values = np.array([0.01, 0.9, 0.01, 0.02, 0.01])
        np.testing.assert_array_equal(boundary_candidates(values), [1, 3])

    def test_ratio_parameter(self):
        values = np.array([0.3, 1.0, 0.05])
        np.testing.assert_array_equal(boundary_candidates(values, ratio=0.25),
                                      [0, 1])
        np.testing.assert_array_equal(boundary_candidates(values, ratio=0.5),
                                      [1])


def _toy_output(seed=0, num_snippets=8, max_duration=8):
    rng = np.random.default_rng(seed)
    return BoundaryNetOutput(
        start=T.constant(rng.uniform(0.05, 0.95, num_snippets)),
        end=T.constant(rng.uniform(0.05, 0.95, num_snippets)),
        actionness=T.constant(rng.uniform(0.05, 0.95, (max_duration, num_snippets))),
        valid=valid_cells(num_snippets, max_duration),
    )


class TestPairing:
    def test_scores_are_triple_products(self):
        out = _toy_output(seed=1)
        p_start, p_end = out.start.data, out.end.data
        p_grid = out.actionness.data
        got = {(s, e): score for s, e, score in pair_candidates(out)}
        expected = {}
        for s in boundary_candidates(p_start):
            for e in boundary_candidates(p_end):
                d = int(e) - int(s)
                if d < 1 or d > p_grid.shape[0] or not out.valid[d - 1, s]:
                    continue
                expected[(int(s), int(e))] = p_start[s] * p_end[e] * p_grid[d - 1, s]
        assert got.keys() == expected.keys()
        for key, want in expected.items():
            np.testing.assert_allclose(got[key], want, rtol=1e-6)

    def test_zero_length_pairs_excluded(self):
        out = _toy_output(seed=2)
        assert all(e > s for s, e, _ in pair_candidates(out))

    def test_duration_cap_respected(self):
        out = _toy_output(seed=3, num_snippets=12, max_duration=3)
        assert all(e - s <= 3 for s, e, _ in pair_candidates(out))


class TestSoftSuppression:
    def test_hand_worked_decay(self):
        # the runner-up overlaps the winner at iou 0.8, so with sigma 0.4 its
        # score shrinks by exp(-2)
        cfg = SoftSuppressionConfig(sigma=0.4, overlap_offset=0.5,
                                    distance_weight=0.0)
        kept = soft_nms([Proposal(0.0, 10.0, 0.9),
                         Proposal(0.0, 12.5, 0.5)], cfg)
        np.testing.assert_allclose(kept[1].score, 0.5 * math.exp(-2.0),
                                   atol=1e-6)

    def test_distance_term_raises_the_bar(self):
        # same geometry, but the centre-distance term lifts the threshold
        # above the observed iou, so no decay happens
        cfg = SoftSuppressionConfig(sigma=0.4, overlap_offset=0.78,
                                    distance_weight=0.4)
        kept = soft_nms([Proposal(0.0, 10.0, 0.9),
                         Proposal(0.0, 12.5, 0.5)], cfg)
        np.testing.assert_allclose(kept[1].score, 0.5, atol=1e-9)

    def test_score_floor_drops_proposals(self):
        cfg = SoftSuppressionConfig(sigma=0.01, overlap_offset=0.0,
                                    score_floor=1e-4)
        kept = soft_nms([Proposal(0.0, 10.0, 0.9),
                         Proposal(0.0, 10.0, 0.8)], cfg)
        assert len(kept) == 1

    def test_max_keep(self):
        cfg = SoftSuppressionConfig(sigma=0.4, max_keep=2)
        proposals = [Proposal(float(i), float(i) + 1.0, 0.5) for i in range(6)]
        assert len(soft_nms(proposals, cfg)) == 2

    def test_equal_scores_prefer_earlier_start(self):
        cfg = SoftSuppressionConfig(sigma=0.4, overlap_offset=2.0)
        kept = soft_nms([Proposal(5.0, 6.0, 0.7), Proposal(1.0, 2.0, 0.7)], cfg)
        assert kept[0].start == 1.0

    def test_empty_input(self):
        assert soft_nms([], SoftSuppressionConfig(sigma=0.4)) == []

    @pytest.mark.parametrize("seed", range(40))
    def test_randomized_against_oracle(self, seed):
        rng = np.random.default_rng(seed)
        proposals = []
        for _ in range(int(rng.integers(1, 13))):
            s = float(rng.uniform(0, 20))
            proposals.append(Proposal(s, s + float(rng.uniform(0.5, 10)),
                                      float(rng.uniform(0.1, 1.0))))
        cfg = SoftSuppressionConfig(
            sigma=float(rng.uniform(0.2, 0.8)),
            overlap_offset=float(rng.choice([0.0, 0.3, 0.5, 0.65])),
            distance_weight=float(rng.choice([0.0, 0.4])),
            max_keep=int(rng.integers(3, 15)))
        got = soft_nms(list(proposals), cfg)
        want = _soft_nms_oracle(proposals, cfg)
        assert len(got) == len(want)
        for g, w in zip(got, want):
            np.testing.assert_allclose([g.start, g.end, g.score],
                                       [w.start, w.end, w.score], rtol=1e-9)


class TestHardSuppression:
    def test_keeps_non_overlapping(self):
        cfg = HardSuppressionConfig(threshold=0.45)
        kept = nms([Proposal(0.0, 4.0, 0.9), Proposal(10.0, 14.0, 0.8),
                    Proposal(0.5, 4.5, 0.7)], cfg)
        assert [(k.start, k.end) for k in kept] == [(0.0, 4.0), (10.0, 14.0)]

    def test_iou_exactly_at_threshold_survives(self):
        # suppression fires only above the threshold, not at it
        cfg = HardSuppressionConfig(threshold=0.5)
        kept = nms([Proposal(0.0, 2.0, 0.9), Proposal(1.0, 3.0, 0.8)], cfg)
        assert len(kept) == 2

    @pytest.mark.parametrize("seed", range(40))
    def test_randomized_against_oracle(self, seed):
        rng = np.random.default_rng(1000 + seed)
        proposals = []
        for _ in range(int(rng.integers(1, 13))):
            s = float(rng.uniform(0, 20))
            proposals.append(Proposal(s, s + float(rng.uniform(0.5, 10)),
                                      float(rng.uniform(0.1, 1.0))))
        cfg = HardSuppressionConfig(threshold=float(rng.uniform(0.2, 0.7)),
                                    max_keep=int(rng.integers(3, 15)))
        got = nms(list(proposals), cfg)
        want = _nms_oracle(proposals, cfg)
        assert [(k.start, k.end, k.score) for k in got] == \
               [(k.start, k.end, k.score) for k in want]


class TestPresets:
    def test_named_parameter_sets(self):
        a = suppression_preset("anet-tapg-snms")
        assert (a.sigma, a.overlap_offset, a.distance_weight) == (0.4, 0.5, 0.4)
        t = suppression_preset("thumos-tapg-snms")
        assert (t.sigma, t.overlap_offset, t.distance_weight) == (0.3, 0.65, 0.0)
        d = suppression_preset("anet-tad-snms")
        assert (d.sigma, d.overlap_offset, d.distance_weight) == (0.4, 0.0, 0.0)
        h = suppression_preset("thumos-tad-nms")
        assert isinstance(h, HardSuppressionConfig) and h.threshold == 0.45

    def test_presets_return_copies(self):
        one = suppression_preset("anet-tapg-snms")
        one.sigma = 99.0
        assert suppression_preset("anet-tapg-snms").sigma == 0.4

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            suppression_preset("imaginary")

    def test_dispatcher_accepts_both_kinds(self):
        proposals = [Proposal(0.0, 2.0, 0.9), Proposal(0.1, 2.1, 0.8)]
        soft = suppress(list(proposals), suppression_preset("anet-tapg-snms"))
        hard = suppress(list(proposals), suppression_preset("thumos-tad-nms"))
        assert len(soft) >= len(hard)


class TestCentreDistance:
    def test_value(self):
        got = normalized_center_distance(Proposal(0.0, 10.0, 1.0),
                                         Proposal(2.5, 12.5, 0.5))
        np.testing.assert_allclose(got, 0.25)


class TestGenerateProposals:
    def test_snippets_become_seconds(self):
        out = _toy_output(seed=4)
        raw = pair_candidates(out)
        cfg = SoftSuppressionConfig(sigma=0.4, max_keep=200,
                                    overlap_offset=2.0)
        seconds = generate_proposals(out, snippet_stride=16, fps=8.0,
                                     suppression=cfg)
        factor = 16 / 8.0
        raw_spans = sorted((s * factor, e * factor) for s, e, _ in raw)
        got_spans = sorted((p.start, p.end) for p in seconds)
        np.testing.assert_allclose(got_spans, raw_spans)

    def test_suppression_is_applied(self):
        out = _toy_output(seed=5)
        tight = generate_proposals(out, 16, 8.0,
                                   HardSuppressionConfig(threshold=0.1))
        loose = generate_proposals(out, 16, 8.0,
                                   HardSuppressionConfig(threshold=0.99))
        assert len(tight) <= len(loose)


class TestClassScoreMerge:
    def test_top_classes_multiply_scores(self):
        proposals = [Proposal(0.0, 2.0, 0.5)]
        scored = merge_class_scores(proposals,
                                    {"swing": 0.8, "lift": 0.6, "kick": 0.1},
                                    top_k=2)
        got = {(d.label, round(d.score, 6)) for d in scored}
        assert got == {("swing", 0.4), ("lift", 0.3)}

    def test_empty_class_scores_rejected(self):
        with pytest.raises(EmptyInputError):
            merge_class_scores([Proposal(0.0, 1.0, 0.5)], {}, top_k=1)


class TestProposalFiles:
    def test_round_trip(self, tmp_path):
        table = {
            "vid_a": [Proposal(0.0, 2.5, 0.9), Proposal(3.0, 8.0, 0.4)],
            "vid_b": [],
        }
        path = tmp_path / "proposals.json"
        save_proposals(path, table)
        loaded = load_proposals(path)
        assert set(loaded) == {"vid_a", "vid_b"}
        for a, b in zip(table["vid_a"], loaded["vid_a"]):
            assert (a.start, a.end, a.score) == (b.start, b.end, b.score)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(FileFormatError):
            load_proposals(path)

    def test_missing_segment_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"v": [{"score": 0.5}]}))
        with pytest.raises(FileFormatError):
            load_proposals(path)

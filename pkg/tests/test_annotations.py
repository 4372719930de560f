"""Annotation schema, validation and second-to-snippet rescaling."""

import json

import numpy as np
import pytest

from tapgkit.data.annotations import (
    ActionInstance,
    VideoAnnotation,
    load_annotations,
    rescale_action,
    save_annotations,
)
from tapgkit.errors import AnnotationError


def _video(**overrides):
    base = dict(video_id="v0", duration=24.0, fps=8.0, frame_count=192,
                annotations=[ActionInstance(3.0, 7.0, "swing")])
    base.update(overrides)
    return VideoAnnotation(**base)


class TestSchema:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ann.json"
        videos = {"v0": _video(), "v1": _video(video_id="v1", annotations=[])}
        save_annotations(path, videos)
        loaded = load_annotations(path)
        assert set(loaded) == {"v0", "v1"}
        action = loaded["v0"].annotations[0]
        assert (action.start, action.end, action.label) == (3.0, 7.0, "swing")
        assert loaded["v1"].subset == "training"

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(AnnotationError):
            load_annotations(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text(json.dumps({"v0": {"duration": 5.0, "fps": 8.0}}))
        with pytest.raises(AnnotationError):
            load_annotations(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[]")
        with pytest.raises(AnnotationError):
            load_annotations(path)


class TestValidation:
    def test_inverted_segment_rejected(self):
        video = _video(annotations=[ActionInstance(7.0, 3.0, "x")])
        with pytest.raises(AnnotationError):
            video.validate()

    def test_segment_beyond_duration_rejected(self):
        video = _video(annotations=[ActionInstance(3.0, 25.0, "x")])
        with pytest.raises(AnnotationError):
            video.validate()

    def test_non_positive_metadata_rejected(self):
        with pytest.raises(AnnotationError):
            _video(fps=0.0).validate()
        with pytest.raises(AnnotationError):
            _video(frame_count=0).validate()


class TestRescale:
    def test_unit_factor_case(self):
        # 160 frames at 16 fps summarized by 10 snippets: one snippet per second
        got = rescale_action(2.0, 5.0, frame_count=160, fps=16.0, num_snippets=10)
        np.testing.assert_allclose(got, (2.0, 5.0))

    def test_stretching_factor_case(self):
        # 100 frames at 16 fps, 10 snippets: 1.6 snippet units per second
        got = rescale_action(2.0, 5.0, frame_count=100, fps=16.0, num_snippets=10)
        np.testing.assert_allclose(got, (3.2, 8.0))

    def test_power_of_two_fps_is_exact(self):
        got = rescale_action(6.0, 14.0, frame_count=512, fps=8.0, num_snippets=32)
        assert got == (3.0, 7.0)

    def test_full_video_maps_to_full_axis(self):
        duration = 512 / 8.0
        got = rescale_action(0.0, duration, frame_count=512, fps=8.0, num_snippets=32)
        assert got == (0.0, 32.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_randomized_against_direct_formula(self, seed):
        rng = np.random.default_rng(seed)
        frame_count = int(rng.integers(50, 2000))
        fps = float(rng.uniform(5.0, 60.0))
        num_snippets = int(rng.integers(8, 128))
        start = float(rng.uniform(0.0, 10.0))
        end = start + float(rng.uniform(0.1, 20.0))
        got = rescale_action(start, end, frame_count, fps, num_snippets)
        factor = num_snippets * fps / frame_count
        np.testing.assert_allclose(got, (start * factor, end * factor), rtol=1e-12)

    def test_invalid_inputs_rejected(self):
        with pytest.raises(AnnotationError):
            rescale_action(5.0, 3.0, 100, 8.0, 10)
        with pytest.raises(AnnotationError):
            rescale_action(1.0, 2.0, 0, 8.0, 10)
        with pytest.raises(AnnotationError):
            rescale_action(-1.0, 2.0, 100, 8.0, 10)

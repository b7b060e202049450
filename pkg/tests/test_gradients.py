"""
Tests for the rendering gradient suite.
"""
import numpy as np
import pytest

from splat_volume.numerics.gradcheck import report_passed
from splat_volume.pipeline.gradients import (
    check_decoder_gradients,
    check_splat_gradients,
    random_camera,
    random_splats,
    run_gradient_suite,
)


def test_random_fixtures():
    rng = np.random.default_rng(0)
    cam = random_camera(rng, size=16)
    assert 2.0 <= np.linalg.norm(cam.center) <= 3.0
    splats = random_splats(rng, 5)
    splats.validate()
    assert len(splats) == 5
    np.testing.assert_allclose(np.linalg.norm(splats.q, axis=1), 1.0)


def test_splat_gradients():
    report = check_splat_gradients(np.random.default_rng(1), max_splats=3, size=12)
    assert set(report.errors) == {"p", "q", "s", "alpha", "sh"}
    assert report_passed(report)


def test_decoder_gradients():
    report = check_decoder_gradients(np.random.default_rng(2), size=12, max_entries=6)
    assert report.errors
    assert report_passed(report)


def test_suite_report():
    report = run_gradient_suite(num_scenes=1, seed=3, max_splats=2, size=12, decoder=False)
    assert [record["scene"] for record in report["scenes"]] == [0]
    assert report["tolerance"] == 1e-3
    assert report["passed"]
    assert report["max_relative_error"] == report["scenes"][0]["splats"]


@pytest.mark.slow
def test_twenty_scenes():
    assert run_gradient_suite(num_scenes=20, seed=0)["passed"]

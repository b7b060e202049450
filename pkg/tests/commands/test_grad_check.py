"""
Tests for the grad_check management command.
"""
from unittest.mock import patch

import django.core.management.base
import pytest
from django.core.management import call_command

from splat_volume.formats import read_json


def test_grad_check(tmp_path, caplog):
    out = str(tmp_path / "grad_report.json")
    call_command("grad_check", out=out, scenes=1, max_splats=2, no_decoder=True, seed=3)

    report = read_json(out)
    assert report["passed"]
    assert len(report["scenes"]) == 1
    assert "Gradient check passed" in caplog.text


@patch("splat_volume.management.commands.grad_check.run_gradient_suite")
def test_grad_check_options(mock_suite, tmp_path):
    mock_suite.return_value = {"scenes": [], "max_relative_error": 0.0, "tolerance": 0.01, "passed": True}
    call_command("grad_check", out=str(tmp_path / "report.json"), scenes=5, max_splats=3, tolerance=0.01)

    mock_suite.assert_called_once_with(num_scenes=5, seed=0, max_splats=3, tol=0.01, decoder=True)


@patch("splat_volume.management.commands.grad_check.run_gradient_suite")
def test_grad_check_failure(mock_suite, tmp_path, caplog):
    out = str(tmp_path / "report.json")
    mock_suite.return_value = {"scenes": [], "max_relative_error": 0.5, "tolerance": 1e-3, "passed": False}
    with pytest.raises(django.core.management.base.CommandError) as error:
        call_command("grad_check", out=out)

    assert "Gradient check failed: max relative error 5.000e-01" in str(error.value)
    assert read_json(out)["passed"] is False
    assert "Gradient check failed" in caplog.text


@pytest.mark.parametrize("options", [{"scenes": 0}, {"max_splats": 0}])
def test_grad_check_invalid(options, tmp_path):
    with pytest.raises(django.core.management.base.CommandError):
        call_command("grad_check", out=str(tmp_path / "report.json"), **options)

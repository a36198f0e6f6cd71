"""Command-line surface: determinism, exit codes, output schemas."""

import json
import math

import pytest

from cusplab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_model_kernel_single_point(capsys):
    code, out, _ = run(capsys, "model-kernel", "--p", "100", "--z-abs", "0.5")
    assert code == 0
    doc = json.loads(out)
    (z, logk, tail), = doc["rows"]
    # flat-region plateau (p-1)/(2 pi)
    assert abs(math.exp(logk) - 99 / (2 * math.pi)) <= 1e-3 * 99 / (2 * math.pi)
    assert abs(math.exp(logk) - 15.756338) <= 2e-5
    assert tail <= 1e-12
    assert doc["config"]["p"] == 100 and "version" in doc["config"]


def test_model_kernel_grid_shape(capsys):
    # log B_p rises from the cusp depth to a peak near s = -p before
    # settling onto the flat plateau (p-1)/(2 pi)
    code, out, _ = run(capsys, "model-kernel", "--p", "10",
                       "--grid", "s:-40:-4:100")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rows"]) == 100
    logs = [r[1] for r in doc["rows"]]
    svals = [2 * math.log(r[0]) for r in doc["rows"]]
    peak = svals[logs.index(max(logs))]
    assert -14.0 <= peak <= -8.0
    assert logs[1] > logs[0]
    assert abs(math.exp(logs[-1]) * 2 * math.pi / 9.0 - 1.0) < 0.01


def test_p_below_two_is_config_error(capsys):
    code, _, err = run(capsys, "model-kernel", "--p", "1", "--z-abs", "0.5")
    assert code == 2
    assert "p >= 2" in err


def test_unknown_command_is_config_error(capsys):
    assert main(["frobnicate"]) == 2


def test_byte_identical_reruns(capsys):
    args = ("zeros", "--p", "12", "--samples", "40", "--seed", "9",
            "--annulus=-2:2")
    code1, out1, _ = run(capsys, *args)
    code2, out2, _ = run(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2


def test_zeros_summary(capsys):
    code, out, _ = run(capsys, "zeros", "--p", "10", "--samples", "30",
                       "--seed", "4", "--annulus=-2:2")
    assert code == 0
    doc = json.loads(out)
    assert doc["theoretical"] == pytest.approx(0.25, abs=1e-15)
    assert doc["mass_conservation"] is True
    assert doc["failures"] == 0


def test_quotient_scan_summary(capsys):
    code, out, _ = run(capsys, "quotient-scan", "--p-ladder", "20,40",
                       "--s-range=-30:-8", "--s-points", "40")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["sup_quotient_minus_1"]) == 2
    assert doc["sup_quotient_minus_1"][1] < doc["sup_quotient_minus_1"][0]
    assert doc["slope_quotient"] < 0


def test_csv_format_embeds_config(capsys):
    code, out, _ = run(capsys, "model-kernel", "--p", "10", "--z-abs", "0.3",
                       "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# cusplab")
    assert lines[1].startswith("# config")
    header_idx = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
    assert lines[header_idx] == "z_abs,log_kernel,certified_relative_tail"
    assert len(lines) == header_idx + 2


def test_basis_command(capsys):
    code, out, _ = run(capsys, "basis", "--p", "40")
    assert code == 0
    doc = json.loads(out)
    assert doc["dimension"] == 39
    assert doc["head_count"] == 6
    assert doc["echelon_residual_scaled"] <= 1e-9
    rows = doc["rows"]
    assert rows[0][1] <= 1e-8  # sigma defect of the first head


def test_fs_metric_command(capsys):
    code, out, _ = run(capsys, "fs-metric", "--p", "30", "--grid", "s:-20:-6:10")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rows"]) == 10
    for s, density, defect, eta in doc["rows"]:
        assert density > 0
        assert defect >= 0


def test_output_file(tmp_path, capsys):
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "model-kernel", "--p", "10", "--z-abs", "0.3",
                       "--output", str(target))
    assert code == 0
    assert out == ""
    doc = json.loads(target.read_text())
    assert doc["rows"]


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert lines and all(ln.startswith("PASS") for ln in lines)

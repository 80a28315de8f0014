import json
import subprocess
import sys

import numpy as np
import pytest

from taylorlab.cli import (EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, ConfigError,
                           default_schedule, field_pixels, main, parse_alpha_list,
                           parse_axis, parse_fix, parse_scale_axis, read_pgm,
                           write_pgm)
from taylorlab.kernel import TaylorletKernel
from taylorlab.transform import TransformField


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_axis():
    np.testing.assert_array_equal(parse_axis("-2:2:5"), [-2, -1, 0, 1, 2])
    np.testing.assert_array_equal(parse_axis("0.5:0.5:1"), [0.5])
    for bad in ("1:2", "a:b:3", "0:1:0", "0:1:1", "1:0:4"):
        with pytest.raises(ConfigError):
            parse_axis(bad)


def test_parse_scale_axis():
    ax = parse_scale_axis("1:8:64")
    assert ax[0] == 0.5 and ax[-1] == 2.0 ** -8 and ax.size == 64
    assert parse_scale_axis("3:3:1").tolist() == [0.125]
    for bad in ("1:8", "1:1:4", "1:2:1", "x:2:3"):
        with pytest.raises(ConfigError):
            parse_scale_axis(bad)


def test_parse_fix_and_alpha():
    assert parse_fix(["s0=0.5", "s2=-1"], 2) == [0.5, 0.0, -1.0]
    assert parse_fix(None, 1) == [0.0, 0.0]
    for bad in (["s3=1"], ["t0=1"], ["s1"], ["s1=x"]):
        with pytest.raises(ConfigError):
            parse_fix(bad, 2)
    assert default_schedule(2) == [1.01, 0.51, 0.34]
    assert parse_alpha_list(None, 2) == [1.01, 0.51, 0.34]
    assert parse_alpha_list("1.1,0.6,0.4", 2) == [1.1, 0.6, 0.4]
    with pytest.raises(ConfigError):
        parse_alpha_list("1.1", 2)
    with pytest.raises(ConfigError):
        parse_alpha_list("1.1,x,0.3", 2)


def test_kernel_build_defaults(tmp_path, capsys):
    path = tmp_path / "k.json"
    code, out, err = run(capsys, "kernel-build", "--out", str(path))
    assert code == EXIT_OK
    assert "plateau_value=0.28907" in out
    assert "support_reach=262144.0" in out and "moments=5" in out
    assert "warning" in err
    kern = TaylorletKernel.from_json(path.read_text())
    assert kern.spec.t0 == 0.125 and kern.spec.steps == 10


def test_kernel_build_steps_zero(tmp_path, capsys):
    path = tmp_path / "k0.json"
    code, out, _ = run(capsys, "kernel-build", "--steps", "0", "--out", str(path))
    assert code == EXIT_OK and "level=0" in out and "plateau_value=1.0" in out


def test_kernel_build_rejects_boundary_shift(tmp_path, capsys):
    path = tmp_path / "bad.json"
    code, _, err = run(capsys, "kernel-build", "--t0", "0.0625", "--out", str(path))
    assert code == EXIT_CONFIG and "eps**v_n" in err
    assert not path.exists()
    code, _, _ = run(capsys, "kernel-build", "--t0", "0.0625", "--allow-wide-shift",
                     "--out", str(path))
    assert code == EXIT_OK and path.exists()


@pytest.mark.parametrize("argv", [["kernel-build", "--q", "1.0"],
                                  ["kernel-build", "--eps", "0"],
                                  ["kernel-build", "--steps", "-1"],
                                  ["transform", "--signal", "nosuch(x)"],
                                  ["transform", "--a-range", "1:2"],
                                  ["bogus-command"],
                                  ["transform", "--alpha", "fast"]])
def test_config_errors(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(argv)
    capsys.readouterr()
    assert code == EXIT_CONFIG


def test_kernel_round_trip_bit_equal(tmp_path, capsys):
    path = tmp_path / "k.json"
    run(capsys, "kernel-build", "--out", str(path))
    text = path.read_text()
    kern = TaylorletKernel.from_json(text)
    assert kern.to_json() == text
    with pytest.warns(UserWarning):
        fresh = TaylorletKernel.build(kern.spec, strict=False)
    x = np.linspace(-2 * kern.g.reach, 2 * kern.g.reach, 4001) + kern.g.t0
    np.testing.assert_array_equal(kern.g(x), fresh.g(x))
    w = np.linspace(-10, 10, 501)
    np.testing.assert_array_equal(kern.table.G(w), fresh.table.G(w))
    assert json.loads(text) == json.loads(fresh.to_json())


def test_kernel_check_small(tmp_path, capsys):
    path = tmp_path / "k5.json"
    run(capsys, "kernel-build", "--steps", "5", "--out", str(path))
    code, out, _ = run(capsys, "kernel-check", str(path))
    assert code == EXIT_OK
    lines = out.splitlines()
    half = lines[lines.index("l,value,relative,expect,status") + 1:][:6]
    for row in half[:5]:
        ell, val, rel, expect, status = row.split(",")
        assert expect == "zero" and status == "pass" and float(rel) <= 1e-8
    assert half[5].split(",")[3:] == ["nonzero", "pass"]
    assert "sup|psi-phi_5|" in out
    assert "fail" not in out


def test_kernel_check_restrictive_formula(tmp_path, capsys):
    path = tmp_path / "k.json"
    run(capsys, "kernel-build", "--t0", "0.03125", "--moments", "3", "--out", str(path))
    code, out, _ = run(capsys, "kernel-check", str(path))
    assert code == EXIT_OK
    lines = out.splitlines()
    start = lines.index("m,value,formula,relative_deviation,status") + 1
    m, val, ref, dev, status = lines[start].split(",")
    assert m == "0" and status == "pass"
    # the m = 0 moment equals c * t0
    c = float(out.split("c=")[1].split()[0])
    assert float(val) == pytest.approx(c * 0.03125, rel=1e-7)


def test_kernel_check_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "kernel-check", str(tmp_path / "nope.json"))
    assert code == EXIT_CONFIG and err


def test_transform_single_value(capsys):
    code, out, _ = run(capsys, "transform", "--a-range", "3:3:1",
                       "--s-range", "0.9:0.9:1", "--fix", "s1=1", "--fix", "s2=1",
                       "--signal", "exp")
    assert code == EXIT_OK
    val = float(out.strip())
    assert np.isfinite(val) and val != 0.0


def test_transform_csv_and_plot(tmp_path, capsys):
    csv_path = tmp_path / "f.csv"
    pgm_path = tmp_path / "f.pgm"
    code, out, _ = run(capsys, "transform", "--a-range", "1:4:5",
                       "--s-range", "-0.5:0.5:7", "--fix", "s1=1",
                       "--out", str(csv_path))
    assert code == EXIT_OK and "5x7" in out
    fld = TransformField.from_csv(csv_path.read_text())
    assert fld.shape == (5, 7) and fld.fixed_s == (0.0, 1.0, 0.0)
    code, out, _ = run(capsys, "plot", str(csv_path), "--out", str(pgm_path),
                       "--marker", "0")
    assert code == EXIT_OK
    pix = read_pgm(pgm_path)
    assert pix.shape == (5, 7)
    assert np.all(pix[:, 3] == 128)


def test_transform_normalize_and_negative_ranges(capsys):
    code, out, _ = run(capsys, "transform", "--a-range", "2:3:2",
                       "--s-range", "-1:-0.5:3", "--fix", "s1=1", "--normalize")
    assert code == EXIT_OK
    fld = TransformField.from_csv(out)
    assert fld.normalized and fld.s_axis[0] == -1.0
    np.testing.assert_allclose(fld.values.max(axis=1), 1.0)


def test_plot_examples(tmp_path, capsys):
    src = tmp_path / "two.csv"
    src.write_text(TransformField([0.5, 0.25], [0.0, 1.0], 0, (0, 0, 0),
                                  [[0, 1], [1, 0]]).to_csv())
    out = tmp_path / "two.pgm"
    assert run(capsys, "plot", str(src), "--out", str(out))[0] == EXIT_OK
    np.testing.assert_array_equal(read_pgm(out), [[0, 255], [255, 0]])
    zero = TransformField([0.5, 0.25, 0.125], [0.0, 1.0, 2.0], 0, (0, 0, 0), np.zeros((3, 3)))
    assert not field_pixels(zero).any()


def test_plot_puts_coarsest_on_top():
    fld = TransformField([0.25, 0.5], [0.0, 1.0], 0, (0, 0, 0), [[0, 1], [1, 0]])
    np.testing.assert_array_equal(field_pixels(fld), [[255, 0], [0, 255]])


def test_plot_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,field\n")
    assert run(capsys, "plot", str(bad), "--out", str(tmp_path / "x.pgm"))[0] == EXIT_CONFIG
    assert run(capsys, "plot", str(tmp_path / "missing.csv"))[0] == EXIT_CONFIG


def test_pgm_round_trip(tmp_path):
    pix = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    write_pgm(tmp_path / "p.pgm", pix)
    assert (tmp_path / "p.pgm").read_bytes().startswith(b"P5\n4 3\n255\n")
    np.testing.assert_array_equal(read_pgm(tmp_path / "p.pgm"), pix)


def test_detect_failure_writes_partial_report(tmp_path, capsys):
    out = tmp_path / "rep.txt"
    code, stdout, err = run(capsys, "detect", "--signal", "5.0", "--a-range", "6:8:4",
                            "--s-range", "-1:1:9", "--out", str(out))
    assert code == EXIT_NUMERIC
    assert "failed_stage=0" in out.read_text()
    assert "no maxima path" in err


def test_detect_writes_report(tmp_path, capsys):
    out = tmp_path / "rep.csv"
    code, stdout, _ = run(capsys, "detect", "--signal", "0.5", "--a-range", "1:6:12",
                          "--s-range", "-2:2:24", "--out", str(out))
    assert code == EXIT_OK
    assert "s0=" in stdout and "s2.alpha=0.34" in stdout
    rows = out.read_text().splitlines()
    assert rows[0] == "stage,alpha,estimate,slope,residual" and len(rows) == 4
    assert abs(float(rows[1].split(",")[2]) - 0.5) < 0.2


def test_detect_rejects_bad_ranges(capsys):
    code, _, _ = run(capsys, "detect", "--s-range", "-1:1:9", "--s-range", "-1:1:9")
    assert code == EXIT_CONFIG
    code, _, _ = run(capsys, "detect", "--s-range", "0:0:1")
    assert code == EXIT_CONFIG


def test_numeric_failure_exit(capsys):
    code, _, err = run(capsys, "transform", "--a-range", "8:8:1", "--s-range", "0:0:1",
                       "--fix", "s1=1", "--tol", "1e-300")
    assert code == EXIT_NUMERIC and "no convergence" in err
    assert run(capsys, "transform", "--tol", "0")[0] == EXIT_CONFIG


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "taylorlab", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "kernel-build" in res.stdout

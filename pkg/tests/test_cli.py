import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from memkernel import __version__
from memkernel.cli import main, parse_axis, read_config
from memkernel.errors import DomainError

MANIFEST_KEYS = {"tool", "version", "subcommand", "params", "outputs", "created"}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def check_manifest(out, command):
    manifest = json.loads((out / "manifest.json").read_text())
    assert MANIFEST_KEYS <= set(manifest)
    assert manifest["version"] == __version__
    assert manifest["subcommand"] == command
    for name in manifest["outputs"]:
        assert (out / name).exists()
    return manifest


@pytest.fixture(autouse=True)
def no_env_out(monkeypatch):
    monkeypatch.delenv("MEMKERNEL_OUT", raising=False)


def test_kernels_csv(tmp_path):
    out = tmp_path / "k"
    assert main(["kernels", "--kind", "R", "--eta", "1", "--omega", "1",
                 "--tau-max", "50", "--out", str(out)]) == 0
    rows = read_csv(out / "kernels.csv")
    assert list(rows[0]) == ["tau", "value", "kind", "method", "eta", "omega_cut", "gamma"]
    assert float(rows[0]["tau"]) == 0.0
    assert float(rows[0]["value"]) == pytest.approx(1 / (2 * np.pi), rel=1e-12)
    assert float(rows[-1]["tau"]) == 50.0
    manifest = check_manifest(out, "kernels")
    assert manifest["params"]["tau_max"] == 50.0


def test_audit_preset(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["audit", "--preset", "paper", "--out", str(out)]) == 0
    report = json.loads((out / "audit.json").read_text())
    assert report["ordering_pass"] is True
    assert 5e24 <= report["k_real"] <= 2e25
    assert json.loads(capsys.readouterr().out) == report
    check_manifest(out, "audit")


def test_audit_flag_overrides_preset(tmp_path):
    out = tmp_path / "a"
    assert main(["audit", "--preset", "paper", "--gamma", "1e8", "--out", str(out)]) == 0
    report = json.loads((out / "audit.json").read_text())
    assert report["ordering_pass"] is False


def test_audit_needs_inputs(tmp_path):
    assert main(["audit", "--eta", "1", "--out", str(tmp_path)]) == 2


def test_relax_analyze(tmp_path):
    out = tmp_path / "r"
    assert main(["relax", "--mode", "memory", "--omega-ratio", "20", "--t-end", "80",
                 "--analyze", "--out", str(out)]) == 0
    rows = read_csv(out / "trajectory.csv")
    assert list(rows[0]) == ["t", "q", "v"]
    analysis = json.loads((out / "analysis.json").read_text())
    assert analysis["classification"] in ("tailed", "exponential")
    assert {"fitted_rate", "fit_window", "tail_residual", "threshold"} <= set(analysis)
    check_manifest(out, "relax")


def test_weights_and_convolve(tmp_path):
    assert main(["weights", "--gamma", "0.01", "--out", str(tmp_path / "w")]) == 0
    weights = json.loads((tmp_path / "w" / "weights.json").read_text())
    assert weights["tau_R"] == pytest.approx(0.014658871124574433, rel=1e-14)
    assert main(["convolve", "--gamma", "10", "--out", str(tmp_path / "c")]) == 0
    report = json.loads((tmp_path / "c" / "report.json").read_text())
    assert report["sup_rel"] < 0.05
    rows = read_csv(tmp_path / "c" / "convolution.csv")
    assert list(rows[0]) == ["t", "exact", "markov"]


def test_influence(tmp_path):
    assert main(["influence", "--gamma", "2", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "influence.json").read_text())
    assert {"real_part", "imag_part", "hbar", "gamma", "T", "decoherence_factor"} <= set(data)


def test_byte_identical_outputs(tmp_path):
    for name in ("one", "two"):
        assert main(["kernels", "--kind", "I_damped", "--gamma", "0.3",
                     "--out", str(tmp_path / name)]) == 0
        assert main(["audit", "--preset", "paper", "--out", str(tmp_path / name)]) == 0
    for fname in ("kernels.csv", "audit.json"):
        assert (tmp_path / "one" / fname).read_bytes() == (tmp_path / "two" / fname).read_bytes()


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# kernel table\nkind = I\ntau-max = 5\nn_tau = 11\n"
                   f"out = {tmp_path / 'from_config'}\n")
    assert main(["kernels", "--config", str(cfg), "--n-tau", "21"]) == 0
    rows = read_csv(tmp_path / "from_config" / "kernels.csv")
    assert len(rows) == 21
    assert rows[0]["kind"] == "I"
    assert float(rows[-1]["tau"]) == 5.0


def test_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv("MEMKERNEL_OUT", str(tmp_path / "env"))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"out = {tmp_path / 'cfg'}\n")
    assert main(["weights", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "weights.json").exists()
    assert main(["weights", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "weights.json").exists()


@pytest.mark.parametrize("argv", [
    ["kernels", "--bogus", "1"],
    ["kernels", "--kind", "Q"],
    ["kernels", "--eta", "-1"],
    ["kernels", "--eta", "abc"],
    ["kernels", "--kind", "R", "--gamma", "1"],
    ["weights", "--method", "quadrature"],
    ["relax", "--dt", "0.1"],
    ["sweep", "--axis", "gamma="],
    ["sweep", "--axis", "gamma=lin:0:1:201"],
    ["sweep", "--axis", "kind=1,2"],
    ["sweep"],
])
def test_validation_exit_code(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path / "o")]) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["kernels", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["weights", "--out", str(blocker / "sub")]) == 2


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    from memkernel import cli
    from memkernel.errors import NumericError

    def boom(*args, **kwargs):
        raise NumericError("did not converge", achieved=1.0)

    monkeypatch.setattr(cli, "markov_weight", boom)
    assert main(["weights", "--out", str(tmp_path)]) == 3


def test_parse_axis():
    assert parse_axis("gamma=1,2,3") == ("gamma", [1.0, 2.0, 3.0])
    name, values = parse_axis("omega-ratio=log:1:100:3")
    assert name == "omega_ratio"
    np.testing.assert_allclose(values, [1, 10, 100])
    assert parse_axis("eta=lin:0:1:5")[1] == [0.0, 0.25, 0.5, 0.75, 1.0]
    for bad in ("gamma", "gamma=", "gamma=log:0:1:3", "gamma=lin:a:b:c",
                "gamma=lin:0:1:201"):
        with pytest.raises(DomainError):
            parse_axis(bad)


def test_read_config_repeats_axis(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("axis = gamma=1,2\naxis = eta=1,2\ntarget = weights\n")
    assert read_config(cfg) == {"axis": ["gamma=1,2", "eta=1,2"], "target": "weights"}
    cfg.write_text("novalue\n")
    with pytest.raises(DomainError):
        read_config(cfg)


def test_sweep_velocity_coeff_monotone(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--axis", "gamma=log:1e-3:10:12", "--set", "omega=1",
                 "--workers", "2", "--out", str(out)]) == 0
    rows = read_csv(out / "summary.csv")
    assert [r["point"] for r in rows] == [f"point_{i:04d}" for i in range(12)]
    coeff = np.array([float(r["velocity_coeff"]) for r in rows])
    assert np.all(np.diff(coeff) < 0)
    for r in rows:
        assert (out / r["point"] / "weights.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["target"] == "weights"
    assert len(manifest["axes"]["gamma"]) == 12


def test_sweep_two_axes_order_independent_of_workers(tmp_path):
    args = ["sweep", "--target", "audit", "--axis", "gamma=1e9,1e10,1e11",
            "--axis", "eta=1e8,1e9", "--set", "omega=1e12", "--set", "mass_b=1e-24"]
    assert main(args + ["--workers", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--workers", "3", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "summary.csv").read_bytes()
    assert a == (tmp_path / "b" / "summary.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "summary.csv")
    assert len(rows) == 6
    assert {"gamma_over_eta", "omega_over_gamma", "k_real"} <= set(rows[0])


@pytest.mark.slow
def test_sweep_tail_residual_decreases_with_cutoff(tmp_path):
    out = tmp_path / "tails"
    assert main(["sweep", "--target", "relax", "--axis", "omega_ratio=20,50,100",
                 "--out", str(out)]) == 0
    rows = read_csv(out / "summary.csv")
    tails = [float(r["tail_residual"]) for r in rows]
    assert tails[0] > tails[1] > tails[2]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "memkernel", "audit", "--preset", "paper",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["ordering_pass"] is True
    bad = subprocess.run([sys.executable, "-m", "memkernel", "kernels", "--nope"],
                         capture_output=True, text=True)
    assert bad.returncode == 2

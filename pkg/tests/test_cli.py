import json

import numpy as np
import pytest

from vpcal import cli
from vpcal.errors import ConfigError

SPHERE = """
# unit disk
grid.n = 64
grid.L = 3.0
shape.kind = sphere
shape.R = 1.0
shape.center = 1.5, 1.5
calibration.delta = 0.3
verifier.samples = 2000
flow.N = 5
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_parse_and_resolve_defaults():
    cfg = cli.resolve_config(cli.parse_config(SPHERE))
    assert cfg["grid.n"] == 64 and cfg["shape.center"] == [1.5, 1.5]
    assert cfg["flow.h_t"] == 24 * (3.0 / 64) ** 2
    assert cfg["verifier.dt"] == 1e-3 * cfg["shape.T"]


@pytest.mark.parametrize("text,key", [
    ("grid.nn = 3", "grid.nn"),
    ("grid.n = abc", "grid.n"),
    ("grid.n = 64\ngrid.n = 64", "grid.n"),
    ("flow.h_t = 1e-9", "flow.h_t"),
    ("flow.h_t = -1", "flow.h_t"),
    ("calibration.delta = 0.9", "calibration.delta"),
    ("shape.kind = cube", "shape.kind"),
    ("shape.R = 0.7", "shape.center"),
    ("shape.kind = balls\nshape.centers = 0.3, 0.5\nshape.radii = 0.1, 0.1", "shape.radii"),
    ("grid.L = 0", "grid.L"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        cli.resolve_config(cli.parse_config(text))
    assert exc.value.key == key
    assert key in str(exc.value)


def test_simulate_with_bad_h_t_writes_error_record(tmp_path):
    cfg = write(tmp_path, "grid.n = 128\nflow.h_t = 1e-5\n")
    out = tmp_path / "out"
    assert cli.run("simulate", cfg, out, quiet=True) == cli.EXIT_CONFIG
    rec = json.loads((out / "error.json").read_text())
    assert rec["error"] == "ConfigError" and rec["key"] == "flow.h_t"


def test_module_error_maps_to_exit_code(tmp_path):
    cfg = write(tmp_path, "grid.n = 64\nshape.kind = balls\nshape.centers = 0.3, 0.5; 0.75, 0.5\n"
                          "shape.radii = 0.2, 0.1\ncalibration.delta = 0.04\nshape.T = 0.001\n")
    out = tmp_path / "out"
    assert cli.run("calibrate", cfg, out, quiet=True) == cli.EXIT_ERROR
    assert json.loads((out / "error.json").read_text())["error"] == "IncompatibleData"


def test_verify_and_calibrate_outputs(tmp_path):
    cfg = write(tmp_path, SPHERE)
    out = tmp_path / "out"
    assert cli.main(["all", "--config", str(cfg), "--out", str(out), "--quiet"]) == cli.EXIT_PASS
    d, n, vals, lam = cli.read_fields(out / "calibration.fields")
    assert (d, n, vals.shape, lam) == (2, 64, (4096, 5), 1.0)
    lines = (out / "residuals.csv").read_text().splitlines()
    assert lines[0] == "condition,order,sup_residual,interface_residual,fitted_constant,pass"
    assert len(lines) == 11 and all(l.endswith(",1") for l in lines[1:])
    # 17 significant digits in scientific notation
    assert lines[1].split(",")[2].count("e") == 1 and len(lines[1].split(",")[2].split("e")[0]) == 18
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0].startswith("# grid.n=64") and "n,t,volume" in trace[7]
    data = np.loadtxt(out / "trace.csv", delimiter=",", comments="#", skiprows=8)
    assert data.shape == (6, 8) and np.all(data[:, 3] == data[0, 3])
    for name in ("entropy.csv", "neumann_convergence.csv", "resolved-config.cfg", "run.log", "verdicts.csv"):
        assert (out / name).exists()


def test_resolved_config_round_trip(tmp_path):
    cfg = cli.resolve_config(cli.parse_config(SPHERE), seed=7, out="x")
    again = cli.resolve_config(cli.parse_config(cfg.dump()))
    assert again.values == cfg.values and again.seed == 7


def test_snapshots_written_at_stride(tmp_path):
    cfg = write(tmp_path, SPHERE + "flow.snapshot_stride = 2\n")
    out = tmp_path / "out"
    assert cli.run("simulate", cfg, out, quiet=True) == cli.EXIT_PASS
    assert sorted(p.name for p in out.glob("snapshot_*.vpmf")) == [
        "snapshot_000000.vpmf", "snapshot_000002.vpmf", "snapshot_000004.vpmf"]

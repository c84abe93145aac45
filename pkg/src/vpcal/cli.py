"""Command-line experiment runner.

Usage::

    vpcal <subcommand> --config run.cfg [--out DIR] [--seed N] [--quiet]

Subcommands are ``calibrate``, ``verify``, ``solve-neumann``, ``simulate``,
``monitor`` and ``all``.  The configuration file holds ``section.key = value``
lines with ``#`` comments.  Every run writes ``resolved-config.cfg`` (all
keys, defaults filled in), ``verdicts.csv`` and a timestamped ``run.log``;
data files never contain wall-clock content.  Exit status is 0 when every
verdict passes, 1 when a verdict fails, 2 on a configuration error and 3 on
any other module error, in which case ``error.json`` describes it.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import struct
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import calibration as calmod
from . import elliptic, entropy, verifier, weakflow
from .errors import ConfigError, VPCalError
from .geometry import Balls, FourierCurve, Grid, Sphere, indicator_from_shape

FIELDS_MAGIC = b"VPCF"
FIELDS_VERSION = 1
SUBCOMMANDS = ("calibrate", "verify", "solve-neumann", "simulate", "monitor", "all")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3

log = logging.getLogger("vpcal")


# --------------------------------------------------------------------------
# configuration

# key -> (kind, default); ``None`` defaults are derived during resolution
SCHEMA = {
    "run.seed": ("int", 0),
    "output.dir": ("str", "out"),
    "grid.n": ("int", 128),
    "grid.L": ("float", 1.0),
    "grid.d": ("int", 2),
    "shape.kind": ("str", "sphere"),
    "shape.R": ("float", 0.25),
    "shape.center": ("floats", None),
    "shape.centers": ("points", []),
    "shape.radii": ("floats", []),
    "shape.a": ("floats", []),
    "shape.b": ("floats", []),
    "shape.velocity": ("str", "vpmcf"),
    "shape.T": ("float", None),
    "calibration.delta": ("float", None),
    "calibration.profile": ("str", "quintic"),
    "calibration.nodes": ("int", 256),
    "calibration.t": ("float", None),
    "flow.h_t": ("float", None),
    "flow.N": ("int", 200),
    "flow.vp": ("bool", True),
    "flow.kappa": ("float", 2.0),
    "flow.t0": ("float", 0.0),
    "flow.snapshot_stride": ("int", 0),
    "initial.kind": ("str", "shape"),
    "initial.R": ("float", None),
    "initial.center": ("floats", None),
    "initial.centers": ("points", []),
    "initial.radii": ("floats", []),
    "initial.a": ("floats", []),
    "initial.b": ("floats", []),
    "verifier.samples": ("int", 10000),
    "verifier.interface": ("int", 256),
    "verifier.bulk": ("int", 2000),
    "verifier.t": ("float", None),
    "verifier.dt": ("float", None),
    "verifier.h_fd": ("float", 1e-4),
    "verifier.C_max": ("float", 1e4),
    "verifier.tol_interface": ("float", 1e-6),
    "monitor.K_max": ("float", entropy.K_MAX),
    "monitor.transient": ("int", 10),
    "monitor.tol_EDI": ("float", weakflow.TOL_EDI),
    "neumann.nodes": ("ints", [64, 128, 256]),
    "neumann.modes": ("ints", [1, 2]),
    "neumann.R": ("float", 1.0),
    "neumann.tol": ("float", 1e-6),
    "neumann.min_order": ("float", 2.0),
}
SHAPE_KINDS = ("sphere", "balls", "fourier")
PROFILES = ("quintic",)


def _parse_value(key, kind, text):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind == "str":
            return text
        if kind == "floats":
            return [float(v) for v in text.split(",") if v.strip()]
        if kind == "ints":
            return [int(v) for v in text.split(",") if v.strip()]
        if kind == "points":
            return [[float(v) for v in p.split(",")] for p in text.split(";") if p.strip()]
    except ValueError:
        raise ConfigError(key, f"cannot read {text!r} as {kind}") from None
    raise AssertionError(kind)


def _format_value(kind, value):
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind in ("floats", "ints"):
        return ", ".join(repr(v) for v in value)
    if kind == "points":
        return "; ".join(", ".join(repr(float(c)) for c in p) for p in value)
    return str(value)


def parse_config(text):
    """Raw ``{key: value}`` from config text; unknown or repeated keys are errors."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "given twice")
        raw[key] = _parse_value(key, SCHEMA[key][0], value)
    return raw


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def grid(self):
        return Grid(self["grid.n"], self["grid.L"], self["grid.d"])

    @property
    def seed(self):
        return self["run.seed"]

    def dump(self):
        lines = ["# resolved configuration; rerunning with this file reproduces the run"]
        section = None
        for key, (kind, _) in SCHEMA.items():
            sec = key.split(".")[0]
            if sec != section:
                lines.append("")
                section = sec
            lines.append(f"{key} = {_format_value(kind, self.values[key])}")
        return "\n".join(lines) + "\n"


def _shape_from(cfg, prefix, T):
    """Build the shape described by ``prefix.*`` keys (``shape`` or ``initial``)."""
    d = cfg["grid.d"]
    kind = cfg[f"{prefix}.kind"]
    R = cfg[f"{prefix}.R"]
    center = cfg[f"{prefix}.center"]
    if kind not in SHAPE_KINDS:
        raise ConfigError(f"{prefix}.kind", f"must be one of {', '.join(SHAPE_KINDS)}")
    if len(center) != d:
        raise ConfigError(f"{prefix}.center", f"needs {d} coordinates")
    if kind in ("sphere", "fourier") and not R > 0:
        raise ConfigError(f"{prefix}.R", "radius must be positive")
    try:
        if kind == "sphere":
            return Sphere(R, center, d, T)
        if kind == "fourier":
            if d != 2:
                raise ConfigError("grid.d", "Fourier curves are planar")
            # initial data is a frozen curve; only the strong solution moves
            velocity = cfg["shape.velocity"] if prefix == "shape" else "zero"
            return FourierCurve(R, cfg[f"{prefix}.a"], cfg[f"{prefix}.b"], center, velocity, T)
        centers, radii = cfg[f"{prefix}.centers"], cfg[f"{prefix}.radii"]
        if not radii or len(centers) != len(radii):
            raise ConfigError(f"{prefix}.radii", "needs one radius per centre")
        if any(r <= 0 for r in radii):
            raise ConfigError(f"{prefix}.radii", "radii must be positive")
        if any(len(c) != d for c in centers):
            raise ConfigError(f"{prefix}.centers", f"each centre needs {d} coordinates")
        return Balls(centers, radii, d, T)
    except ValueError as exc:
        key = f"{prefix}.radii" if kind == "balls" else f"{prefix}.a"
        raise ConfigError(key, str(exc)) from None


def _check_in_box(shape, grid, key):
    """The shape must sit inside the periodic box with a margin of two cells."""
    m = 2 * grid.h
    if isinstance(shape, Balls):
        boxes = [(c, shape._rmax(i)) for i, c in enumerate(shape.centers)]
    else:
        rad = shape.R if isinstance(shape, Sphere) else shape.R_bound - np.linalg.norm(shape.center)
        boxes = [(shape.center, rad)]
    for c, r in boxes:
        if np.any(np.asarray(c) - r < m) or np.any(np.asarray(c) + r > grid.L - m):
            raise ConfigError(key, "shape does not fit inside the grid box")


def resolve_config(raw, seed=None, out=None):
    """Fill derived defaults and validate; returns a :class:`RunConfig`."""
    v = {k: (raw[k] if k in raw else default) for k, (_, default) in SCHEMA.items()}
    if seed is not None:
        v["run.seed"] = int(seed)
    if out is not None:
        v["output.dir"] = str(out)
    if not 0 <= v["run.seed"] < 2**64:
        raise ConfigError("run.seed", "must be an unsigned 64-bit integer")
    if v["grid.d"] not in (2, 3):
        raise ConfigError("grid.d", "must be 2 or 3")
    if v["grid.n"] < 8:
        raise ConfigError("grid.n", "must be at least 8")
    if not v["grid.L"] > 0:
        raise ConfigError("grid.L", "must be positive")
    h = v["grid.L"] / v["grid.n"]
    d = v["grid.d"]
    if v["shape.center"] is None:
        v["shape.center"] = [0.5 * v["grid.L"]] * d
    if v["flow.h_t"] is None:
        v["flow.h_t"] = 24.0 * h * h
    if not v["flow.h_t"] > 0:
        raise ConfigError("flow.h_t", "must be positive")
    if np.sqrt(2 * v["flow.h_t"]) < 2 * h * (1 - 1e-12):
        raise ConfigError("flow.h_t", f"kernel width sqrt(2 h_t) must be at least 2h = {2 * h:.6g}")
    if v["flow.N"] < 1:
        raise ConfigError("flow.N", "must be at least 1")
    if v["flow.kappa"] <= 0:
        raise ConfigError("flow.kappa", "must be positive")
    if v["flow.t0"] < 0:
        raise ConfigError("flow.t0", "must be non-negative")
    if v["flow.snapshot_stride"] < 0:
        raise ConfigError("flow.snapshot_stride", "must be non-negative")
    if v["shape.T"] is None:
        end = v["flow.t0"] + v["flow.N"] * v["flow.h_t"]
        # Fourier time families are linearisations; evolving balls may vanish
        v["shape.T"] = {"fourier": 0.1, "balls": float(end)}.get(v["shape.kind"], float(max(1.0, 2 * end)))
    if not v["shape.T"] > 0:
        raise ConfigError("shape.T", "must be positive")
    if v["calibration.profile"] not in PROFILES:
        raise ConfigError("calibration.profile", f"must be one of {', '.join(PROFILES)}")
    if v["calibration.nodes"] < 16:
        raise ConfigError("calibration.nodes", "must be at least 16")
    for key in ("calibration.t", "verifier.t"):
        if v[key] is None:
            v[key] = 0.5 * v["shape.T"]
        if not 0 <= v[key] <= v["shape.T"]:
            raise ConfigError(key, "must lie in [0, shape.T]")
    if v["verifier.dt"] is None:
        v["verifier.dt"] = 1e-3 * v["shape.T"]
    for key in ("verifier.dt", "verifier.h_fd", "verifier.C_max", "verifier.tol_interface",
                "monitor.K_max", "monitor.tol_EDI", "neumann.R", "neumann.tol"):
        if not v[key] > 0:
            raise ConfigError(key, "must be positive")
    for key in ("verifier.samples", "verifier.interface", "verifier.bulk"):
        if v[key] < 1:
            raise ConfigError(key, "must be at least 1")
    if v["monitor.transient"] < 0:
        raise ConfigError("monitor.transient", "must be non-negative")
    if not v["neumann.nodes"] or any(N < 16 for N in v["neumann.nodes"]):
        raise ConfigError("neumann.nodes", "node counts must be at least 16")
    if not v["neumann.modes"] or any(k < 1 for k in v["neumann.modes"]):
        raise ConfigError("neumann.modes", "modes must be positive integers")
    if v["initial.R"] is None:
        v["initial.R"] = v["shape.R"]
    if v["initial.center"] is None:
        v["initial.center"] = list(v["shape.center"])

    cfg = RunConfig(v)
    grid = cfg.grid
    shape = _shape_from(cfg, "shape", v["shape.T"])
    _check_in_box(shape, grid, "shape.center")
    if v["initial.kind"] != "shape":
        _check_in_box(_shape_from(cfg, "initial", v["shape.T"]), grid, "initial.center")
    tube = shape.tube_radius()
    if v["calibration.delta"] is None:
        v["calibration.delta"] = float(min(0.3, 0.9 * tube, 4.0 / 3.0))
    delta = v["calibration.delta"]
    if not 0 < delta <= 4.0 / 3.0:
        raise ConfigError("calibration.delta", "must lie in (0, 4/3]")
    if delta > tube * (1 + 1e-12):
        raise ConfigError("calibration.delta", f"exceeds the shape tube bound {tube:.6g}")
    return cfg


def load_config(path, seed=None, out=None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return resolve_config(parse_config(text), seed, out)


# --------------------------------------------------------------------------
# output helpers


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % v
    return str(v)


def write_csv(path, header, rows, comments=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_fields(path, grid, values, lam):
    """``VPCF`` header, per-cell ``xi | B | theta`` as little-endian f64, trailing ``lambda*``."""
    with open(path, "wb") as fh:
        fh.write(FIELDS_MAGIC + struct.pack("<HHI", FIELDS_VERSION, grid.d, grid.n))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", float(lam)))


def read_fields(path):
    """Returns ``(d, n, values of shape (n^d, 2d+1), lambda*)``."""
    raw = Path(path).read_bytes()
    if raw[:4] != FIELDS_MAGIC:
        raise ValueError(f"{path}: not a calibration field file")
    version, d, n = struct.unpack("<HHI", raw[4:12])
    if version != FIELDS_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw[12:-8], dtype="<f8").reshape(n**d, 2 * d + 1)
    return d, n, body.copy(), struct.unpack("<d", raw[-8:])[0]


# --------------------------------------------------------------------------
# stages


class Runner:
    """Runs the stages of one invocation and collects their verdicts."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.verdicts = []
        self._cal = None
        self._trace = None

    def verdict(self, name, ok):
        ok = bool(ok)
        self.verdicts.append((name, ok))
        log.info("verdict %s: %s", name, "pass" if ok else "FAIL")

    @property
    def shape(self):
        return self.calibration().shape

    def calibration(self):
        if self._cal is None:
            c = self.cfg
            shape = _shape_from(c, "shape", c["shape.T"])
            profile = calmod.CutoffProfile(c["calibration.delta"])
            self._cal = calmod.construct_calibration(shape, profile, c["calibration.nodes"])
            log.info("calibration %s, delta=%g, lambda*(%g)=%.12g", self._cal.provenance,
                     profile.delta, c["calibration.t"], self._cal.lam(c["calibration.t"]))
        return self._cal

    def calibrate(self):
        c = self.cfg
        vals, lam = calmod.export_fields(self.calibration(), c.grid, c["calibration.t"])
        ok = bool(np.all(np.isfinite(vals)) and np.isfinite(lam))
        write_fields(self.out / "calibration.fields", c.grid, vals, lam)
        self.verdict("calibrate", ok)

    def verify(self):
        c = self.cfg
        spec = verifier.SampleSpec(c["verifier.samples"], c.seed % 2**32, c["verifier.interface"],
                                   c["verifier.bulk"])
        rep = verifier.verify_calibration(self.calibration(), t=c["verifier.t"], dt=c["verifier.dt"],
                                          samples=spec, h_fd=c["verifier.h_fd"], C_max=c["verifier.C_max"],
                                          tol_interface=c["verifier.tol_interface"])
        write_csv(self.out / "residuals.csv",
                  ["condition", "order", "sup_residual", "interface_residual", "fitted_constant", "pass"],
                  rep.table())
        summary = [("lambda_star", rep.lam_star), ("f_sup", rep.f_sup),
                   ("f_sup_interface", rep.f_sup_interface), ("f_mismatch", rep.f_mismatch),
                   ("f_excluded", rep.f_excluded)]
        summary += [(f"lipschitz_{k}", v) for k, v in sorted(rep.lipschitz.items())]
        summary += [(f"theta_{k}", v) for k, v in sorted(rep.theta_alternatives.items())]
        summary += [(f"condition_{k}", int(rep.condition_passed(k))) for k in rep.items]
        write_csv(self.out / "verify_summary.csv", ["quantity", "value"], summary)
        for k in rep.items:
            log.info("condition %s: %s", k, "pass" if rep.condition_passed(k) else "FAIL")
        self.verdict("verify", rep.passed)

    def solve_neumann(self):
        c = self.cfg
        R = c["neumann.R"]
        cases = {f"cos{k}": elliptic.disk_harmonic(k, R) for k in c["neumann.modes"]}
        nodes = tuple(sorted(c["neumann.nodes"]))
        rows = elliptic.manufactured_convergence(cases, nodes, R)
        write_csv(self.out / "neumann_convergence.csv",
                  ["case", "nodes", "max_error", "grad_error", "order", "saturated"],
                  [(r.case, r.nodes, r.max_error, r.grad_error, r.order, r.saturated) for r in rows])
        ok = True
        for r in rows:
            if r.nodes == nodes[-1] and r.max_error > c["neumann.tol"]:
                ok = False
            if r.nodes != nodes[0] and not (r.saturated or r.order >= c["neumann.min_order"]):
                ok = False
        self.verdict("solve-neumann", ok)

    def trace(self):
        if self._trace is None:
            c = self.cfg
            g = c.grid
            prefix = "shape" if c["initial.kind"] == "shape" else "initial"
            init = _shape_from(c, prefix, c["shape.T"])
            chi0 = indicator_from_shape(g, init, c["flow.t0"])
            stride = c["flow.snapshot_stride"]

            def snap(n, chi):
                if stride and n % stride == 0:
                    weakflow.write_snapshot(self.out / f"snapshot_{n:06d}.vpmf", chi, n)

            if stride:
                snap(0, chi0)
            self._trace = weakflow.run_flow(chi0, c["flow.h_t"], c["flow.N"], c["flow.vp"],
                                            c["flow.kappa"], seed=c.seed, callback=snap)
            log.info("flow: %d steps, final count %d", self._trace.steps, self._trace.counts[-1])
        return self._trace

    def simulate(self):
        c = self.cfg
        tr = self.trace()
        n = tr.steps + 1
        lam = list(tr.lambdas) + [np.nan]
        Crun = [0.0] + list(tr.C_lambda_running())
        levels = list(tr.levels) + [np.nan]
        rows = [(i, c["flow.t0"] + i * tr.h_t, tr.volumes[i], tr.counts[i], tr.energies[i],
                 levels[i], lam[i], Crun[i]) for i in range(n)]
        g = tr.grid
        meta = [f"grid.n={g.n}", f"grid.L={g.L!r}", f"grid.d={g.d}", f"h_t={tr.h_t!r}",
                f"N={tr.steps}", f"seed={tr.seed}", f"vp={'true' if tr.vp else 'false'}"]
        write_csv(self.out / "trace.csv",
                  ["n", "t", "volume", "count", "energy", "level", "lambda", "C_lambda_sq_running"],
                  rows, comments=meta)
        rep = weakflow.check_weak_solution(tr, c["monitor.tol_EDI"])
        write_csv(self.out / "weak_solution.csv", ["quantity", "value"], [
            ("edi_lhs", rep.edi_lhs), ("edi_rhs", rep.edi_rhs), ("edi_pass", rep.edi_pass),
            ("volume_drift", rep.volume_drift), ("volume_pass", rep.volume_pass),
            ("C_lambda_sq", rep.C_lambda_sq), ("lambda_pass", rep.lambda_pass),
            ("energy_monotone", rep.energy_monotone), ("velocity_weak_pass", rep.velocity_weak_pass)])
        self.verdict("simulate", rep.passed)

    def monitor(self):
        c = self.cfg
        tr = self.trace()
        end = c["flow.t0"] + tr.steps * tr.h_t
        if end > c["shape.T"] + 1e-12:
            raise ConfigError("shape.T", f"horizon {c['shape.T']} ends before the flow (t={end:.6g})")
        rep = entropy.monitor(tr, self.calibration(), self.shape, c["flow.t0"], c["monitor.K_max"],
                              c["flow.kappa"], transient=c["monitor.transient"])
        write_csv(self.out / "entropy.csv",
                  ["t", "E", "F", "EplusF", "D", "Dtilde", "lambda", "envelope_bound", "pass"], rep.rows())
        ok = rep.passed
        checks = dict(rep.verdicts)
        if rep.envelope.mode == "relative":
            checks["nonincreasing"] = entropy.nonincreasing_after(rep.EF, c["monitor.transient"])
            ok = ok and checks["nonincreasing"]
        summary = [(f"constant_{k}", v) for k, v in sorted(rep.constants.items())]
        summary += [("envelope_mode", rep.envelope.mode), ("eps_grid", rep.eps_grid)]
        summary += [(f"verdict_{k}", int(v)) for k, v in sorted(checks.items())]
        write_csv(self.out / "entropy_summary.csv", ["quantity", "value"], summary)
        self.verdict("monitor", ok)


STAGES = {
    "calibrate": ("calibrate",),
    "verify": ("verify",),
    "solve-neumann": ("solve_neumann",),
    "simulate": ("simulate",),
    "monitor": ("monitor",),
    "all": ("calibrate", "verify", "solve_neumann", "simulate", "monitor"),
}


# --------------------------------------------------------------------------
# entry point


def _setup_logging(out, quiet):
    log.handlers.clear()
    log.setLevel(logging.INFO)
    log.propagate = False
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(message)s")
    if out is not None:
        fh = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
        fh.setFormatter(fmt)
        log.addHandler(fh)
    if not quiet:
        sh = logging.StreamHandler(sys.stderr)
        sh.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(sh)


def _error_record(out, sub, exc):
    rec = {"subcommand": sub, "error": getattr(exc, "code", type(exc).__name__),
           "key": getattr(exc, "key", None), "message": str(exc)}
    if out is not None:
        (out / "error.json").write_text(json.dumps(rec, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def run(subcommand, config_path, out=None, seed=None, quiet=False):
    """Run one subcommand; returns the exit status."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out_dir = None
    try:
        cfg = load_config(config_path, seed, out)
    except ConfigError as exc:
        if out is not None:
            out_dir = Path(out)
            out_dir.mkdir(parents=True, exist_ok=True)
        _error_record(out_dir, subcommand, exc)
        return EXIT_CONFIG
    out_dir = Path(cfg["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _setup_logging(out_dir, quiet)
    (out_dir / "resolved-config.cfg").write_text(cfg.dump(), encoding="utf-8")
    log.info("vpcal %s, config %s, seed %d", subcommand, config_path, cfg.seed)
    runner = Runner(cfg, out_dir)
    t0 = time.perf_counter()
    try:
        for stage in STAGES[subcommand]:
            getattr(runner, stage)()
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        _error_record(out_dir, subcommand, exc)
        return EXIT_CONFIG
    except (VPCalError, ValueError, TypeError, ArithmeticError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        _error_record(out_dir, subcommand, exc)
        return EXIT_ERROR
    finally:
        write_csv(out_dir / "verdicts.csv", ["check", "pass"], runner.verdicts)
        log.info("elapsed %.1f s", time.perf_counter() - t0)
    ok = all(v for _, v in runner.verdicts)
    log.info("overall: %s", "pass" if ok else "FAIL")
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None):
    ap = argparse.ArgumentParser(prog="vpcal", description=__doc__.split("\n\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="seed (overrides run.seed)")
    ap.add_argument("--quiet", action="store_true", help="log to the output directory only")
    args = ap.parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())

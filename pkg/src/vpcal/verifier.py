"""Sampled certification of a calibration against the six defining conditions.

Residuals are evaluated on a stratified low-discrepancy sample of the tube
``{|s| < delta}``, on equally spaced interface points and on a coarse bulk
sample.  Each residual that is claimed to be ``O(dist^k)`` is divided by
``max(dist, eps_floor)^k`` and the supremum is reported as the fitted
constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .calibration import transport_coefficient
from .errors import DegenerateXi, SampleOutsideDomain

BANDS = (0.0, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0)
ROW_ORDER = {
    "i": 0, "ii": 1, "iii_ext": 0, "iii_short": 0, "iv_weight": 1, "iv_length": 2,
    "iv_xi": 1, "v": 1, "vi_sign": 0, "vi_coercive": 0,
}


@dataclass
class SampleSpec:
    count: int = 10_000
    seed: int = 0
    interface: int = 256
    bulk: int = 2000
    bands: tuple = BANDS


@dataclass
class ConditionRow:
    condition: str
    order: int
    sup_residual: float
    interface_residual: float
    fitted_constant: float
    passed: bool

    @property
    def item(self):
        return self.condition.split("_")[0]


@dataclass
class ResidualReport:
    rows: list
    lam_star: float
    f_sup: float
    f_sup_interface: float
    f_direct_sup_interface: float
    f_mismatch: float
    f_excluded: int
    lipschitz: dict
    theta_alternatives: dict
    meta: dict
    samples: dict = field(repr=False, default_factory=dict)

    def row(self, name) -> ConditionRow:
        for r in self.rows:
            if r.condition == name:
                return r
        raise KeyError(name)

    def condition_passed(self, item: str) -> bool:
        rows = [r for r in self.rows if r.item == item]
        return bool(rows) and all(r.passed for r in rows)

    @property
    def items(self):
        return ("i", "ii", "iii", "iv", "v", "vi")

    @property
    def passed(self) -> bool:
        return all(self.condition_passed(k) for k in self.items)

    @property
    def interface_residual(self) -> float:
        return max(r.interface_residual for r in self.rows if r.condition != "i")

    def table(self):
        """Rows ``(condition, order, sup_residual, interface_residual, fitted_constant, pass)``."""
        return [(r.condition, r.order, r.sup_residual, r.interface_residual,
                 r.fitted_constant, int(r.passed)) for r in self.rows]


# --------------------------------------------------------------------------
# sampling


def _sobol(dim, n, seed):
    m = max(int(np.ceil(np.log2(max(n, 2)))), 1)
    return qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:n]


def sample_points(shape, delta, t, spec: SampleSpec):
    """Tube, interface and bulk samples; returns points and a kind label per point."""
    d = shape.d
    nstrata = 2 * (len(spec.bands) - 1)
    per = max(spec.count // nstrata, 1)
    u = _sobol(d, per * nstrata, spec.seed)
    k = np.arange(u.shape[0]) % nstrata
    band = k // 2
    sgn = np.where(k % 2 == 0, -1.0, 1.0)
    lo = np.asarray(spec.bands)[band]
    hi = np.asarray(spec.bands)[band + 1]
    s = sgn * delta * (lo + (hi - lo) * u[:, -1])
    p, n = shape.boundary_map(u[:, :d - 1], t)
    tube = p + s[:, None] * n

    if d == 2:
        ui = ((np.arange(spec.interface) + 0.5) / spec.interface)[:, None]
    else:
        ui = _sobol(d - 1, spec.interface, spec.seed + 2)
    iface = shape.boundary_map(ui, t)[0]

    rb = shape.R_bound + delta
    bulk = -rb + 2 * rb * _sobol(d, spec.bulk, spec.seed + 1) if spec.bulk else np.zeros((0, d))
    x = np.concatenate([tube, iface, bulk])
    kind = np.concatenate([np.zeros(len(tube), int), np.ones(len(iface), int),
                           np.full(len(bulk), 2)])
    return x, kind


# --------------------------------------------------------------------------
# derivatives


def _fd_jacobian(fn, x, h):
    """Fourth-order central differences; ``fn`` maps ``(m, d)`` to ``(m, ...)``."""
    cols = []
    for k in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[k] = h
        cols.append((-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h))
    return np.stack(cols, axis=-1)


def _time_derivative(cal, x, t, dt):
    """Central differences of ``xi``, ``theta`` and ``|xi|^2`` with a Richardson step."""
    def fields(tt):
        ev = cal.evaluate(x, tt, need_B=False)
        xi = ev["xi"]
        return xi, ev["theta"], np.sum(xi * xi, axis=-1)

    def central(step):
        plus, minus = fields(t + step), fields(t - step)
        return [(a - b) / (2 * step) for a, b in zip(plus, minus)]

    coarse = central(dt)
    fine = central(0.5 * dt)
    rich = [(4 * f - c) / 3 for f, c in zip(fine, coarse)]
    gap = max(float(np.max(np.abs(f - c))) if f.size else 0.0 for f, c in zip(fine, coarse))
    return rich, gap


def _lipschitz(x, values, k=1):
    """Largest difference quotient over nearest-neighbour sample pairs."""
    if len(x) < 2:
        return 0.0
    tree = cKDTree(x)
    dist, idx = tree.query(x, k=k + 1)
    dist, idx = dist[:, 1:], idx[:, 1:]
    v = values.reshape(len(x), -1)
    diff = np.linalg.norm(v[:, None, :] - v[idx], axis=-1)
    ok = dist > 0
    return float(np.max(diff[ok] / dist[ok])) if np.any(ok) else 0.0


# --------------------------------------------------------------------------


def verify_calibration(cal, shape=None, t=None, dt=None, samples: SampleSpec | None = None,
                       h_fd=1e-4, C_max=1e4, tol_interface=1e-6, fd_space=False, points=None):
    """Residual analysis of ``cal`` at time ``t``.

    ``points`` optionally replaces the generated sample set (all points are
    then treated as tube samples).  ``fd_space`` switches spatial derivatives
    from the analytic evaluators to fourth-order differences with step
    ``h_fd``.
    """
    shape = cal.shape if shape is None else shape
    spec = SampleSpec() if samples is None else samples
    T = shape.T
    t = 0.5 * T if t is None else float(t)
    dt = 1e-3 * T if dt is None else float(dt)
    if t - dt < -1e-12 or t + dt > T + 1e-12:
        raise ValueError(f"time window [{t - dt}, {t + dt}] leaves [0, {T}]")
    delta = cal.profile.delta
    eps_floor = 2 * h_fd

    if points is None:
        x, kind = sample_points(shape, delta, t, spec)
    else:
        x = np.atleast_2d(np.asarray(points, float))
        if x.shape[-1] != shape.d or not np.all(np.isfinite(x)):
            raise SampleOutsideDomain("explicit samples must be finite points of the right dimension")
        kind = np.zeros(len(x), int)

    ev = cal.evaluate(x, t)
    s = ev["s"]
    dist = np.abs(s)
    if points is not None and np.any(dist >= delta):
        raise SampleOutsideDomain(f"{int(np.sum(dist >= delta))} explicit sample(s) outside the tube")
    iface = kind == 1
    xi, B, dB = ev["xi"], ev["B"], ev["grad_B"]
    grad_xi, grad_th, theta = ev["grad_xi"], ev["grad_theta"], ev["theta"]
    div_xi = ev["div_xi"]
    if fd_space:
        grad_xi = _fd_jacobian(lambda y: cal.evaluate(y, t, need_B=False)["xi"], x, h_fd)
        grad_th = _fd_jacobian(lambda y: cal.evaluate(y, t, need_B=False)["theta"], x, h_fd)
        dB = _fd_jacobian(lambda y: cal.evaluate(y, t)["B"], x, h_fd)
        div_xi = np.trace(grad_xi, axis1=-2, axis2=-1)
    (dxi_dt, dth_dt, dxi2_dt), rich_gap = _time_derivative(cal, x, t, dt)
    lam = float(cal.lam(t))

    res = {}
    res["ii"] = np.trace(dB, axis1=-2, axis2=-1)
    normal = shape.frame(x, t)[2]
    res["iii_ext"] = np.where(iface, np.linalg.norm(xi - normal, axis=-1), 0.0)
    c_short = cal.constants.get("c_zeta", cal.profile.c_zeta)
    absxi = np.linalg.norm(xi, axis=-1)
    res["iii_short"] = np.maximum(absxi - np.maximum(1 - c_short * dist**2, 0.0), 0.0)
    res["iv_weight"] = dth_dt + np.sum(B * grad_th, axis=-1)
    grad_xi2 = 2 * np.einsum("...ik,...i->...k", grad_xi, xi)
    res["iv_length"] = dxi2_dt + np.sum(B * grad_xi2, axis=-1)
    full = dxi_dt + np.einsum("...ik,...k->...i", grad_xi, B) + np.einsum("...ik,...i->...k", dB, xi)
    ok = absxi >= 0.5
    if not np.any(ok):
        raise DegenerateXi("no sample with |xi| >= 1/2 for extracting the transport coefficient")
    f = np.where(ok, np.sum(full * xi, axis=-1) / np.where(ok, absxi**2, 1.0), 0.0)
    res["iv_xi"] = np.linalg.norm(full - f[:, None] * xi, axis=-1)
    res["v"] = np.sum(B * xi, axis=-1) + div_xi - lam
    off = dist > 1e-12
    res["vi_sign"] = np.where(off & (np.sign(theta) != np.sign(s)), np.maximum(dist, np.abs(theta)), 0.0)
    c_theta = cal.constants.get("c_theta", cal.profile.c_theta)
    res["vi_coercive"] = np.maximum(np.minimum(dist, c_theta) - np.abs(theta), 0.0)

    tube_pts = dist < delta
    lip_B = _lipschitz(x[tube_pts], dB[tube_pts])
    lip_xi = _lipschitz(x, grad_xi)
    lip_theta = _lipschitz(x, theta)

    rows = [ConditionRow("i", 0, lip_B, 0.0, max(lip_B, lip_xi, lip_theta),
                         bool(np.isfinite(lip_B) and max(lip_B, lip_xi, lip_theta) <= C_max))]
    for name, order in ROW_ORDER.items():
        if name == "i":
            continue
        r = np.abs(res[name])
        sup = float(np.max(r))
        ir = float(np.max(r[iface])) if np.any(iface) else 0.0
        if order == 0:
            fitted = sup
            passed = bool(np.isfinite(sup) and sup <= tol_interface)
        else:
            fitted = float(np.max(r / np.maximum(dist, eps_floor) ** order))
            passed = bool(np.isfinite(fitted) and fitted <= C_max and ir <= tol_interface)
        rows.append(ConditionRow(name, order, sup, ir, fitted, passed))

    f_dir = transport_coefficient(cal, x[iface], t) if np.any(iface) else np.zeros(0)
    f_if = f[iface]
    theta_alt = {}
    for label, val in (("tau_s_times_s", cal.profile.tau(s) * s), ("zeta_s_times_s", cal.profile.zeta(s) * s)):
        sign_ok = not np.any(off & (np.sign(val) != np.sign(s)))
        coerc_ok = bool(np.max(np.minimum(dist, c_theta) - np.abs(val)) <= tol_interface)
        theta_alt[label] = bool(sign_ok and coerc_ok)

    meta = {"count": int(len(x)), "tube": int(np.sum(kind == 0)), "interface": int(np.sum(iface)),
            "bulk": int(np.sum(kind == 2)), "seed": int(spec.seed), "t": t, "dt": dt,
            "richardson_gap": rich_gap, "h_fd": h_fd, "eps_floor": eps_floor, "C_max": C_max,
            "tol_interface": tol_interface, "fd_space": bool(fd_space)}
    return ResidualReport(
        rows=rows, lam_star=lam,
        f_sup=float(np.max(np.abs(f[ok]))),
        f_sup_interface=float(np.max(np.abs(f_if))) if f_if.size else 0.0,
        f_direct_sup_interface=float(np.max(np.abs(f_dir))) if f_dir.size else 0.0,
        f_mismatch=float(np.max(np.abs(f_if - f_dir))) if f_if.size else 0.0,
        f_excluded=int(np.sum(~ok)),
        lipschitz={"grad_B": lip_B, "grad_xi": lip_xi, "theta": lip_theta},
        theta_alternatives=theta_alt, meta=meta,
        samples={"x": x, "s": s, "kind": kind, "residuals": res, "f": f},
    )


def band_scaling(report: ResidualReport, name: str, bands):
    """Sup of ``|residual|`` over tube samples with ``dist <= b`` for each ``b``, and successive ratios."""
    smp = report.samples
    dist = np.abs(smp["s"])
    r = np.abs(smp["residuals"][name])
    tube = smp["kind"] == 0
    sups = np.array([np.max(r[tube & (dist <= b)]) for b in bands])
    return sups, sups[:-1] / sups[1:]

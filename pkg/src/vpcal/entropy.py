"""Relative entropy, volume error, dissipation functionals and the Gronwall monitor.

For a grid indicator ``chi`` and a calibration ``(xi, B, theta, lambda*)`` of
a strong solution,

    E = Per(chi) - sum chi div(xi) h^d        (bulk form)
      = sum (1 - nu . xi) w                  (surface form)
    F = sum (chi - chi*) theta h^d

where ``chi*`` is the grid indicator of the strong solution and ``(nu, w)``
come from :func:`discrete_interface`; surface integrands are evaluated at
the sample feet on the 1/2-level of the mollified indicator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroInitialEntropy
from .geometry import IndicatorField, discrete_interface, indicator_from_shape

FORM_TOL = 0.05
K_MAX = 100.0
C_COERC_MAX = 1e4


def eps_grid(grid, shape, t=0.0):
    """Grid-scale floor ``4 h Per``."""
    return 4 * grid.h * shape.perimeter(t)


class GridFields:
    """Calibration fields at the cell centres of one grid, cached per time."""

    def __init__(self, cal, grid, chunk=16384):
        self.cal, self.grid, self.chunk = cal, grid, chunk
        self._cache = {}

    def __call__(self, t):
        key = float(t)
        if key not in self._cache:
            pts = self.grid.points().reshape(-1, self.grid.d)
            parts = {"div_xi": [], "theta": [], "s": []}
            for lo in range(0, len(pts), self.chunk):
                ev = self.cal.evaluate(pts[lo:lo + self.chunk], key, need_B=False)
                for k in parts:
                    parts[k].append(ev[k])
            self._cache[key] = {k: np.concatenate(v).reshape(self.grid.shape) for k, v in parts.items()}
        return self._cache[key]


def _fields(cal, grid, t, fields):
    return (fields or GridFields(cal, grid))(t)


def relative_entropy_forms(chi: IndicatorField, cal, t=0.0, kappa=2.0, fields=None, iface=None):
    """``(bulk, surface)`` forms of the relative entropy."""
    g = chi.grid
    iface = discrete_interface(chi, kappa) if iface is None else iface
    div = _fields(cal, g, t, fields)["div_xi"]
    bulk = iface.perimeter - float(np.sum(chi.values * div)) * g.cell_volume
    xi = cal.evaluate(iface.foot, t, need_B=False)["xi"]
    surf = float(np.sum((1 - np.sum(iface.normal * xi, axis=-1)) * iface.weight))
    return bulk, surf


def relative_entropy(chi: IndicatorField, cal, t=0.0, kappa=2.0, fields=None, form="bulk"):
    bulk, surf = relative_entropy_forms(chi, cal, t, kappa, fields)
    return bulk if form == "bulk" else surf


def volume_error_forms(chi: IndicatorField, shape, cal, t=0.0, fields=None):
    """Signed and absolute forms of the volume error, plus the largest cell-wise gap."""
    g = chi.grid
    fl = _fields(cal, g, t, fields)
    star = (fl["s"] < 0).astype(float)
    diff = chi.values - star
    th = fl["theta"]
    signed = diff * th
    absolute = np.abs(diff) * np.abs(th)
    gap = float(np.max(np.abs(signed - absolute)))
    return float(np.sum(signed)) * g.cell_volume, float(np.sum(absolute)) * g.cell_volume, gap


def volume_error(chi: IndicatorField, shape, cal, t=0.0, fields=None):
    return volume_error_forms(chi, shape, cal, t, fields)[0]


def _time_derivative(fn, t, dt, T):
    if t - dt >= 0 and t + dt <= T:
        return (fn(t + dt) - fn(t - dt)) / (2 * dt)
    if t + dt <= T:
        return (fn(t + dt) - fn(t)) / dt
    return (fn(t) - fn(t - dt)) / dt


def dissipation_functionals(vel, chi: IndicatorField, cal, shape, t=0.0, dt=None, fields=None):
    """``(D, D~)`` for one step from the velocity samples on the interface of ``chi``."""
    dt = 1e-3 * shape.T if dt is None else dt
    iface = vel.interface
    x, nu, w, V = iface.foot, iface.normal, iface.weight, vel.V
    ev = cal.evaluate(x, t, need_B=False)
    lam = cal.lam(t)
    dxi = _time_derivative(lambda tt: cal.evaluate(x, tt, need_B=False)["xi"], t, dt, shape.T)
    D = float(np.sum((-V * V - V * (ev["div_xi"] - lam) - np.sum(dxi * nu, axis=-1)) * w))
    g = chi.grid
    fl = _fields(cal, g, t, fields)
    star = (fl["s"] < 0).astype(float)
    dth = _time_derivative(lambda tt: _fields(cal, g, tt, fields)["theta"], t, dt, shape.T)
    Dt = float(np.sum(dth * (chi.values - star))) * g.cell_volume + float(np.sum(ev["theta"] * V * w))
    return D, Dt


# --------------------------------------------------------------------------
# coercivity


def coercivity_identity(nu, xi):
    """``2(1 - xi.nu) - |nu - xi|^2 - (1 + |xi|)(1 - |xi|)``, zero for unit ``nu``."""
    nu = np.asarray(nu, float)
    xi = np.asarray(xi, float)
    a = np.linalg.norm(xi, axis=-1)
    return 2 * (1 - np.sum(xi * nu, axis=-1)) - np.sum((nu - xi) ** 2, axis=-1) - (1 + a) * (1 - a)


@dataclass
class CoercivityReport:
    identity_residual: float
    tilt: float
    dist2: float
    E: float
    C_coerc: float
    identity_pass: bool
    tilt_pass: bool
    dist2_pass: bool

    @property
    def passed(self):
        return self.identity_pass and self.tilt_pass and self.dist2_pass


def coercivity_check(chi: IndicatorField, cal, t=0.0, kappa=2.0, C_max=C_COERC_MAX, tol=1e-12):
    """Pointwise identity and the tilt and distance bounds on the interface samples.

    The bounds are tested against the surface form of ``E``, for which they
    hold term by term.
    """
    iface = discrete_interface(chi, kappa)
    ev = cal.evaluate(iface.foot, t, need_B=False)
    nu, xi, w = iface.normal, ev["xi"], iface.weight
    ident = float(np.max(np.abs(coercivity_identity(nu, xi))))
    E = float(np.sum((1 - np.sum(nu * xi, axis=-1)) * w))
    tilt = float(np.sum(0.5 * np.sum((nu - xi) ** 2, axis=-1) * w))
    d2 = float(np.sum(ev["theta"] ** 2 * w))
    C = d2 / E if E > 0 else (0.0 if d2 == 0 else np.inf)
    return CoercivityReport(ident, tilt, d2, E, C, ident <= tol,
                            tilt <= E * (1 + 1e-12) + 1e-15, bool(np.isfinite(C) and C <= C_max))


# --------------------------------------------------------------------------
# Gronwall envelope


@dataclass
class Envelope:
    K: float
    K_prime: float
    bound: np.ndarray
    mode: str
    passed: bool
    within_cap: bool


def gronwall_envelope(times, EF, lambdas, h_t, K_max=K_MAX, slack=0.0):
    """Smallest growth constants for the continuous and discrete Gronwall bounds.

    ``K`` is the least value with ``EF_n <= exp(K sqrt(t_n)(1 + C_lambda(t_n))) EF_0``;
    ``K'`` the least with ``EF_{n+1} <= exp(K' h_t (1 + |lambda_n|)) EF_n + slack``.
    """
    t = np.asarray(times, float)
    EF = np.asarray(EF, float)
    lam = np.zeros(len(t) - 1) if lambdas is None or len(lambdas) == 0 else np.asarray(lambdas, float)
    if len(EF) < 2:
        raise ValueError("envelope needs at least two samples")
    if not EF[0] > 0:
        raise ZeroInitialEntropy("E+F vanishes at the initial time")
    Cl = np.sqrt(h_t * np.concatenate([[0.0], np.cumsum(lam[:len(t) - 1] ** 2)]))
    expo = np.sqrt(t[1:]) * (1 + Cl[1:])
    with np.errstate(divide="ignore"):
        logr = np.log(np.maximum(EF[1:], 0) / EF[0])
    K = float(max(0.0, np.max(np.where(expo > 0, logr / np.where(expo > 0, expo, 1), 0.0))))
    num = EF[1:] - slack
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(num > EF[:-1], np.log(num / EF[:-1]), 0.0)
    step = np.where(EF[:-1] > 0, step, np.where(num > 0, np.inf, 0.0))
    Kp = float(np.max(step / (h_t * (1 + np.abs(lam[:len(step)])))))
    bound = EF[0] * np.exp(K * np.sqrt(t) * (1 + Cl))
    ok = bool(np.isfinite(K) and np.isfinite(Kp))
    return Envelope(K, Kp, bound, "relative", ok, ok and K <= K_max and Kp <= K_max)


def absolute_envelope(EF, floor):
    """Fallback when ``E+F`` starts at zero: require ``E+F <= floor`` throughout."""
    EF = np.asarray(EF, float)
    ok = bool(np.all(EF <= floor))
    return Envelope(0.0, 0.0, np.full(EF.shape, float(floor)), "absolute", ok, ok)


def nonincreasing_after(EF, transient=10, tol=0.0):
    """True if ``EF`` never grows by more than ``tol`` after index ``transient``."""
    d = np.diff(np.asarray(EF, float)[transient:])
    return bool(np.all(d <= tol))


# --------------------------------------------------------------------------
# monitoring a trace


@dataclass
class EntropyReport:
    times: np.ndarray
    E: np.ndarray
    E_surface: np.ndarray
    F: np.ndarray
    D: np.ndarray
    Dtilde: np.ndarray
    lambdas: np.ndarray
    dissipation: np.ndarray
    envelope: Envelope
    eps_grid: float
    constants: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    @property
    def EF(self):
        return self.E + self.F

    @property
    def passed(self):
        return all(self.verdicts.values())

    def rows(self):
        """``(t, E, F, EplusF, D, Dtilde, lambda, envelope_bound, pass)`` per time."""
        n = len(self.times)
        D = np.concatenate([self.D, [np.nan] * (n - len(self.D))])
        Dt = np.concatenate([self.Dtilde, [np.nan] * (n - len(self.Dtilde))])
        lam = np.concatenate([self.lambdas, [np.nan] * (n - len(self.lambdas))])
        ok = self.EF <= self.envelope.bound * (1 + 1e-12) + (self.eps_grid if self.envelope.mode == "absolute" else 0)
        return [(self.times[i], self.E[i], self.F[i], self.EF[i], D[i], Dt[i], lam[i],
                 self.envelope.bound[i], int(ok[i])) for i in range(n)]


def monitor(trace, cal, shape, t0=0.0, K_max=K_MAX, kappa=2.0, dt=None, transient=10):
    """Entropy time series along a thresholding trace against a calibrated strong solution."""
    g = trace.grid
    fields = GridFields(cal, g)
    n = len(trace.fields)
    times = t0 + trace.h_t * np.arange(n)
    if times[-1] > shape.T + 1e-12:
        raise ValueError(f"trace ends at t={times[-1]:.4g} beyond the horizon {shape.T}")
    E, Es, F = np.zeros(n), np.zeros(n), np.zeros(n)
    form_gap = 0.0
    sign_gap = 0.0
    floor = eps_grid(g, shape, t0)
    for i in range(n):
        chi = trace.indicator(i)
        b, s = relative_entropy_forms(chi, cal, times[i], kappa, fields)
        E[i], Es[i] = b, s
        fs, fa, gap = volume_error_forms(chi, shape, cal, times[i], fields)
        F[i] = fs
        sign_gap = max(sign_gap, gap)
        form_gap = max(form_gap, abs(b - s) / max(abs(b), floor))
    D, Dt, diss = [], [], []
    for i, vel in enumerate(trace.velocities):
        d, dtl = dissipation_functionals(vel, trace.indicator(i), cal, shape, times[i], dt, fields)
        D.append(d)
        Dt.append(dtl)
        diss.append(vel.dissipation())
    D, Dt, diss = np.asarray(D), np.asarray(Dt), np.asarray(diss)
    lam = np.asarray(trace.lambdas, float)
    EF = E + F
    try:
        env = gronwall_envelope(times, EF, lam, trace.h_t, K_max)
    except ZeroInitialEntropy:
        env = absolute_envelope(EF, floor)
    denom = np.maximum(EF[:len(D)], floor)
    C_D = float(np.max(np.maximum(D, 0) / ((1 + np.abs(lam[:len(D)])) * denom))) if len(D) else 0.0
    C_Dt = float(np.max(np.maximum(Dt - 0.5 * diss, 0) / denom)) if len(Dt) else 0.0
    constants = {"C_D": C_D, "C_Dtilde": C_Dt, "form_gap": form_gap, "sign_gap": sign_gap,
                 "K": env.K, "K_prime": env.K_prime}
    verdicts = {
        "envelope": env.passed and env.within_cap,
        "nonnegative": bool(np.all(E >= -floor) and np.all(F >= -floor)),
        "forms": form_gap <= FORM_TOL,
        "D_bound": bool(np.isfinite(C_D)),
        "Dtilde_bound": bool(np.isfinite(C_Dt)),
    }
    return EntropyReport(times, E, Es, F, D, Dt, lam, diss, env, floor, constants, verdicts)

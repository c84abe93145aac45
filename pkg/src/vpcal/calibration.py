"""Gradient-flow calibrations ``(xi, B, theta, lambda*)`` for volume-preserving flows.

``xi = zeta(s) grad s`` extends the outward normal, ``theta = tau(s)`` is a
truncated signed distance, ``B`` is the gradient of the zero-mean harmonic
potential with Neumann datum ``V*`` (continued outside the domain by a
first-order normal Taylor expansion), and ``lambda*`` is the boundary mean of
``div xi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import NeumannProblem, compatibility_project, discretisation, solve_neumann
from .errors import IncompatibleData, TubeTooWide
from .geometry import Balls, FourierCurve, Sphere, StrongSolution


def _smoothstep5(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10 - 15 * u + 6 * u * u)


def _dsmoothstep5(u):
    inside = (u > 0) & (u < 1)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30 * u * u * (1 - u) ** 2, 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """Cutoff ``zeta``, truncation ``tau`` and extension cutoff ``eta`` on scale ``delta``.

    ``zeta(z) = (1 - (z/delta)^2)^3`` on ``|z| < delta``.  ``tau`` is the
    identity on ``|z| <= delta/2``, ``sign(z)`` beyond ``delta``, and an odd
    quintic Hermite blend in between (C^2, non-decreasing for
    ``delta <= 4/3``).
    """

    delta: float

    def __post_init__(self):
        if not 0 < self.delta <= 4.0 / 3.0:
            raise ValueError(f"profile width must lie in (0, 4/3], got {self.delta}")

    @property
    def c_zeta(self):
        """``zeta(z) <= 1 - c_zeta z^2`` on the support."""
        return 1.0 / self.delta**2

    @property
    def c_theta(self):
        """``min(|z|, c_theta) <= |tau(z)|``."""
        return 0.5 * self.delta

    def zeta(self, z):
        u2 = (np.asarray(z, float) / self.delta) ** 2
        return np.where(u2 < 1, (1 - u2) ** 3, 0.0)

    def dzeta(self, z):
        z = np.asarray(z, float)
        u2 = (z / self.delta) ** 2
        return np.where(u2 < 1, -6 * z / self.delta**2 * (1 - u2) ** 2, 0.0)

    def tau(self, z):
        z = np.asarray(z, float)
        a = np.abs(z)
        w = 0.5 * self.delta
        u = np.clip((a - w) / w, 0.0, 1.0)
        blend = w + (1 - w) * _smoothstep5(u) + w * (u - 6 * u**3 + 8 * u**4 - 3 * u**5)
        out = np.where(a <= w, a, np.where(a >= self.delta, 1.0, blend))
        return np.sign(z) * out

    def dtau(self, z):
        a = np.abs(np.asarray(z, float))
        w = 0.5 * self.delta
        u = np.clip((a - w) / w, 0.0, 1.0)
        d = (1 - w) * _dsmoothstep5(u) / w + (1 - u) ** 2 * (1 + 2 * u - 15 * u * u)
        return np.where(a <= w, 1.0, np.where(a >= self.delta, 0.0, d))

    def eta(self, z):
        """Exterior cutoff: 1 on ``[0, delta/2]``, 0 beyond ``delta``."""
        w = 0.5 * self.delta
        return 1.0 - _smoothstep5((np.asarray(z, float) - w) / w)

    def deta(self, z):
        w = 0.5 * self.delta
        return -_dsmoothstep5((np.asarray(z, float) - w) / w) / w


# --------------------------------------------------------------------------
# velocity extensions


class ZeroField:
    """``B = 0``; used for static balls."""

    diagnostics = {"method": "zero"}

    def evaluate(self, x, frame, profile):
        shp = np.shape(x)
        return np.zeros(shp), np.zeros(shp + (shp[-1],))


class HarmonicExtension:
    """``B = grad phi`` inside, normal Taylor continuation of ``grad phi`` outside."""

    def __init__(self, potential, datum_mean=0.0):
        self.pot = potential
        self.diagnostics = dict(potential.diagnostics, datum_mean=float(datum_mean))

    def evaluate(self, x, frame, profile):
        """Values ``B`` and gradients ``dB[..., i, k] = d_k B_i``."""
        s, p, n, hess = frame
        d = x.shape[-1]
        B = np.zeros(x.shape)
        dB = np.zeros(x.shape + (d,))
        inn = s < 0
        if np.any(inn):
            B[inn] = self.pot.grad(x[inn])
            dB[inn] = self.pot.hess(x[inn])
        out = (s >= 0) & (s < profile.delta)
        if np.any(out):
            so, po, no, ho = s[out], p[out], n[out], hess[out]
            g = self.pot.grad(po, on_boundary=True)
            Hp = self.pot.hess(po, on_boundary=True)
            T3 = self.pot.third(po, on_boundary=True)
            eye = np.eye(d)
            dP = eye - no[:, :, None] * no[:, None, :] - so[:, None, None] * ho
            Hn = np.einsum("mij,mj->mi", Hp, no)
            b = g + so[:, None] * Hn
            # d_k b_i = H_ij dP_jk + n_k (H n)_i + s (T_ijl dP_lk n_j + H_ij hess_jk)
            db = (np.einsum("mij,mjk->mik", Hp, dP)
                  + Hn[:, :, None] * no[:, None, :]
                  + so[:, None, None] * (np.einsum("mijl,mlk,mj->mik", T3, dP, no)
                                         + np.einsum("mij,mjk->mik", Hp, ho)))
            e, de = profile.eta(so), profile.deta(so)
            B[out] = e[:, None] * b
            dB[out] = e[:, None, None] * db + de[:, None, None] * b[:, :, None] * no[:, None, :]
        return B, dB


# --------------------------------------------------------------------------


@dataclass
class Calibration:
    """Evaluable calibration of a strong solution.

    ``B`` is built slice-wise: ``extensions`` maps a time to its velocity
    extension and is filled lazily through ``builder``.
    """

    shape: StrongSolution
    profile: CutoffProfile
    provenance: str
    builder: object = None
    lam_fn: object = None
    extensions: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    quad_nodes: int = 1024

    def extension(self, t):
        key = float(t)
        if key not in self.extensions:
            self.extensions[key] = self.builder(self.shape, key)
        return self.extensions[key]

    def lam(self, t=0.0):
        if self.lam_fn is not None:
            return self.lam_fn(t)
        return build_lambda_star(self.shape, self, t, self.quad_nodes)

    def evaluate(self, x, t=0.0, need_B=True):
        """All fields at points ``x``: dict with xi, grad_xi, div_xi, theta,
        grad_theta, s, normal, and (if ``need_B``) B, grad_B."""
        x = np.asarray(x, float)
        frame = self.shape.frame(x, t)
        s, p, n, hess = frame
        pr = self.profile
        tube = np.abs(s) < pr.delta
        z = pr.zeta(s)
        dz = pr.dzeta(s)
        hs = np.where(tube[..., None, None], hess, 0.0)
        xi = z[..., None] * n
        grad_xi = dz[..., None, None] * n[..., :, None] * n[..., None, :] + z[..., None, None] * hs
        div_xi = np.trace(grad_xi, axis1=-2, axis2=-1)
        out = {
            "s": s, "normal": n, "proj": p, "xi": xi, "grad_xi": grad_xi, "div_xi": div_xi,
            "theta": pr.tau(s), "grad_theta": pr.dtau(s)[..., None] * n,
        }
        if need_B:
            out["B"], out["grad_B"] = self.extension(t).evaluate(x, frame, pr)
        return out

    def xi(self, x, t=0.0):
        return self.evaluate(x, t, need_B=False)["xi"]

    def theta(self, x, t=0.0):
        return self.evaluate(x, t, need_B=False)["theta"]

    def div_xi(self, x, t=0.0):
        return self.evaluate(x, t, need_B=False)["div_xi"]

    def B(self, x, t=0.0):
        return self.evaluate(x, t)["B"]

    def grad_B(self, x, t=0.0):
        return self.evaluate(x, t)["grad_B"]


def build_xi_theta(shape: StrongSolution, profile: CutoffProfile, t_check=0.0):
    """Evaluators ``xi(x, t)`` and ``theta(x, t)``; raises if the profile is wider than the tube."""
    tube = shape.tube_radius()
    if profile.delta > tube * (1 + 1e-12):
        raise TubeTooWide(f"profile width {profile.delta} exceeds tube radius {tube:.6g}")
    cal = Calibration(shape, profile, "partial", builder=_zero_builder)
    return cal.xi, cal.theta


def build_lambda_star(shape, cal, t=0.0, m=1024):
    """Boundary-quadrature mean of ``div xi`` over the time slice."""
    pts, w, _ = shape.quadrature(t, m)
    dv = cal.evaluate(pts, t, need_B=False)["div_xi"]
    return float(np.sum(w * dv) / np.sum(w))


def build_B(shape: StrongSolution, t=0.0, nodes=256, eps_solve=1e-8):
    """Velocity extension for one time slice from the Neumann problem with datum ``V*``."""
    if isinstance(shape, Balls):
        if shape.static:
            return ZeroField()
        raise IncompatibleData("each ball changes volume: the Neumann datum has nonzero mean "
                               "on every component")
    pts, w, _ = discretisation(shape, t, nodes)
    V = shape.boundary(pts, t)[2]
    mean = float(np.sum(w * V) / np.sum(w))
    g = compatibility_project(V, w)
    pot = solve_neumann(NeumannProblem(shape, g, t, nodes, eps_solve))
    return HarmonicExtension(pot, mean)


def _zero_builder(shape, t):
    return ZeroField()


def sphere_calibration(R=1.0, d=2, profile: CutoffProfile | None = None, center=None, T=1.0):
    """Analytic calibration of a static ball: ``B = 0``, ``lambda* = (d-1)/R``."""
    if R <= 0:
        raise ValueError("radius must be positive")
    profile = CutoffProfile(min(0.3, 0.5 * R / max(d - 1, 1))) if profile is None else profile
    shape = Sphere(R, center, d, T)
    if profile.delta > shape.tube_radius() * (1 + 1e-12):
        raise TubeTooWide(f"profile width {profile.delta} exceeds tube radius {shape.tube_radius():.6g}")
    lam = (d - 1) / R
    return Calibration(shape, profile, "analytic-sphere", builder=_zero_builder,
                       lam_fn=lambda t: lam,
                       constants={"c_zeta": profile.c_zeta, "c_theta": profile.c_theta})


def construct_calibration(shape: StrongSolution, profile: CutoffProfile, nodes=256, eps_solve=1e-8):
    """General construction; spheres and static balls take the analytic fast path."""
    if isinstance(shape, Sphere):
        return sphere_calibration(shape.R, shape.d, profile, shape.center, shape.T)
    tube = shape.tube_radius()
    if profile.delta > tube * (1 + 1e-12):
        raise TubeTooWide(f"profile width {profile.delta} exceeds tube radius {tube:.6g}")
    if isinstance(shape, Balls) and shape.static:
        lam = (shape.d - 1) / shape.r0[0]
        return Calibration(shape, profile, "analytic-balls", builder=_zero_builder,
                           lam_fn=lambda t: lam,
                           constants={"c_zeta": profile.c_zeta, "c_theta": profile.c_theta})
    if not isinstance(shape, FourierCurve):
        build_B(shape)  # raises for evolving balls
    cal = Calibration(shape, profile, "constructed",
                      builder=lambda sh, t: build_B(sh, t, nodes, eps_solve),
                      constants={"c_zeta": profile.c_zeta, "c_theta": profile.c_theta})
    return cal


def transport_coefficient(cal: Calibration, x, t=0.0):
    """``f = 1_U grad s . (grad B o P) grad s`` evaluated directly."""
    ev = cal.evaluate(x, t)
    p = ev["proj"]
    n = ev["normal"]
    dBp = cal.evaluate(p, t)["grad_B"]
    f = np.einsum("...i,...ik,...k->...", n, dBp, n)
    return np.where(np.abs(ev["s"]) < cal.profile.delta, f, 0.0)


def export_fields(cal: Calibration, grid, t=0.0):
    """Per-cell ``xi``, ``B``, ``theta`` on ``grid`` (row-major) and ``lambda*``."""
    pts = grid.points().reshape(-1, grid.d)
    out = np.empty((pts.shape[0], 2 * grid.d + 1))
    for lo in range(0, pts.shape[0], 8192):
        ev = cal.evaluate(pts[lo:lo + 8192], t)
        out[lo:lo + 8192, :grid.d] = ev["xi"]
        out[lo:lo + 8192, grid.d:2 * grid.d] = ev["B"]
        out[lo:lo + 8192, 2 * grid.d] = ev["theta"]
    return out, cal.lam(t)

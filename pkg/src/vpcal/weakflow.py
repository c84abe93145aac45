"""Volume-preserving thresholding on a periodic grid and checks of the weak-solution clauses.

One step diffuses the indicator with the heat kernel of time ``h_t`` (a
Gaussian of standard deviation ``sqrt(2 h_t)``) and keeps the cells with the
largest diffused values, as many as the indicator had before.  Plain
thresholding (``vp=False``) keeps ``u > 1/2`` instead.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInterface, ResolutionError, SingularFit
from .geometry import (DiscreteInterface, Grid, IndicatorField, discrete_interface, gaussian_multiplier,
                       mollify, profile_depth)

SNAPSHOT_MAGIC = b"VPMF"
SNAPSHOT_VERSION = 1
TOL_V = 0.2
TOL_E = 1e-3
TOL_EDI = 0.05


def kernel_width(h_t):
    return float(np.sqrt(2.0 * h_t))


def check_resolution(grid: Grid, h_t):
    w = kernel_width(h_t)
    if w < 2 * grid.h * (1 - 1e-12):
        raise ResolutionError(f"kernel width sqrt(2 h_t) = {w:.4g} is below 2h = {2 * grid.h:.4g}")


def heat_multiplier(grid: Grid, h_t):
    return gaussian_multiplier(grid, kernel_width(h_t))


def gaussian_kernel(grid: Grid, h_t):
    """Periodic heat kernel on the grid as cell weights (sums to one, even under ``x -> -x``)."""
    g = np.fft.irfftn(heat_multiplier(grid, h_t), s=grid.shape, axes=tuple(range(grid.d)))
    # enforce the reflection symmetry exactly; the continuum kernel is even
    flip = g
    for ax in range(grid.d):
        flip = np.roll(np.flip(flip, axis=ax), 1, axis=ax)
    g = 0.5 * (g + flip)
    return g / g.sum()


def diffuse(chi: IndicatorField, h_t):
    return np.fft.irfftn(np.fft.rfftn(chi.values.astype(float)) * heat_multiplier(chi.grid, h_t),
                         s=chi.grid.shape, axes=tuple(range(chi.grid.d)))


def thresholding_step(chi: IndicatorField, h_t, vp=True):
    """One thresholding step; returns ``(chi', level, diagnostics)``."""
    if chi.is_constant():
        raise EmptyInterface("indicator is constant")
    check_resolution(chi.grid, h_t)
    u = diffuse(chi, h_t)
    flat = u.ravel()
    if vp:
        m = chi.count
        # stable sort of -u breaks ties by ascending cell index
        order = np.argsort(-flat, kind="stable")
        out = np.zeros(flat.size, np.uint8)
        out[order[:m]] = 1
        level = 0.5 * (flat[order[m - 1]] + flat[order[m]]) if m < flat.size else flat[order[-1]]
    else:
        out = (flat > 0.5).astype(np.uint8)
        level = 0.5
    new = IndicatorField(chi.grid, out.reshape(chi.grid.shape), chi.t + h_t)
    flips = int(np.count_nonzero(new.values != chi.values))
    return new, float(level), {"level_offset": float(level) - 0.5, "flips": flips}


# --------------------------------------------------------------------------
# velocity and Lagrange multiplier


@dataclass
class VelocitySample:
    """Normal velocity on the discrete interface of the earlier field."""

    interface: DiscreteInterface
    V: np.ndarray
    depth: np.ndarray
    weak_residual: np.ndarray
    weak_tol: float
    h: float

    @property
    def core(self):
        """Samples within one and a half cells of the 1/2-level."""
        return np.abs(self.depth) <= 1.5 * self.h

    @property
    def weak_ok(self) -> bool:
        return bool(np.all(np.abs(self.weak_residual) <= self.weak_tol))

    def mean(self, core=True):
        w = self.interface.weight
        sel = self.core if core else np.ones(w.size, bool)
        return float(np.sum(w[sel] * self.V[sel]) / np.sum(w[sel]))

    def dissipation(self):
        """``sum V^2 w``."""
        return float(np.sum(self.V**2 * self.interface.weight))


def _test_functions(grid: Grid):
    x = grid.points()
    k = 2 * np.pi / grid.L
    fs = [np.ones(grid.shape)]
    for i in range(2):
        fs.append(np.cos(k * x[..., i]))
        fs.append(np.sin(k * x[..., i]))
    return fs


def estimate_velocity(chi0: IndicatorField, chi1: IndicatorField, h_t, kappa=2.0, tol_V=TOL_V):
    """Normal velocity from the change of the mollified signed distance.

    ``V = (d1 - d0) / h_t`` at the interface samples of ``chi0``, where ``d``
    is the distance to the 1/2-level of the mollified field read off from
    the Gaussian profile, positive inside.  Outward motion gives ``V > 0``.
    """
    if chi0.is_constant() or chi1.is_constant():
        raise EmptyInterface("indicator is constant")
    iface = discrete_interface(chi0, kappa)
    g = chi0.grid
    width = kappa * g.h
    u1, _ = mollify(chi1.values, g, width)
    c = iface.cells
    d0 = iface.depth
    d1 = profile_depth(u1.ravel()[c], width)
    V = (d1 - d0) / h_t
    diff = (chi1.values.astype(float) - chi0.values.astype(float)).ravel()
    res = []
    for zeta in _test_functions(g):
        zf = zeta.ravel()
        res.append(np.sum(zf * diff) * g.cell_volume - h_t * np.sum(zf[c] * V * iface.weight))
    return VelocitySample(iface, V, d0, np.asarray(res), tol_V * h_t * iface.perimeter, g.h)


def lambda_dictionary(grid: Grid):
    """Eight smooth periodic fields ``e_i g(x_i)`` with their Jacobians ``dB[..., i, k] = d_k B_i``."""
    x = grid.points()
    k = 2 * np.pi / grid.L
    d = grid.d
    out = []
    for m in (1, 2):
        for i in range(2):
            for fn, dfn in ((np.sin, np.cos), (np.cos, lambda a: -np.sin(a))):
                B = np.zeros(x.shape)
                dB = np.zeros(x.shape + (d,))
                B[..., i] = fn(m * k * x[..., i])
                dB[..., i, i] = m * k * dfn(m * k * x[..., i])
                out.append((B, dB))
    return out[:8]


def estimate_lambda(iface: DiscreteInterface, V, grid: Grid, dictionary=None):
    """Least-squares Lagrange multiplier and the curvature-average estimate.

    Returns ``(lam, lam_hat, fit_residual)``.
    """
    dictionary = lambda_dictionary(grid) if dictionary is None else dictionary
    c = iface.cells
    nu, w = iface.normal, iface.weight
    a, b = [], []
    for B, dB in dictionary:
        Bc = B.reshape(-1, grid.d)[c]
        dBc = dB.reshape(-1, grid.d, grid.d)[c]
        div = np.trace(dBc, axis1=-2, axis2=-1)
        nBn = np.einsum("mi,mik,mk->m", nu, dBc, nu)
        nb = np.sum(nu * Bc, axis=-1)
        a.append(np.sum((div - nBn) * w) + np.sum(V * nb * w))
        b.append(np.sum(nb * w))
    a, b = np.asarray(a), np.asarray(b)
    bb = float(np.sum(b * b))
    if not bb > 1e-24 * max(iface.perimeter, 1.0) ** 2:
        raise SingularFit("test fields carry no normal flux through the interface")
    lam = float(np.sum(a * b) / bb)
    return lam, curvature_average(iface, grid), float(np.linalg.norm(a - lam * b))


def curvature_average(iface: DiscreteInterface, grid: Grid):
    """Weighted mean of ``div nu`` with ``nu = -grad u/|grad u|`` of the mollified field."""
    grad = iface.grad
    mag = np.sqrt(np.sum(grad * grad, axis=-1))
    nu = -grad / np.maximum(mag, 1e-12 * mag.max())[..., None]
    div = np.zeros(grid.shape)
    for i in range(grid.d):
        div += (np.roll(nu[..., i], -1, axis=i) - np.roll(nu[..., i], 1, axis=i)) / (2 * grid.h)
    H = div.ravel()[iface.cells]
    return float(np.sum(H * iface.weight) / np.sum(iface.weight))


# --------------------------------------------------------------------------
# runs


@dataclass
class WeakFlowTrace:
    grid: Grid
    h_t: float
    vp: bool
    fields: list
    counts: list
    energies: list
    levels: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    lambda_hats: list = field(default_factory=list)
    lambda_residuals: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    seed: int = 0

    @property
    def steps(self):
        return len(self.fields) - 1

    @property
    def times(self):
        return self.h_t * np.arange(len(self.fields))

    @property
    def volumes(self):
        return np.asarray(self.counts, float) * self.grid.cell_volume

    def indicator(self, n) -> IndicatorField:
        return IndicatorField(self.grid, self.fields[n], n * self.h_t)

    def C_lambda_sq(self, upto=None):
        lam = np.asarray(self.lambdas[:upto], float)
        return float(self.h_t * np.sum(lam * lam))

    def C_lambda_running(self):
        lam = np.asarray(self.lambdas, float)
        return self.h_t * np.cumsum(lam * lam)


def run_flow(chi0: IndicatorField, h_t, N, vp=True, kappa=2.0, record=True, seed=0, callback=None):
    """Iterate thresholding ``N`` times, recording energy, volume, level, velocity and multiplier."""
    check_resolution(chi0.grid, h_t)
    g = chi0.grid
    iface = discrete_interface(chi0, kappa)
    tr = WeakFlowTrace(g, float(h_t), bool(vp), [chi0.values.copy()], [chi0.count],
                       [iface.perimeter], seed=seed)
    chi = chi0
    for n in range(N):
        new, level, diag = thresholding_step(chi, h_t, vp)
        tr.levels.append(level)
        tr.diagnostics.append(diag)
        if record:
            vel = estimate_velocity(chi, new, h_t, kappa)
            lam, lam_hat, lres = estimate_lambda(vel.interface, vel.V, g)
            tr.velocities.append(vel)
            tr.lambdas.append(lam)
            tr.lambda_hats.append(lam_hat)
            tr.lambda_residuals.append(lres)
        tr.fields.append(new.values.copy())
        tr.counts.append(new.count)
        tr.energies.append(discrete_interface(new, kappa).perimeter)
        chi = new
        if callback is not None:
            callback(n + 1, chi)
    return tr


@dataclass
class WeakSolutionReport:
    edi_lhs: float
    edi_rhs: float
    edi_pass: bool
    volume_pass: bool
    volume_drift: int
    C_lambda_sq: float
    lambda_pass: bool
    energy_monotone: bool
    velocity_weak_pass: bool

    @property
    def passed(self):
        return self.edi_pass and self.volume_pass and self.lambda_pass


def check_weak_solution(trace: WeakFlowTrace, tol_EDI=TOL_EDI, tol_E=TOL_E):
    """Energy-dissipation, volume and multiplier clauses on a recorded trace."""
    if len(trace.fields) < 2:
        raise ValueError("trace needs at least two fields")
    E = np.asarray(trace.energies)
    diss = sum(trace.h_t * v.dissipation() for v in trace.velocities)
    lhs = float(E[-1] + diss)
    rhs = float(E[0] * (1 + tol_EDI))
    counts = np.asarray(trace.counts)
    drift = int(np.max(np.abs(counts - counts[0])))
    C2 = trace.C_lambda_sq() if trace.lambdas else 0.0
    mono = bool(np.all(np.diff(E) <= tol_E * E[0]))
    weak = all(v.weak_ok for v in trace.velocities)
    return WeakSolutionReport(lhs, rhs, lhs <= rhs, drift == 0 if trace.vp else True, drift, C2,
                              bool(np.isfinite(C2)), mono, weak)


# --------------------------------------------------------------------------
# snapshots


def write_snapshot(path, chi: IndicatorField, step: int):
    g = chi.grid
    header = SNAPSHOT_MAGIC + struct.pack("<HHII", SNAPSHOT_VERSION, g.d, g.n, int(step))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.packbits(chi.values.ravel()).tobytes())


def read_snapshot(path, L=1.0):
    """Returns ``(IndicatorField, step)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    version, d, n, step = struct.unpack("<HHII", raw[4:16])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    bits = np.unpackbits(np.frombuffer(raw[16:], np.uint8), count=n**d)
    g = Grid(n, L, d)
    return IndicatorField(g, bits.reshape(g.shape)), step

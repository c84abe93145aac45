"""Interior Neumann-Laplace solves on time slices of a strong solution.

Planar domains use a Nystrom discretisation of a second-kind boundary
integral equation.  The harmonic function is carried as the real part of an
analytic ``F = phi + i psi``: the conjugate ``psi`` follows from the Neumann
data by arclength integration (Cauchy-Riemann), ``psi`` is represented as a
double-layer (Cauchy) potential, and ``F`` is evaluated inside the domain by
the barycentric Cauchy formula, which stays accurate right up to the
boundary.  Balls in three dimensions are handled by a spherical-harmonic
expansion of the data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y

from .errors import IncompatibleData, NotOnBoundary, SolverDiverged
from .geometry import FourierCurve, Sphere, StrongSolution, sphere_quadrature

EPS_SOLVE = 1e-8
EPS_SOLVE_GRID = 1e-4
ON_BOUNDARY_TOL = 1e-8


def compatibility_project(g, weights):
    """Remove the weighted mean so that ``sum(w * g) == 0``."""
    g = np.asarray(g, float)
    w = np.asarray(weights, float)
    if np.any(w <= 0):
        raise ValueError("quadrature weights must be positive")
    return g - np.sum(w * g) / np.sum(w)


# --------------------------------------------------------------------------
# periodic spectral helpers


def _wavenumbers(N):
    k = np.fft.fftfreq(N, 1.0 / N)
    if N % 2 == 0:
        k[N // 2] = 0.0
    return k


def spectral_derivative(f):
    return np.fft.ifft(1j * _wavenumbers(f.shape[0]) * np.fft.fft(f))


def spectral_antiderivative(q):
    """Periodic antiderivative of zero-mean samples (constant of integration 0)."""
    N = q.shape[0]
    k = _wavenumbers(N)
    Q = np.fft.fft(q)
    out = np.zeros_like(Q)
    nz = k != 0
    out[nz] = Q[nz] / (1j * k[nz])
    return np.fft.ifft(out)


def trig_interpolate(values, theta):
    """Evaluate the trigonometric interpolant of equispaced samples at ``theta``."""
    N = values.shape[0]
    C = np.fft.fft(values) / N
    k = np.fft.fftfreq(N, 1.0 / N)
    theta = np.asarray(theta, float)
    E = np.exp(1j * theta[..., None] * k)
    if N % 2 == 0:
        # split the Nyquist mode symmetrically so real data stays real
        E[..., N // 2] = np.cos(theta * (N // 2))
    return E @ C


# --------------------------------------------------------------------------
# planar boundary discretisation


@dataclass
class BoundaryNodes:
    """Equal-parameter nodes on a closed planar curve, counterclockwise."""

    theta: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    ddz: np.ndarray
    center: complex

    @property
    def N(self):
        return self.theta.size

    @property
    def dtheta(self):
        return 2 * np.pi / self.N

    @property
    def weights(self):
        """Arclength trapezoid weights."""
        return np.abs(self.dz) * self.dtheta

    @property
    def points(self):
        return np.stack([self.z.real, self.z.imag], axis=-1)

    @property
    def normals(self):
        nu = -1j * self.dz / np.abs(self.dz)
        return np.stack([nu.real, nu.imag], axis=-1)

    def parameter(self, p):
        """Curve parameter of boundary points (curves are star-shaped about ``center``)."""
        p = np.asarray(p, float)
        return np.mod(np.angle(p[..., 0] + 1j * p[..., 1] - self.center), 2 * np.pi)


def boundary_nodes(shape: StrongSolution, t=0.0, N=256) -> BoundaryNodes:
    theta = 2 * np.pi * np.arange(N) / N
    if isinstance(shape, FourierCurve):
        z, dz, ddz = shape.curve(theta, t, (0, 1, 2))
        c = complex(*shape.center)
    elif isinstance(shape, Sphere) and shape.d == 2:
        c = complex(*shape.center)
        e = np.exp(1j * theta)
        z, dz, ddz = c + shape.R * e, 1j * shape.R * e, -shape.R * e
    else:
        raise TypeError(f"no planar boundary discretisation for {type(shape).__name__} in d={shape.d}")
    return BoundaryNodes(theta, z, dz, ddz, c)


@dataclass
class NeumannProblem:
    """``Laplace phi = 0`` inside, ``nu . grad phi = g`` on the boundary, zero mean.

    ``g`` holds the datum at the boundary nodes (planar case) or at the
    sphere quadrature points (three-dimensional ball).
    """

    shape: StrongSolution
    g: np.ndarray
    t: float = 0.0
    nodes: int = 256
    eps_solve: float = EPS_SOLVE
    eps_compat: float | None = None

    @classmethod
    def from_function(cls, shape, fn, t=0.0, nodes=256, **kw):
        """Sample ``fn(points, normals)`` on the discretisation of ``shape``."""
        pts, _, nrm = discretisation(shape, t, nodes)
        return cls(shape, np.asarray(fn(pts, nrm), float), t, nodes, **kw)


def discretisation(shape, t=0.0, nodes=256):
    """Points, weights and normals on which Neumann data is sampled."""
    if shape.d == 2:
        b = boundary_nodes(shape, t, nodes)
        return b.points, b.weights, b.normals
    if isinstance(shape, Sphere):
        return sphere_quadrature(shape.R, shape.center, 3, nodes)
    raise TypeError("three-dimensional Neumann solves are restricted to the sphere")


@dataclass
class HarmonicPotential:
    """Solved planar potential; evaluators accept arrays of points ``(..., 2)``."""

    nodes: BoundaryNodes
    F: np.ndarray
    dF: list = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def _bary(self, values, x):
        x = np.asarray(x, float)
        zt = (x[..., 0] + 1j * x[..., 1]).ravel()
        b = self.nodes
        out = np.empty(zt.size, complex)
        for lo in range(0, zt.size, 2048):
            blk = zt[lo:lo + 2048]
            diff = b.z[None, :] - blk[:, None]
            hit = np.abs(diff) < 1e-14
            diff[hit] = 1.0
            c = b.dz[None, :] / diff
            res = (c @ values) / c.sum(axis=1)
            rows = np.flatnonzero(hit.any(axis=1))
            if rows.size:
                res[rows] = values[np.argmax(hit[rows], axis=1)]
            out[lo:lo + 2048] = res
        return out.reshape(x.shape[:-1])

    def complex_derivative(self, x, order=0, on_boundary=False):
        """``F^(order)`` at interior points, or at boundary points via the trace."""
        vals = self.F if order == 0 else self.dF[order - 1]
        if on_boundary:
            return trig_interpolate(vals, self.nodes.parameter(x))
        return self._bary(vals, x)

    def value(self, x, on_boundary=False):
        return self.complex_derivative(x, 0, on_boundary).real

    def grad(self, x, on_boundary=False):
        f1 = self.complex_derivative(x, 1, on_boundary)
        return np.stack([f1.real, -f1.imag], axis=-1)

    def hess(self, x, on_boundary=False):
        f2 = self.complex_derivative(x, 2, on_boundary)
        a, b = f2.real, -f2.imag
        return np.stack([np.stack([a, b], -1), np.stack([b, -a], -1)], -2)

    def third(self, x, on_boundary=False):
        """Third derivative tensor ``T[i, j, k] = d_i d_j d_k phi``."""
        f3 = self.complex_derivative(x, 3, on_boundary)
        a, b = f3.real, -f3.imag  # phi_xxx, phi_xxy
        T = np.empty(np.shape(a) + (2, 2, 2))
        T[..., 0, 0, 0] = a
        T[..., 0, 0, 1] = T[..., 0, 1, 0] = T[..., 1, 0, 0] = b
        T[..., 0, 1, 1] = T[..., 1, 0, 1] = T[..., 1, 1, 0] = -a
        T[..., 1, 1, 1] = -b
        return T

    def laplacian(self, x):
        H = self.hess(x)
        return H[..., 0, 0] + H[..., 1, 1]

    def mean(self):
        """Area average of ``phi`` over the domain."""
        b = self.nodes
        area = np.real(np.sum(np.conj(b.z) * b.dz) / 2j) * b.dtheta
        integral = np.real(np.sum(self.F * np.conj(b.z) * b.dz) / 2j) * b.dtheta
        return integral / area


def solve_neumann(problem: NeumannProblem):
    """Solve the interior Neumann problem.

    Parameters
    ----------
    problem : NeumannProblem
        Domain slice, Neumann datum on the discretisation, tolerances.

    Returns
    -------
    HarmonicPotential or SphereHarmonicPotential
        Zero-mean harmonic potential with derivative evaluators.

    Raises
    ------
    IncompatibleData
        If the weighted boundary mean of the datum exceeds ``eps_compat``.
    SolverDiverged
        If the boundary-condition residual exceeds ``eps_solve``.
    """
    shape = problem.shape
    pts, w, nrm = discretisation(shape, problem.t, problem.nodes)
    g = np.asarray(problem.g, float)
    if g.shape != w.shape:
        raise ValueError(f"datum has shape {g.shape}, discretisation has {w.shape}")
    scale = max(np.max(np.abs(g)), 1e-300)
    eps_compat = 1e-10 * scale if problem.eps_compat is None else problem.eps_compat
    mean = np.sum(w * g) / np.sum(w)
    if abs(mean) > eps_compat:
        raise IncompatibleData(f"weighted boundary mean {mean:.3e} exceeds {eps_compat:.3e}")
    if shape.d == 3:
        return _solve_sphere(shape, g, problem)

    b = boundary_nodes(shape, problem.t, problem.nodes)
    N, dth = b.N, b.dtheta
    q = g * np.abs(b.dz)
    q = q - q.mean()
    psi = spectral_antiderivative(q).real

    D = b.z[None, :] - b.z[:, None]
    np.fill_diagonal(D, 1.0)
    C = dth * b.dz[None, :] / (2j * np.pi * D)
    np.fill_diagonal(C, 0.0)
    K = C.real.copy()
    np.fill_diagonal(K, dth * np.imag(b.ddz / b.dz) / (4 * np.pi))
    A = 0.5 * np.eye(N) + K
    mu = np.linalg.solve(A, psi)
    lin_res = np.max(np.abs(A @ mu - psi))

    # boundary values of the Cauchy integral (singularity subtracted)
    G = mu + C @ mu - mu * C.sum(axis=1) + dth * spectral_derivative(mu) / (2j * np.pi)
    F = 1j * G
    area = np.real(np.sum(np.conj(b.z) * b.dz) / 2j) * dth
    F = F - np.real(np.sum(F * np.conj(b.z) * b.dz) / 2j) * dth / area

    dF = []
    cur = F
    for _ in range(3):
        cur = spectral_derivative(cur) / b.dz
        dF.append(cur)
    nu = -1j * b.dz / np.abs(b.dz)
    bc_res = np.max(np.abs(np.real(dF[0] * nu) - g))
    pot = HarmonicPotential(b, F, dF, {
        "method": "nystrom-cauchy", "nodes": N, "linear_residual": float(lin_res),
        "bc_residual": float(bc_res), "condition": float(np.linalg.cond(A)),
    })
    pot.diagnostics["mean"] = float(pot.mean())
    if not bc_res <= problem.eps_solve * max(1.0, scale):
        raise SolverDiverged(f"boundary residual {bc_res:.3e} above eps_solve={problem.eps_solve:.1e}")
    return pot


def boundary_derivatives(pot, p, shape=None, t=0.0):
    """Gradient and Hessian of the potential at boundary points."""
    p = np.asarray(p, float)
    if shape is not None:
        s = shape.signed_distance(p, t)
        if np.any(np.abs(s) > ON_BOUNDARY_TOL):
            raise NotOnBoundary(f"|s| = {np.max(np.abs(s)):.3g} exceeds {ON_BOUNDARY_TOL}")
    return pot.grad(p, on_boundary=True), pot.hess(p, on_boundary=True)


# --------------------------------------------------------------------------
# three-dimensional ball


@dataclass
class SphereHarmonicPotential:
    """``phi = sum_{l>=1} (R/l) (r/R)^l g_lm Y_lm`` inside a ball."""

    R: float
    center: np.ndarray
    coeffs: dict
    diagnostics: dict = field(default_factory=dict)
    fd_step: float = 1e-3

    def value(self, x, on_boundary=False):
        y = np.asarray(x, float) - self.center
        r = np.sqrt(np.sum(y * y, axis=-1))
        pol = np.arccos(np.clip(y[..., 2] / np.where(r > 0, r, 1.0), -1, 1))
        az = np.arctan2(y[..., 1], y[..., 0])
        out = np.zeros(r.shape)
        for (l, m), c in self.coeffs.items():
            out += np.real(c * sph_harm_y(l, m, pol, az)) * self.R / l * (r / self.R) ** l
        return out

    def grad(self, x, on_boundary=False):
        return _fd_grad(self.value, np.asarray(x, float), self.fd_step * self.R)

    def hess(self, x, on_boundary=False):
        x = np.asarray(x, float)
        return _fd_grad(lambda y: self.grad(y), x, self.fd_step * self.R)

    def laplacian(self, x):
        H = self.hess(x)
        return np.trace(H, axis1=-2, axis2=-1)

    def mean(self):
        return 0.0


def _fd_grad(fn, x, h):
    """Fourth-order central differences along each axis; last axis is the derivative."""
    d = x.shape[-1]
    cols = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        cols.append((-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h))
    return np.stack(cols, axis=-1)


def _solve_sphere(shape, g, problem, lmax=10):
    if not isinstance(shape, Sphere):
        raise TypeError("three-dimensional Neumann solves are restricted to the sphere")
    pts, w, nrm = sphere_quadrature(1.0, np.zeros(3), 3, problem.nodes)
    pol = np.arccos(np.clip(nrm[:, 2], -1, 1))
    az = np.arctan2(nrm[:, 1], nrm[:, 0])
    coeffs = {}
    recon = np.zeros_like(g)
    for l in range(1, lmax + 1):
        for m in range(-l, l + 1):
            Y = sph_harm_y(l, m, pol, az)
            c = np.sum(w * g * np.conj(Y))
            if abs(c) > 1e-14 * max(1.0, np.max(np.abs(g))):
                coeffs[(l, m)] = c
                recon += np.real(c * Y)
    res = float(np.max(np.abs(recon - g)))
    pot = SphereHarmonicPotential(shape.R, shape.center, coeffs,
                                  {"method": "spherical-harmonics", "lmax": lmax, "bc_residual": res})
    if res > max(problem.eps_solve, EPS_SOLVE_GRID) * max(1.0, np.max(np.abs(g))):
        raise SolverDiverged(f"spherical-harmonic truncation residual {res:.3e}")
    return pot


# --------------------------------------------------------------------------
# manufactured solutions


@dataclass
class ConvergenceRow:
    case: str
    nodes: int
    max_error: float
    grad_error: float
    order: float
    saturated: bool


def disk_harmonic(k, R=1.0):
    """Datum ``cos k theta`` on the disk of radius ``R`` and its zero-mean potential."""
    def datum(p, nrm):
        return np.cos(k * np.arctan2(p[..., 1], p[..., 0]))

    def exact(x):
        z = (x[..., 0] + 1j * x[..., 1]) / R
        return np.real(z**k) * R / k

    return datum, exact


def manufactured_convergence(cases=None, nodes=(64, 128, 256), R=1.0, r_max=0.95, m=40, floor=1e-13,
                             eps_solve=EPS_SOLVE):
    """Neumann solves against exact harmonics on a disk, with observed orders.

    ``cases`` maps a name to ``(datum, exact)``; the default is ``cos theta``
    and ``cos 2 theta``.  Errors are maxima over a polar grid of radius
    ``r_max R``.  An order is reported between consecutive node counts and
    is ``nan`` (``saturated``) once both errors sit at the roundoff ``floor``.
    """
    from .geometry import Sphere
    shape = Sphere(R, np.zeros(2), 2)
    if cases is None:
        cases = {"cos1": disk_harmonic(1, R), "cos2": disk_harmonic(2, R)}
    rr = np.linspace(0.0, r_max * R, m)
    th = 2 * np.pi * np.arange(m) / m
    x = np.stack(np.meshgrid(rr, th, indexing="ij"), -1).reshape(-1, 2)
    x = np.stack([x[:, 0] * np.cos(x[:, 1]), x[:, 0] * np.sin(x[:, 1])], -1)
    rows = []
    for name, (datum, exact) in cases.items():
        prev = None
        for N in nodes:
            pts, w, nrm = discretisation(shape, 0.0, N)
            # the datum is compatible; its discrete mean is quadrature error
            g = compatibility_project(datum(pts, nrm), w)
            pot = solve_neumann(NeumannProblem(shape, g, 0.0, N, eps_solve))
            err = float(np.max(np.abs(pot.value(x) - exact(x))))
            gerr = float(np.max(np.abs(pot.grad(x) - _fd_grad(exact, x, 1e-4))))
            order, sat = np.nan, False
            if prev is not None:
                if prev > floor and err > floor:
                    order = float(np.log2(prev / err) / np.log2(N / nodes[nodes.index(N) - 1]))
                else:
                    sat = True
            rows.append(ConvergenceRow(name, int(N), err, gerr, order, sat))
            prev = err
    return rows

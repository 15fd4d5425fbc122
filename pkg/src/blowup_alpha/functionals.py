"""Energy functionals and their inequalities on the round unit sphere.

Conventions (n = 1, V = 4 pi):

* ``ddbar`` acts as the Laplace-Beltrami operator, so ``omega_phi`` has density
  ``rho = 1 + Lap(phi)`` against the round area form.
* ``J(phi) = (1/(2V)) int |grad phi|^2``, ``I(phi) = (1/V) int phi (omega - omega_phi)``
  (which equals ``2 J`` here), and
  ``F(phi) = J - (1/V) int phi - log((1/V) int e^{-phi})`` with ``h_omega = 0``.
* The Ricci form of ``rho omega`` has density ``1 - Lap(log rho)``.

Potentials live on a product Gauss mesh: Gauss-Legendre nodes in ``cos(theta)``
times equispaced longitudes. With ``n_lat`` latitudes the mesh integrates
products of harmonics of degree ``< n_lat`` exactly, so band-limited potentials
are handled spectrally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import logsumexp, sph_harm_y

from .threshold import HoelderSplit

__all__ = [
    "FunctionalValues",
    "MetricDomainError",
    "RicciReport",
    "SphereMesh",
    "SpherePotential",
    "compute_F",
    "compute_I",
    "compute_J",
    "green_bound_check",
    "hoelder_chain_check",
    "lambda1_project",
    "manufactured_ricci_solution",
    "mt_sphere_check",
    "random_battery",
    "ricci_identity_check",
]

V_SPHERE = 4.0 * np.pi


class MetricDomainError(ValueError):
    """``omega + ddbar phi`` is not positive at some node."""


@dataclass(frozen=True, eq=False)
class SphereMesh:
    n_lat: int = 32
    n_lon: int = 64

    def __post_init__(self):
        if self.n_lat * self.n_lon < 2048:
            raise ValueError("sphere mesh needs at least 2048 nodes")
        if self.n_lon < 2 * self.n_lat:
            raise ValueError("n_lon must be at least 2 * n_lat for exact longitude sums")

    @cached_property
    def _nodes(self):
        x, wx = npleg.leggauss(self.n_lat)
        lon = 2 * np.pi * np.arange(self.n_lon) / self.n_lon
        X, L = np.meshgrid(x, lon, indexing="ij")
        W = np.outer(wx, np.full(self.n_lon, 2 * np.pi / self.n_lon))
        return X.ravel(), L.ravel(), W.ravel()

    @property
    def cos_theta(self):
        return self._nodes[0]

    @property
    def longitude(self):
        return self._nodes[1]

    @property
    def weights(self):
        return self._nodes[2]

    @property
    def size(self) -> int:
        return self.n_lat * self.n_lon

    @property
    def lmax(self) -> int:
        return self.n_lat - 1

    @cached_property
    def xyz(self) -> np.ndarray:
        ct = self.cos_theta
        st = np.sqrt(1 - ct**2)
        return np.stack([st * np.cos(self.longitude), st * np.sin(self.longitude), ct])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([l for l in range(self.lmax + 1) for _ in range(2 * l + 1)])

    @cached_property
    def harmonics(self) -> np.ndarray:
        """Real orthonormal spherical harmonics, shape ``(nodes, (lmax+1)^2)``."""
        theta = np.arccos(self.cos_theta)
        lon = self.longitude
        cols = []
        for l in range(self.lmax + 1):
            for m in range(-l, l + 1):
                Y = sph_harm_y(l, abs(m), theta, lon)
                if m > 0:
                    cols.append(np.sqrt(2) * (-1) ** m * Y.real)
                elif m < 0:
                    cols.append(np.sqrt(2) * (-1) ** m * Y.imag)
                else:
                    cols.append(Y.real)
        return np.stack(cols, axis=1)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def mean(self, values) -> float:
        return self.integrate(values) / V_SPHERE

    def log_mean_exp(self, values) -> float:
        """``log((1/V) int e^values)`` with the maximum factored out."""
        return float(logsumexp(values, b=self.weights) - np.log(V_SPHERE))

    def analyze(self, values) -> np.ndarray:
        return self.harmonics.T @ (self.weights * values)

    def synthesize(self, coeffs) -> np.ndarray:
        return self.harmonics @ coeffs

    def laplacian(self, values) -> np.ndarray:
        c = self.analyze(values)
        return self.synthesize(-self.degrees * (self.degrees + 1) * c)


@dataclass(frozen=True, eq=False)
class SpherePotential:
    mesh: SphereMesh
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.size,):
            raise ValueError("values must have one entry per mesh node")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_coefficients(cls, mesh: SphereMesh, coeffs) -> "SpherePotential":
        c = np.zeros(mesh.harmonics.shape[1])
        c[: len(coeffs)] = coeffs
        return cls(mesh, mesh.synthesize(c))

    @classmethod
    def constant(cls, mesh: SphereMesh, c: float = 0.0) -> "SpherePotential":
        return cls(mesh, np.full(mesh.size, float(c)), normalized=(c == 0.0))

    @cached_property
    def coefficients(self) -> np.ndarray:
        return self.mesh.analyze(self.values)

    @cached_property
    def density(self) -> np.ndarray:
        """``omega_phi / omega`` at every node."""
        return 1.0 + self.mesh.laplacian(self.values)

    def check(self):
        if np.min(self.density) <= 0:
            raise MetricDomainError(f"omega_phi density reaches {np.min(self.density):.3g}")
        return self

    def sup_normalized(self) -> "SpherePotential":
        return SpherePotential(self.mesh, self.values - np.max(self.values), True)

    def shifted(self, c: float) -> "SpherePotential":
        return SpherePotential(self.mesh, self.values + c)

    def scaled(self, t: float) -> "SpherePotential":
        return SpherePotential(self.mesh, t * self.values)


@dataclass
class FunctionalValues:
    F: float
    J: float
    I: float
    mean: float
    lambda1_norm: float


def _dirichlet(phi: SpherePotential) -> float:
    """``int |grad phi|^2`` from the harmonic coefficients."""
    deg = phi.mesh.degrees
    return float(np.sum(deg * (deg + 1) * phi.coefficients**2))


def compute_J(phi: SpherePotential) -> float:
    phi.check()
    return _dirichlet(phi) / (2 * V_SPHERE)


def compute_I(phi: SpherePotential) -> float:
    phi.check()
    m = phi.mesh
    return m.integrate(phi.values * (1.0 - phi.density)) / V_SPHERE


def lambda1_project(phi: SpherePotential) -> SpherePotential:
    """Remove the span of the coordinate functions (the first eigenspace)."""
    m = phi.mesh
    X = m.xyz
    gram = (X * m.weights) @ X.T
    coef = np.linalg.solve(gram, (X * m.weights) @ phi.values)
    return SpherePotential(m, phi.values - coef @ X)


def _lambda1_norm(phi: SpherePotential) -> float:
    comp = phi.values - lambda1_project(phi).values
    return float(np.sqrt(phi.mesh.mean(comp**2)))


def compute_F(phi: SpherePotential) -> FunctionalValues:
    J = compute_J(phi)
    I = compute_I(phi)
    m = phi.mesh
    mean = m.mean(phi.values)
    F = J - mean - m.log_mean_exp(-phi.values)
    return FunctionalValues(F, J, I, mean, _lambda1_norm(phi))


def mt_sphere_check(phi: SpherePotential, rtol: float = 1e-6) -> tuple[float, float, bool]:
    """``(1/4pi) int e^{-phi}`` against ``exp((1/8pi) int |grad phi|^2 - (1/4pi) int phi)``."""
    phi.check()
    m = phi.mesh
    lhs = float(np.exp(m.log_mean_exp(-phi.values)))
    rhs = float(np.exp(_dirichlet(phi) / (8 * np.pi) - m.mean(phi.values)))
    return lhs, rhs, lhs <= rhs * (1 + rtol)


# -- Green function bound ---------------------------------------------------------

def round_green(cos_gamma) -> np.ndarray:
    """Mean-zero Green function of the round sphere, ``-Lap G = V delta - 1``.

    ``G = -log(1 - cos gamma) + log 2 - 1``; its minimum ``-1`` is at antipodes.
    """
    with np.errstate(divide="ignore"):
        return -np.log1p(-np.asarray(cos_gamma)) + np.log(2.0) - 1.0


def perturbed_green_inf(phi: SpherePotential) -> float:
    """Infimum over node pairs of the Green function of ``omega_phi``.

    For ``omega' = rho omega`` with ``rho = 1 + Lap(phi)`` the mean-zero Green
    function normalized against ``omega'`` is
    ``G0(x, y) + phi(x) + phi(y) - mean(phi) - mean'(phi)``.
    """
    m = phi.mesh
    X = m.xyz
    cos_g = np.clip(X.T @ X, -1.0, 1.0)
    np.fill_diagonal(cos_g, -1.0)  # diagonal is +inf; exclude it from the infimum
    G0 = round_green(cos_g)
    pair = G0 + phi.values[:, None] + phi.values[None, :]
    mean = m.mean(phi.values)
    mean_p = m.mean(phi.values * phi.density)
    return float(np.min(pair) - mean - mean_p)


def green_bound_check(phi: SpherePotential, n: int = 1) -> tuple[float, float, float]:
    """``-inf phi <= (1/V) int (-phi) omega' + C`` with ``C = -n inf G'``."""
    phi.check()
    m = phi.mesh
    C = -n * perturbed_green_inf(phi)
    lhs = float(-np.min(phi.values))
    rhs = m.mean(-phi.values * phi.density) + C
    return lhs, rhs, C


# -- Holder chain -----------------------------------------------------------------------

@dataclass
class ChainLink:
    name: str
    log_lhs: float
    log_rhs: float

    @property
    def slack(self) -> float:
        """``log rhs - log lhs``; nonnegative when the link holds."""
        return self.log_rhs - self.log_lhs


@dataclass
class ChainReport:
    links: list
    delta: float
    constant: float
    final: ChainLink

    def holds(self, tol: float = 1e-6) -> bool:
        return all(l.slack >= -tol for l in self.links + [self.final])


def hoelder_chain_check(phi: SpherePotential, split: HoelderSplit) -> ChainReport:
    """Evaluate each step of the Holder argument bounding ``(1/V) int e^{-phi}``.

    All quantities are compared in log form. The potential must be
    sup-normalized (the last step drops ``alpha_2 * mean(phi) <= 0``).
    """
    phi.check()
    if split.n != 1:
        raise ValueError("the sphere arena has n = 1")
    if not phi.normalized:
        raise ValueError("the chain needs a sup-normalized potential")
    m = phi.mesh
    f = phi.values
    logV = np.log(V_SPHERE)
    a1, a2, eps, a = split.alpha1, split.alpha2, split.eps, split.alpha
    p, q, n = split.p, split.q, split.n

    def log_int(c):  # log int e^{-c phi}
        return m.log_mean_exp(-c * f) + logV

    J = compute_J(phi)
    I = compute_I(phi)
    mean = m.mean(f)
    inf = float(np.min(f))
    lhs, rhs, CG = green_bound_check(phi, n)
    r = a2 / (1 - a1)
    log_A = log_int(r)
    links = []
    L = links.append

    base = log_int(a1 + a2) - logV
    L(ChainLink("split-off-eps", log_int(a) - logV, base - eps * inf))
    holder = -logV + log_int(a1 * p) / p + log_int(a2 * q) / q
    L(ChainLink("holder", base, holder))
    rewritten = -logV + a1 * log_int(1.0) + (1 - a1) * log_A
    L(ChainLink("conjugate-exponents", holder, rewritten))
    C4 = (a1 - 1) * logV
    after_mt = C4 + a1 * (J - mean) + (1 - a1) * log_A
    L(ChainLink("moser-trudinger", rewritten, after_mt))
    green = eps * (m.mean(-f * phi.density) + CG)
    L(ChainLink("green-bound", -eps * inf, green))
    L(ChainLink("I-rewrite", green, eps * (I - mean + CG)))
    L(ChainLink("I-le-2J", eps * (I - mean + CG), eps * ((n + 1) * J - mean + CG)))
    log_e1 = m.log_mean_exp(-f)
    L(ChainLink("jensen", log_e1, (log_int(a) - logV) / a))
    combined = (after_mt + eps * ((n + 1) * J - mean + CG)) / a
    L(ChainLink("combine", (log_int(a) - logV) / a, combined))
    drop = ((a1 + (n + 1) * eps) / a) * J - mean + (C4 + eps * CG + (1 - a1) * log_A) / a
    L(ChainLink("drop-mean", combined, drop))

    delta = split.delta
    log_C = (C4 + eps * CG + (1 - a1) * log_A) / a
    final = ChainLink("final", log_e1, log_C + (1 - delta) * J - mean)
    return ChainReport(links, delta, float(np.exp(log_C)), final)


# -- manufactured Ricci identity ---------------------------------------------------------

@dataclass
class RicciSolution:
    """Zonal data: reference density ``rho_r`` and the solution density ``rho_t``."""

    t: float
    x: np.ndarray  # Gauss-Legendre nodes in cos(theta)
    rho_ref: np.ndarray
    rho_t: np.ndarray
    psi: np.ndarray
    lap: np.ndarray = field(repr=False)  # zonal Laplacian matrix on the nodes


@dataclass
class RicciReport:
    t: float
    residual: float
    margin: float
    equality: bool


def _zonal_laplacian(n: int):
    x, w = npleg.leggauss(n)
    l = np.arange(n)
    P = npleg.legvander(x, n - 1)  # P[i, l] = P_l(x_i)
    norm = (2 * l + 1) / 2.0
    analyze = (P * w[:, None]).T * norm[:, None]
    lap = P @ np.diag(-l * (l + 1.0)) @ analyze
    return x, w, lap


def manufactured_ricci_solution(t: float, phi_coeffs=(0.0, 0.0, 0.15), n: int = 64,
                                tol: float = 1e-13, max_iter: int = 50) -> RicciSolution:
    """Solve the continuity equation for a zonal reference metric.

    The reference is ``omega_r = omega + ddbar phi`` for the zonal potential
    ``phi = sum_l c_l P_l(cos theta)``. With ``h_r`` its normalized Ricci
    potential the equation ``rho_r + Lap(psi) = rho_r e^{h_r - t psi}`` is solved by
    Newton's method on Gauss-Legendre nodes, starting from the exact ``t = 1``
    solution ``psi = -phi + const``.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    x, w, lap = _zonal_laplacian(n)
    phi = npleg.legval(x, np.asarray(phi_coeffs, dtype=float))
    rho_r = 1.0 + lap @ phi
    if np.min(rho_r) <= 0:
        raise MetricDomainError("reference density is not positive")
    c = -np.log(0.5 * np.dot(w, np.exp(-phi)))
    h_r = -phi - np.log(rho_r) + c
    psi = -phi + c
    for _ in range(max_iter):
        rhs = rho_r * np.exp(h_r - t * psi)
        F = rho_r + lap @ psi - rhs
        if np.max(np.abs(F)) < tol:
            break
        psi = psi - np.linalg.solve(lap + t * np.diag(rhs), F)
    else:
        raise RuntimeError("Newton iteration for the manufactured solution did not converge")
    rho_t = rho_r + lap @ psi
    return RicciSolution(t, x, rho_r, rho_t, psi, lap)


def ricci_identity_check(t: float, sol: RicciSolution | None = None,
                         equality_tol: float = 1e-8) -> RicciReport:
    """Residual of ``Ric(omega_t) - t omega_t - (1 - t) omega_r`` and the positivity margin.

    ``sol`` defaults to the manufactured zonal solution at ``t``.
    """
    sol = sol or manufactured_ricci_solution(t)
    if sol.t != t:
        raise ValueError("solution was built for a different t")
    ric = 1.0 - sol.lap @ np.log(sol.rho_t)
    residual = ric - t * sol.rho_t - (1 - t) * sol.rho_ref
    margin = float(np.min(ric - t * sol.rho_t))
    return RicciReport(t, float(np.max(np.abs(residual))), margin,
                       bool(np.max(np.abs(ric - t * sol.rho_t)) < equality_tol))


# -- batteries ------------------------------------------------------------------------

def random_battery(mesh: SphereMesh, count: int = 50, max_degree: int = 8,
                   seed: int = 0) -> list[SpherePotential]:
    """Sup-normalized band-limited potentials with ``min rho >= 0.1``.

    Coefficients are Gaussian with variance ``1 / (l (l + 1))``; each draw is
    scaled so that ``max |Lap phi|`` is uniform in ``[0.1, 0.9]``.
    """
    rng = np.random.default_rng(seed)
    nh = (max_degree + 1) ** 2
    deg = mesh.degrees[:nh]
    out = []
    for _ in range(count):
        c = np.zeros(nh)
        c[1:] = rng.standard_normal(nh - 1) / np.sqrt(deg[1:] * (deg[1:] + 1))
        phi = SpherePotential.from_coefficients(mesh, c)
        scale = rng.uniform(0.1, 0.9) / np.max(np.abs(phi.density - 1.0))
        out.append(phi.scaled(scale).sup_normalized().check())
    return out

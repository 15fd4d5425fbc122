"""Bergman densities, the leading Tian-Yau-Zelditch coefficient, and the monomial ratio bound.

Two models share the code path (Gram matrix, orthonormalization, pointwise
density):

* the surface M with ``L^N = -N K_M`` and the metric g0, and
* the control case CP^1 with ``O(m)`` and the Fubini-Study metric, whose
  monomial norms are Beta functions, ``||z^k||^2 = k! (m-k)! / (m+1)!``.

Densities are normalized so that ``int density dV = dim H^0``; with the volume
convention of :mod:`blowup_alpha.geometry` the leading coefficient is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .geometry import Chart, ChartPoint, complex_hessian_det, potential_u0, to_homogeneous
from .quadrature import RadialQuadrature, integrate_until_converged
from .sections import (
    GramMatrix,
    OrthonormalBasis,
    basis_dimension,
    enumerate_basis,
    gram_matrix,
    orthonormalize,
    section_values,
)

__all__ = [
    "DensityProfile",
    "LeadingFit",
    "MetricDomainError",
    "bergman_density",
    "bergman_ratio_bound",
    "line_basis",
    "line_beta_norms",
    "log_section_approx",
    "random_chart_grid",
    "surface_basis",
    "tyz_leading_check",
]


class MetricDomainError(ValueError):
    """``omega + ddbar phi`` failed the sampled positivity check."""


# -- CP^1 control case --------------------------------------------------------

def line_beta_norms(m: int) -> np.ndarray:
    """Exact ``||z^k||^2_{h_m}`` on CP^1 for normalized FS volume, ``k = 0..m``."""
    k = np.arange(m + 1)
    return np.exp(gammaln(k + 1) + gammaln(m - k + 1) - gammaln(m + 2))


def line_gram(m: int, quad: RadialQuadrature | None = None, log_weight=None) -> GramMatrix:
    """Gram matrix of ``z^k`` on CP^1, ``dV = dt / (1 + t)^2`` with ``t = |z|^2``."""
    quad = quad or RadialQuadrature(dim=1)
    k = np.arange(m + 1, dtype=float)

    def fn(q):
        (t,), w = q.nodes()
        vals = xlogy(k[:, None], t[None, :]) - (m + 2) * np.log1p(t)[None, :]
        if log_weight is not None:
            vals = vals + log_weight(t)[None, :]
        return np.exp(vals) @ w

    moments, quad = integrate_until_converged(fn, quad)
    return GramMatrix(m, list(range(m + 1)), np.diag(moments).astype(complex), quad)


def _line_values(m: int, labels, z: complex) -> np.ndarray:
    k = np.asarray(labels)
    return z ** k * (1.0 + abs(z) ** 2) ** (-m / 2)


def line_basis(m: int, quad: RadialQuadrature | None = None, log_weight=None) -> OrthonormalBasis:
    return orthonormalize(line_gram(m, quad, log_weight))


def surface_basis(N: int, quad: RadialQuadrature | None = None, log_weight=None) -> OrthonormalBasis:
    return orthonormalize(gram_matrix(N, quad, log_weight=log_weight))


def bergman_density(basis: OrthonormalBasis, p) -> float:
    """``sum_i ||S_i(p)||^2`` for an orthonormal basis.

    ``p`` is a :class:`ChartPoint` for the surface or a complex number for the
    CP^1 control case.
    """
    if isinstance(p, ChartPoint):
        v = section_values(basis.labels, p)
    else:
        v = _line_values(basis.N, basis.labels, complex(p))
    return float(np.sum(np.abs(v @ basis.coeffs) ** 2))


# -- leading coefficient --------------------------------------------------------

@dataclass
class LeadingFit:
    levels: list
    ratios: np.ndarray  # density / m^n, shape (points, levels)
    a0_est: np.ndarray  # per point
    slope_est: np.ndarray  # per point, coefficient of 1/m

    @property
    def a0(self) -> float:
        return float(np.mean(self.a0_est))


@dataclass
class DensityProfile:
    N: int
    samples: list
    leadingFit: LeadingFit | None = None


def tyz_leading_check(levels, points, model: str = "surface", quad=None) -> LeadingFit:
    """Fit ``density / m^n - 1 = c0 + c1 / m`` at each point over ``levels``.

    Returns ``a0_est = 1 + c0`` and ``slope_est = c1`` per point.
    """
    levels = sorted(int(m) for m in levels)
    if len(levels) < 2:
        raise ValueError("need at least two levels to fit the leading coefficient")
    n = 2 if model == "surface" else 1
    ratios = np.empty((len(points), len(levels)))
    for j, m in enumerate(levels):
        basis = surface_basis(m, quad) if model == "surface" else line_basis(m, quad)
        for i, p in enumerate(points):
            ratios[i, j] = bergman_density(basis, p) / m**n
    inv = 1.0 / np.array(levels, dtype=float)
    A = np.stack([np.ones_like(inv), inv], axis=1)
    coef, *_ = np.linalg.lstsq(A, (ratios - 1.0).T, rcond=None)
    return LeadingFit(levels, ratios, 1.0 + coef[0], coef[1])


def density_profile(N: int, points, quad=None) -> DensityProfile:
    basis = surface_basis(N, quad)
    return DensityProfile(N, [(p, bergman_density(basis, p)) for p in points])


# -- approximation by logarithms of sections ------------------------------------

def _check_psh(phi, points, model: str, h: float = 1e-4):
    """Sampled positivity of ``omega + ddbar phi`` via finite-difference Hessians."""
    for p in points:
        if model == "surface":
            def f(a, b):
                return potential_u0(ChartPoint(Chart.U0, a, b)) + float(phi(abs(a) ** 2, abs(b) ** 2))
            c1, c2 = (p.c1, p.c2)
            trace_probe = complex_hessian_det(f, c1, c2, h)
            ok = trace_probe > 0 and _hess_trace(f, c1, c2, h) > 0
        else:
            z = complex(p)

            def g(x, y):
                t = x * x + y * y
                return np.log1p(t) + float(phi(t))

            lap = (g(z.real + h, z.imag) + g(z.real - h, z.imag) + g(z.real, z.imag + h)
                   + g(z.real, z.imag - h) - 4 * g(z.real, z.imag)) / (h * h)
            ok = lap > 0
        if not ok:
            raise MetricDomainError(f"omega + ddbar phi is not positive at {p}")


def _hess_trace(f, c1, c2, h):
    total = 0.0
    for a in range(2):
        e = np.zeros(2, dtype=complex)
        e[a] = 1
        w = np.array([c1, c2])
        for u in (e, 1j * e):
            total += (f(*(w + h * u)) + f(*(w - h * u)) - 2 * f(*w)) / (h * h)
    return total


def log_section_approx(phi, N: int, model: str = "surface", points=None, quad=None):
    """``x -> (1/N) log sum ||S~_i(x)||^2_{h_N}`` with ``S~`` orthonormal for ``e^{-N phi} dV``.

    ``phi`` is a torus-invariant potential given as a vectorized function of
    squared moduli: ``phi(t1, t2)`` for the surface, ``phi(t)`` for CP^1. When
    ``points`` are supplied they are used for the positivity check.
    """
    if points is not None:
        _check_psh(phi, points, model)
    if model == "surface":
        basis = surface_basis(N, quad, log_weight=lambda t1, t2: -N * phi(t1, t2))
    else:
        basis = line_basis(N, quad, log_weight=lambda t: -N * phi(t))

    def approx(p) -> float:
        return float(np.log(bergman_density(basis, p)) / N)

    return approx


def approximation_error(phi, N: int, points, model: str = "surface", quad=None) -> float:
    """Sup over ``points`` of ``|phi - (1/N) log density~_N|``."""
    approx = log_section_approx(phi, N, model, points, quad)
    errs = []
    for p in points:
        if model == "surface":
            val = float(phi(abs(p.c1) ** 2, abs(p.c2) ** 2))
        else:
            val = float(phi(abs(complex(p)) ** 2))
        errs.append(abs(approx(p) - val))
    return max(errs)


# -- uniform bound on the monomial Bergman ratio -------------------------------

def random_chart_grid(chart: Chart, n_points: int, rng: np.random.Generator,
                      log10_range=(-3.0, 3.0)) -> np.ndarray:
    """Homogeneous coordinates ``(3, n)`` of random points of one chart.

    Moduli are log-uniform over ``log10_range`` and phases uniform.
    """
    r = 10.0 ** rng.uniform(*log10_range, size=(2, n_points))
    ph = np.exp(2j * np.pi * rng.uniform(size=(2, n_points)))
    c = r * ph
    one = np.ones(n_points, dtype=complex)
    chart = Chart(chart)
    if chart is Chart.U0:
        return np.stack([one, c[0], c[1]])
    if chart is Chart.U2:
        return np.stack([c[0], c[1], one])
    return np.stack([c[0], one, c[1]])


def bergman_ratio_sum(n: int, Z: np.ndarray) -> np.ndarray:
    """``(1/n) log sum_tuples |Z^e|^2 / D^n`` at homogeneous points ``Z`` of shape ``(3, K)``."""
    counts: dict[tuple, int] = {}
    for e in enumerate_basis(n):
        counts[e.multidegree] = counts.get(e.multidegree, 0) + 1
    degs = np.array(list(counts), dtype=float)
    logmult = np.log(np.array(list(counts.values()), dtype=float))
    a = np.abs(Z) ** 2
    logD = np.log(a.sum(axis=0)) + np.log(a[0] + a[1]) + np.log(a[0] + a[2])
    terms = (logmult[:, None] + xlogy(degs[:, :, None], a[None, :, :]).sum(axis=1)
             - n * logD[None, :])
    return np.logaddexp.reduce(terms, axis=0) / n


def bergman_ratio_bound(n: int, grid) -> tuple[float, float]:
    """Largest value of the monomial Bergman ratio on ``grid`` and the analytic bound.

    ``grid`` is an iterable of homogeneous-coordinate arrays (one per chart) or
    of :class:`ChartPoint`. The bound is ``(1/n) log((n+1)^3 (n+2) / 2)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bound = float(np.log(basis_dimension(n)) / n)
    sup = -np.inf
    for block in grid:
        if isinstance(block, ChartPoint):
            block = np.array(to_homogeneous(block), dtype=complex)[:, None]
        sup = max(sup, float(np.max(bergman_ratio_sum(n, np.asarray(block)))))
    return sup, bound

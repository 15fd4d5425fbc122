"""Integrability thresholds: the phi_eps family, alpha-scans and the exponent case analysis.

Singular integrals are written in the log-moduli plane ``s_i = log |z_i|^2`` of
chart U0, split along the toric fan of M so that every divisor at infinity
(the exceptional curves and the line Z0 = 0) is a ray. A divergence of
``int e^{-alpha phi} dV`` shows up as an integrand that grows exponentially
along some ray and is detected by growing the depth of the nested grids.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import xlogy

from .geometry import FAN_CONES, ChartPoint, log_det_g0, to_homogeneous
from .quadrature import FanGrid
from .sections import MonomialSection, enumerate_basis, section_norm

__all__ = [
    "AlphaScanResult",
    "HoelderSplit",
    "InvalidSplitError",
    "LimitPotential",
    "MonomialModel",
    "PhiEps",
    "PhiEpsTable",
    "Verdict",
    "alpha_bracket",
    "alpha_scan",
    "case_analysis",
    "case_table",
    "invariant_potential_floor",
    "lct_oracle",
    "lower_bound_witness",
    "phi_eps_divergence",
]

GROWTH_RATIO = 1.5
CONVERGED_INCREMENT = 1e-3
#: First scan depth and additive step in log-modulus. Starting at 80 keeps the
#: per-step ratio of a quadratically growing (threshold-borderline) estimate
#: below GROWTH_RATIO; a step of 16 makes an exponential rate 0.025 visible.
SCAN_START = 80.0
SCAN_STEP = 16.0
BASE_DEPTH = 8.0


class Verdict(str, enum.Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


class InvalidSplitError(ValueError):
    pass


def _log_D(s1, s2):
    """``log((1+t1+t2)(1+t1)(1+t2))`` in log-moduli."""
    return (np.logaddexp(0.0, np.logaddexp(s1, s2)) + np.logaddexp(0.0, s1)
            + np.logaddexp(0.0, s2))


def _log_dV(s1, s2):
    # det g0 dt1 dt2 with dt = e^s ds
    return log_det_g0(s1, s2) + s1 + s2


# -- integrands ------------------------------------------------------------------

@dataclass(frozen=True)
class PhiEps:
    """``phi_eps = log(|Z0|^6 / D + eps) - log(1 + eps)``; ``eps = 0`` is the singular limit."""

    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    def log_ratio(self, p: ChartPoint) -> float:
        """``log(|Z0|^6 / D)``, ``-inf`` where Z0 vanishes."""
        Z = [abs(z) ** 2 for z in to_homogeneous(p)]
        if Z[0] == 0:
            return -np.inf
        logD = np.log(Z[0] + Z[1] + Z[2]) + np.log(Z[0] + Z[1]) + np.log(Z[0] + Z[2])
        return float(3 * np.log(Z[0]) - logD)

    def value(self, p: ChartPoint) -> float:
        lr = self.log_ratio(p)
        if self.eps == 0:
            return lr
        return float(np.logaddexp(lr, np.log(self.eps)) - np.log1p(self.eps))

    def __call__(self, p: ChartPoint) -> float:
        return self.value(p)

    def log_phi_u0(self, s1, s2):
        """``phi_eps`` on U0 in log-moduli (vectorized)."""
        lr = -_log_D(s1, s2)
        if self.eps == 0:
            return lr
        return np.logaddexp(lr, np.log(self.eps)) - np.log1p(self.eps)

    cones = FAN_CONES

    def log_integrand(self, s1, s2, alpha: float):
        """``log(e^{-alpha phi} dV)`` per unit ``ds1 ds2``."""
        return -alpha * self.log_phi_u0(s1, s2) + _log_dV(s1, s2)


def LimitPotential() -> PhiEps:
    """The ``eps -> 0`` limit ``log(|Z0|^6 / D)``, singular along Z0 = 0."""
    return PhiEps(0.0)


@dataclass(frozen=True)
class MonomialModel:
    """``phi = log(|z1|^{2a} |z2|^{2b})`` on the unit polydisc with ``dV = dA1 dA2 / pi^2``."""

    a: float
    b: float
    cones = (((-1, 0), (0, -1)),)

    def log_integrand(self, s1, s2, alpha: float):
        return (1.0 - self.a * alpha) * s1 + (1.0 - self.b * alpha) * s2

    def exact(self, alpha: float) -> float:
        """Closed form ``1 / ((1 - a alpha)(1 - b alpha))``, ``inf`` past the threshold."""
        ca, cb = 1.0 - self.a * alpha, 1.0 - self.b * alpha
        return 1.0 / (ca * cb) if ca > 0 and cb > 0 else np.inf


@dataclass(frozen=True)
class _Swapped:
    inner: object

    @property
    def cones(self):
        return tuple((v1[::-1], v2[::-1]) for v1, v2 in self.inner.cones)

    def log_integrand(self, s1, s2, alpha):
        return self.inner.log_integrand(s2, s1, alpha)


def swapped(model):
    """The integrand precomposed with the coordinate swap (tau on U0)."""
    return _Swapped(model)


def lct_oracle(exponents) -> Fraction:
    """Exact threshold ``min_i 1 / a_i`` of ``e^{-alpha log prod |z_i|^{2 a_i}}``."""
    exps = [Fraction(a) for a in exponents]
    if not exps or any(a <= 0 for a in exps):
        raise ValueError("exponents must be positive")
    return min(1 / a for a in exps)


# -- alpha scan --------------------------------------------------------------------

@dataclass
class AlphaScanResult:
    alpha: float
    ladder: list  # (level, depth, estimate)
    verdict: Verdict
    bracket: tuple | None = None

    @property
    def estimates(self) -> np.ndarray:
        return np.array([est for _, _, est in self.ladder])


def classify(log_estimates) -> Verdict:
    """Verdict from the last four nested estimates, given as logs.

    Divergent when each of the last three refinements grows the estimate by at
    least ``GROWTH_RATIO``; Convergent when each relative increment is below
    ``CONVERGED_INCREMENT``.
    """
    le = np.asarray(log_estimates, dtype=float)
    if le.size < 4:
        return Verdict.INCONCLUSIVE
    steps = np.diff(le[-4:])
    if np.all(steps >= np.log(GROWTH_RATIO)):
        return Verdict.DIVERGENT
    if np.all(-np.expm1(-steps) < CONVERGED_INCREMENT):
        return Verdict.CONVERGENT
    return Verdict.INCONCLUSIVE


def alpha_scan(model, alpha: float, ladder_depth: int = 60, order: int = 24) -> AlphaScanResult:
    """Estimate ``int e^{-alpha phi} dV`` on nested grids of depth ``80 + 16 * level``.

    ``model`` supplies ``cones`` and ``log_integrand(s1, s2, alpha)``. The scan
    stops as soon as a verdict is reached; after ``ladder_depth`` levels without
    one the result is Inconclusive. Estimates beyond the float range are
    reported as ``inf`` but classified from their logs.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    grid = FanGrid(tuple(model.cones), order, SCAN_STEP)
    logs, ladder = [], []
    log_total, prev_depth = -np.inf, None
    verdict = Verdict.INCONCLUSIVE
    for level in range(ladder_depth):
        depth = SCAN_START + SCAN_STEP * level
        new = grid.log_integral(lambda a, b: model.log_integrand(a, b, alpha), depth, prev_depth)
        log_total = np.logaddexp(log_total, new)
        prev_depth = depth
        logs.append(float(log_total))
        with np.errstate(over="ignore"):
            ladder.append((level, depth, float(np.exp(log_total))))
        verdict = classify(logs)
        if verdict is not Verdict.INCONCLUSIVE:
            break
    return AlphaScanResult(alpha, ladder, verdict)


def alpha_bracket(model, lo: float = 0.05, hi: float = 4.0, width: float = 0.01,
                  ladder_depth: int = 60) -> tuple[float, float, list]:
    """Bracket the integrability threshold of ``model`` by two bisections.

    One bisection moves the largest alpha known to be Convergent up, the other
    moves the smallest alpha known to be Divergent down; between them lies the
    Inconclusive band around the threshold. Each stops at resolution
    ``width``. Requires ``lo`` Convergent and ``hi`` Divergent. Returns
    ``(lo, hi, scans)``.
    """
    scans = [alpha_scan(model, lo, ladder_depth), alpha_scan(model, hi, ladder_depth)]
    if scans[0].verdict is not Verdict.CONVERGENT or scans[1].verdict is not Verdict.DIVERGENT:
        raise ValueError(f"initial bracket [{lo}, {hi}] does not straddle the threshold")

    def bisect(good, bad, target):
        # invariant: verdict(good) is target, verdict(bad) is not
        while abs(bad - good) > width:
            mid = 0.5 * (good + bad)
            res = alpha_scan(model, mid, ladder_depth)
            scans.append(res)
            if res.verdict is target:
                good = mid
            else:
                bad = mid
        return good

    lo_c = bisect(lo, hi, Verdict.CONVERGENT)
    hi_d = bisect(hi, lo_c, Verdict.DIVERGENT)
    for s in scans:
        s.bracket = (lo_c, hi_d)
    return lo_c, hi_d, scans


# -- phi_eps family ------------------------------------------------------------------

@dataclass
class PhiEpsTable:
    alphas: list
    eps_ladder: list
    values: np.ndarray  # (alphas, eps)

    def ratios(self) -> np.ndarray:
        return self.values[:, 1:] / self.values[:, :-1]

    def rel_last_change(self) -> np.ndarray:
        return np.abs(self.values[:, -1] - self.values[:, -2]) / self.values[:, -1]


def phi_eps_integral(eps: float, alpha: float, rtol: float = 1e-12, order: int = 24,
                     max_levels: int = 12) -> float:
    """``int_M e^{-alpha phi_eps} dV``, grown in depth until the increment is below ``rtol``."""
    model = PhiEps(eps)
    grid = FanGrid(FAN_CONES, order)
    log_total, prev = -np.inf, None
    for level in range(max_levels):
        depth = BASE_DEPTH * 2**level
        new = grid.log_integral(lambda a, b: model.log_integrand(a, b, alpha), depth, prev)
        old = log_total
        log_total = np.logaddexp(log_total, new)
        prev = depth
        if np.isfinite(old) and log_total - old < rtol:
            break
    return float(np.exp(log_total))


def phi_eps_divergence(alphas, eps_ladder) -> PhiEpsTable:
    """Table of ``int e^{-alpha phi_eps} dV`` over ``alphas`` x ``eps_ladder``."""
    eps_ladder = [float(e) for e in eps_ladder]
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])) or min(eps_ladder) <= 0:
        raise ValueError("eps ladder must be positive and strictly decreasing")
    vals = np.array([[phi_eps_integral(e, a) for e in eps_ladder] for a in alphas])
    return PhiEpsTable(list(alphas), eps_ladder, vals)


def phi_eps_grid_max(eps: float, points) -> float:
    model = PhiEps(eps)
    return max(model.value(p) for p in points)


# -- exponent case analysis -------------------------------------------------------------

F = Fraction

#: Candidate alpha bounds as fractional-linear maps ``(a + b p) / (c + d p)``.
#: Case 2 uses ``q = 1 - p``, so ``(1 - q) / (3/2 - q) = p / (1/2 + p)``.
_CASE_MAPS = {
    1: ((F(1), F(-1), F(3), F(-1)), (F(2), F(0), F(3), F(0)), (F(1), F(0), F(1), F(0))),
    2: ((F(1), F(0), F(1), F(0)), (F(2), F(0), F(3), F(0)), (F(0), F(1), F(1, 2), F(1))),
}


def _case_bounds(case: int, p: Fraction):
    return [(a + b * p) / (c + d * p) for a, b, c, d in _CASE_MAPS[case]]


def case_analysis(m_over_N, p) -> Fraction:
    """Largest admissible ``alpha`` from the three sufficient conditions at ``(m/N, p)``.

    Case 1 is ``1 <= m/N <= 3``, case 2 is ``0 < m/N < 1``; the Holder pair is
    ``q = 1 - p``. ``p`` may be a closure endpoint (0 or 1) to take limits.
    """
    r = Fraction(m_over_N)
    p = Fraction(p)
    if not 0 < r <= 3:
        raise ValueError("m/N must lie in (0, 3]")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return min(_case_bounds(1 if r >= 1 else 2, p))


@dataclass
class CaseRow:
    case: int
    m_over_N: Fraction
    argsup_p: Fraction
    sup_bound: Fraction


def case_table(samples=(Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3))) -> tuple[list, Fraction]:
    """Supremum over ``p in (0, 1)`` of the admissible bound for each sampled ``m/N``.

    Every candidate bound is a monotone fractional-linear function of ``p``, so
    the supremum of their minimum sits at an endpoint of ``[0, 1]`` or at a
    crossing of two candidates; all of those are checked in exact arithmetic.
    Returns the rows and the overall minimum across rows.
    """
    rows = []
    for r in samples:
        r = Fraction(r)
        cands = {Fraction(0), Fraction(1)} | _crossings(1 if r >= 1 else 2)
        best = max(cands, key=lambda p: case_analysis(r, p))
        rows.append(CaseRow(1 if r >= 1 else 2, r, best, case_analysis(r, best)))
    return rows, min(row.sup_bound for row in rows)


def _crossings(case: int) -> set:
    maps = _CASE_MAPS[case]
    out = set()
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            out |= _mobius_equal(maps[i], maps[j])
    return {p for p in out if 0 < p < 1}


def _mobius_equal(m1, m2) -> set:
    a1, b1, c1, d1 = m1
    a2, b2, c2, d2 = m2
    # (a1 + b1 p)(c2 + d2 p) = (a2 + b2 p)(c1 + d1 p)
    A = b1 * d2 - b2 * d1
    B = a1 * d2 + b1 * c2 - a2 * d1 - b2 * c1
    C = a1 * c2 - a2 * c1
    if A == 0:
        return set() if B == 0 else {-C / B}
    disc = B * B - 4 * A * C
    if disc < 0:
        return set()
    root = _fraction_sqrt(disc)
    if root is None:
        return set()
    return {(-B + root) / (2 * A), (-B - root) / (2 * A)}


def _fraction_sqrt(x: Fraction):
    import math
    n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
    return Fraction(n, d) if n * n == x.numerator and d * d == x.denominator else None


# -- lower-bound witness and potentials from coefficient tables ---------------------

def lower_bound_witness(N: int, m: int, point: ChartPoint) -> float:
    """``(1/N) log(|Z0^m Z1^k Z2^k|^2 / D^N)`` with ``k = (3N - m) / 2``.

    This is the one-term lower bound for a Bergman-type potential, up to the
    additive constant coming from the coefficient of the witnessing monomial.
    """
    if not 0 <= m <= 3 * N:
        raise ValueError("m must lie in [0, 3N]")
    if (3 * N - m) % 2:
        raise ValueError("3N - m must be even for the symmetric witness")
    k = (3 * N - m) // 2
    a = [abs(z) ** 2 for z in to_homogeneous(point)]
    num = xlogy(m, a[0]) + xlogy(k, a[1]) + xlogy(k, a[2])
    logD = np.log(a[0] + a[1] + a[2]) + np.log(a[0] + a[1]) + np.log(a[0] + a[2])
    return float((num - N * logD) / N)


def witness_tuple(N: int, m: int):
    """A basis tuple realizing the witness multidegree ``(m, k, k)``, or ``None``."""
    k = (3 * N - m) // 2
    for e in enumerate_basis(N):
        if e.multidegree == (m, k, k):
            return e
    return None


def witness_via_section(N: int, m: int, point: ChartPoint) -> float:
    """Same witness evaluated as ``(1/N) log ||s||^2_{h_N}`` of a realizing monomial."""
    e = witness_tuple(N, m)
    if e is None:
        raise ValueError(f"multidegree ({m}, k, k) is not realized at level {N}")
    return float(np.log(section_norm(MonomialSection(e), point)) / N)


@dataclass
class CoefficientPotential:
    """``(1/N) log sum_I |a_I|^2 ||s_I||^2_{h_N}`` for an explicit coefficient table."""

    N: int
    coeffs: dict = field(default_factory=dict)

    @classmethod
    def random_invariant(cls, N: int, rng: np.random.Generator, low=0.5, high=1.5):
        """Random positive coefficients with ``a_I = a_{tau(I)}``."""
        table = {}
        for e in enumerate_basis(N):
            if e not in table:
                v = float(rng.uniform(low, high))
                table[e] = v
                table[e.tau()] = v
        return cls(N, table)

    def __call__(self, p: ChartPoint) -> float:
        with np.errstate(divide="ignore"):
            terms = [np.log(abs(a) ** 2 * section_norm(MonomialSection(e), p))
                     for e, a in self.coeffs.items() if a != 0]
        return float(np.logaddexp.reduce(terms) / self.N)

    def witness_constant(self, m: int) -> float:
        """``(1/N) log |a_J|^2`` for the witnessing tuple ``J`` at exponent ``m``."""
        e = witness_tuple(self.N, m)
        return float(np.log(abs(self.coeffs[e]) ** 2) / self.N)


def invariant_potential_floor(levels, points, rng: np.random.Generator) -> dict:
    """Grid minimum of a random tau-invariant coefficient potential for each level."""
    out = {}
    for N in levels:
        phi = CoefficientPotential.random_invariant(N, rng)
        out[N] = min(phi(p) for p in points)
    return out


# -- Holder split -----------------------------------------------------------------------

@dataclass(frozen=True)
class HoelderSplit:
    """``alpha_2 = n eps + eps'``, ``alpha_1 = 1 - (n+1) eps - eps' + eps''``, conjugate ``p, q``."""

    eps: float
    epsP: float
    epsPP: float
    n: int = 1

    def __post_init__(self):
        if not (0 < self.epsPP < self.epsP < self.eps):
            raise InvalidSplitError("need 0 < eps'' < eps' < eps")
        if not 0 < self.alpha1 < 1:
            raise InvalidSplitError("alpha_1 must lie in (0, 1)")

    @property
    def alpha1(self) -> float:
        return 1.0 - (self.n + 1) * self.eps - self.epsP + self.epsPP

    @property
    def alpha2(self) -> float:
        return self.n * self.eps + self.epsP

    @property
    def alpha(self) -> float:
        """``alpha_1 + alpha_2 + eps``."""
        return self.alpha1 + self.alpha2 + self.eps

    @property
    def p(self) -> float:
        return 1.0 / self.alpha1

    @property
    def q(self) -> float:
        return 1.0 / (1.0 - self.alpha1)

    @property
    def delta(self) -> float:
        """Energy exponent loss ``eps' / (1 + eps'')`` implied by the split."""
        return self.epsP / (1.0 + self.epsPP)

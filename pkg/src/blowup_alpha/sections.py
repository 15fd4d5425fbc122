"""Monomial sections of ``L^N``, their Hermitian norms, and Gram matrices on M.

A monomial ``Z^i X^j Y^k`` restricts to M as ``Z0^e0 Z1^e1 Z2^e2`` with
``e0 = i0 + j0 + k0``, ``e1 = i1 + j1``, ``e2 = i2 + k2``. Distinct exponent
tuples with the same multidegree ``(e0, e1, e2)`` therefore restrict to the same
section, and the Gram matrix on M has rank-one blocks. Sections of different
multidegree are orthogonal because the phase integrals vanish.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .geometry import Chart, ChartPoint, det_g0, to_homogeneous
from .quadrature import RadialQuadrature, integrate_until_converged

__all__ = [
    "ExponentTuple",
    "GramMatrix",
    "MonomialSection",
    "OrthonormalBasis",
    "SectionCombination",
    "basis_dimension",
    "enumerate_basis",
    "gram_matrix",
    "inner_product",
    "inner_product_phase_quadrature",
    "log_norm_sq",
    "multidegrees",
    "orthonormalize",
    "radial_moments",
    "section_norm",
    "section_values",
]


@dataclass(frozen=True, order=True)
class ExponentTuple:
    N: int
    i0: int
    i1: int
    i2: int
    j0: int
    j1: int
    k0: int
    k2: int

    def __post_init__(self):
        vals = (self.i0, self.i1, self.i2, self.j0, self.j1, self.k0, self.k2)
        if self.N < 1 or min(vals) < 0:
            raise ValueError(f"invalid exponent tuple {self}")
        if (self.i0 + self.i1 + self.i2 != self.N or self.j0 + self.j1 != self.N
                or self.k0 + self.k2 != self.N):
            raise ValueError(f"exponents of {self} do not sum to N={self.N}")

    @property
    def exponents(self) -> tuple[int, ...]:
        return (self.i0, self.i1, self.i2, self.j0, self.j1, self.k0, self.k2)

    @property
    def e0(self) -> int:
        return self.i0 + self.j0 + self.k0

    @property
    def e1(self) -> int:
        return self.i1 + self.j1

    @property
    def e2(self) -> int:
        return self.i2 + self.k2

    @property
    def multidegree(self) -> tuple[int, int, int]:
        return (self.e0, self.e1, self.e2)

    def tau(self) -> "ExponentTuple":
        """Image under Z1 <-> Z2, X <-> Y."""
        return ExponentTuple(self.N, self.i0, self.i2, self.i1, self.k0, self.k2, self.j0, self.j1)

    def label(self) -> str:
        return "".join(str(v) for v in self.exponents) if self.N < 10 else \
            "-".join(str(v) for v in self.exponents)


@dataclass(frozen=True)
class MonomialSection:
    exps: ExponentTuple
    coeff: complex = 1.0

    @property
    def N(self) -> int:
        return self.exps.N


def basis_dimension(N: int) -> int:
    """``(N+1)^3 (N+2) / 2``, the dimension of sections on the ambient product."""
    return (N + 1) ** 3 * (N + 2) // 2


def enumerate_basis(N: int) -> list[ExponentTuple]:
    """All monomial exponent tuples at level ``N``, lexicographically sorted."""
    if N < 1:
        raise ValueError("N must be >= 1")
    out = []
    for i0 in range(N + 1):
        for i1 in range(N - i0 + 1):
            i2 = N - i0 - i1
            for j0 in range(N + 1):
                for k0 in range(N + 1):
                    out.append(ExponentTuple(N, i0, i1, i2, j0, N - j0, k0, N - k0))
    out.sort()
    return out


def multidegrees(N: int) -> list[tuple[int, int, int]]:
    """Distinct multidegrees ``(e0, e1, e2)`` realized at level ``N``, sorted."""
    return sorted({e.multidegree for e in enumerate_basis(N)})


def _log_denominator(Z0, Z1, Z2):
    a0, a1, a2 = abs(Z0) ** 2, abs(Z1) ** 2, abs(Z2) ** 2
    return np.log(a0 + a1 + a2) + np.log(a0 + a1) + np.log(a0 + a2)


def log_norm_sq(exps: ExponentTuple | tuple, N: int, p: ChartPoint) -> float:
    """``log ||Z0^e0 Z1^e1 Z2^e2||^2_{h_N}`` at ``p`` (may be ``-inf``)."""
    e0, e1, e2 = exps.multidegree if isinstance(exps, ExponentTuple) else exps
    Z0, Z1, Z2 = to_homogeneous(p)
    num = xlogy(e0, abs(Z0) ** 2) + xlogy(e1, abs(Z1) ** 2) + xlogy(e2, abs(Z2) ** 2)
    return float(num - N * _log_denominator(Z0, Z1, Z2))


def section_norm(s: MonomialSection, p: ChartPoint) -> float:
    """Pointwise ``||s||^2_{h_N}``, computed from homogeneous coordinates (chart-free)."""
    if s.coeff == 0:
        return 0.0
    return float(abs(s.coeff) ** 2 * np.exp(log_norm_sq(s.exps, s.N, p)))


def section_values(labels, p: ChartPoint) -> np.ndarray:
    """Values ``s_I(p) h_N^{1/2}`` for each tuple in ``labels``.

    The common phase depends on the homogeneous representative only through a
    factor shared by every entry, so ``|sum c_I s_I|^2`` is well defined.
    """
    Z = np.array(to_homogeneous(p))
    N = labels[0].N
    half_log_den = 0.5 * N * _log_denominator(*Z)
    out = np.empty(len(labels), dtype=complex)
    for n, e in enumerate(labels):
        out[n] = np.prod(Z ** np.array(e.multidegree)) * np.exp(-half_log_den)
    return out


def _radial_log_integrand(N, degs, t1, t2):
    """``log( t1^e1 t2^e2 / D^N * det g0 )`` on the U0 radial grid, per multidegree."""
    logD = np.log1p(t1 + t2) + np.log1p(t1) + np.log1p(t2)
    base = -N * logD + np.log(det_g0(t1, t2))
    e1 = np.array([d[1] for d in degs], dtype=float)[:, None]
    e2 = np.array([d[2] for d in degs], dtype=float)[:, None]
    return xlogy(e1, t1[None, :]) + xlogy(e2, t2[None, :]) + base[None, :]


def radial_moments(N: int, degs, quad: RadialQuadrature, log_weight=None) -> np.ndarray:
    """``int t1^e1 t2^e2 D^{-N} det g0 [exp(log_weight)] dt1 dt2`` for each multidegree.

    After integrating out the phases this is the squared ``L^2`` norm of the
    restricted monomial with respect to ``dV``. ``log_weight(t1, t2)`` adds an
    optional weight (used for ``exp(-N phi)``).
    """
    (t1, t2), w = quad.nodes()
    vals = _radial_log_integrand(N, degs, t1, t2)
    if log_weight is not None:
        vals = vals + log_weight(t1, t2)[None, :]
    return np.exp(vals) @ w


def inner_product(s: MonomialSection, t: MonomialSection, quad: RadialQuadrature | None = None,
                  converge: bool = True) -> complex:
    """``(s, t) = int_M h_N(s, t) dV`` with the phase integrals done exactly.

    Raises :class:`~blowup_alpha.quadrature.AccuracyError` if refinement does not
    settle to a relative change of ``1e-6``.
    """
    if s.N != t.N:
        raise ValueError("sections live at different levels")
    if s.exps.multidegree != t.exps.multidegree:
        return 0j
    quad = quad or RadialQuadrature()
    degs = [s.exps.multidegree]

    def fn(q):
        return radial_moments(s.N, degs, q)

    if converge:
        val, _ = integrate_until_converged(fn, quad)
    else:
        val = fn(quad)
    return complex(s.coeff * np.conj(t.coeff) * val[0])


def inner_product_phase_quadrature(s: MonomialSection, t: MonomialSection,
                                   quad: RadialQuadrature | None = None,
                                   n_phase: int | None = None) -> complex:
    """The same inner product via a full tensor rule in radius and both phases.

    Cross-check for the exact phase factorization; the trapezoid rule in each
    phase is exact for the trigonometric polynomials that appear when
    ``n_phase`` exceeds twice the largest exponent.
    """
    quad = quad or RadialQuadrature()
    N = s.N
    n_phase = n_phase or (6 * N + 1)
    (t1, t2), w = quad.nodes()
    theta = 2 * np.pi * np.arange(n_phase) / n_phase
    ph = np.exp(1j * theta)
    r1, r2 = np.sqrt(t1), np.sqrt(t2)
    logD = np.log1p(t1 + t2) + np.log1p(t1) + np.log1p(t2)
    base = np.exp(-N * logD) * det_g0(t1, t2) * w
    (_, a1, a2), (_, b1, b2) = s.exps.multidegree, t.exps.multidegree
    # phase-dependent factor z^a conj(z^b), averaged over both phase circles
    f1 = (r1[:, None] ** (a1 + b1)) * (ph[None, :] ** (a1 - b1))
    f2 = (r2[:, None] ** (a2 + b2)) * (ph[None, :] ** (a2 - b2))
    total = np.sum(base * f1.mean(axis=1) * f2.mean(axis=1))
    return complex(s.coeff * np.conj(t.coeff) * total)


@dataclass
class GramMatrix:
    N: int
    labels: list
    matrix: np.ndarray
    quad: RadialQuadrature = field(default_factory=RadialQuadrature)

    def blocks(self) -> list[list[int]]:
        """Index sets of the connected components of the nonzero pattern."""
        n = len(self.labels)
        nz = np.abs(self.matrix) > 0
        seen = np.zeros(n, dtype=bool)
        comps = []
        for start in range(n):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                i = stack.pop()
                comp.append(i)
                for j in np.flatnonzero(nz[i] & ~seen):
                    seen[j] = True
                    stack.append(j)
            comps.append(sorted(comp))
        return comps

    def to_json(self) -> str:
        return json.dumps({
            "N": self.N,
            "labels": [list(e.exponents) for e in self.labels],
            "real": self.matrix.real.tolist(),
            "imag": self.matrix.imag.tolist(),
        }, indent=1)

    def diagonal_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "e0", "e1", "e2", "norm_sq"])
        for e, v in zip(self.labels, np.diag(self.matrix).real):
            w.writerow([e.label(), *e.multidegree, repr(float(v))])
        return buf.getvalue()


def gram_matrix(N: int, quad: RadialQuadrature | None = None, converge: bool = True,
                log_weight=None) -> GramMatrix:
    """Gram matrix of all monomial tuples at level ``N`` restricted to M."""
    labels = enumerate_basis(N)
    degs = multidegrees(N)
    quad = quad or RadialQuadrature()

    def fn(q):
        return radial_moments(N, degs, q, log_weight)

    if converge:
        moments, quad = integrate_until_converged(fn, quad)
    else:
        moments = fn(quad)
    index = {d: n for n, d in enumerate(degs)}
    cls = np.array([index[e.multidegree] for e in labels])
    same = cls[:, None] == cls[None, :]
    G = np.where(same, moments[cls][:, None], 0.0)
    return GramMatrix(N, labels, G.astype(complex), quad)


@dataclass(frozen=True)
class SectionCombination:
    terms: tuple

    @property
    def N(self) -> int:
        return self.terms[0].N


@dataclass
class OrthonormalBasis:
    """Columns of ``coeffs`` are coefficient vectors over ``labels``."""

    N: int
    labels: list
    coeffs: np.ndarray
    dropped: int = 0

    def __len__(self):
        return self.coeffs.shape[1]

    def __iter__(self):
        for k in range(len(self)):
            col = self.coeffs[:, k]
            yield SectionCombination(tuple(
                MonomialSection(e, complex(c)) for e, c in zip(self.labels, col) if c != 0))

    def density(self, p: ChartPoint) -> float:
        """``sum_k |S_k(p)|^2_{h_N}``."""
        v = section_values(self.labels, p)
        return float(np.sum(np.abs(v @ self.coeffs) ** 2))


def orthonormalize(g: GramMatrix, drop_tol: float = 1e-8) -> OrthonormalBasis:
    """Orthonormal combinations from a Gram matrix.

    Each connected block is diagonalized; directions whose eigenvalue is below
    ``drop_tol`` times the block's largest diagonal entry are discarded (the
    restriction to M identifies tuples of equal multidegree). The cutoff is
    per block because norms of different multidegrees span many decades.
    """
    G = np.asarray(g.matrix, dtype=complex)
    n = G.shape[0]
    cols, dropped = [], 0
    for comp in g.blocks():
        block = G[np.ix_(comp, comp)]
        cutoff = drop_tol * np.max(np.abs(np.diag(block)))
        evals, evecs = np.linalg.eigh(block)
        for lam, vec in zip(evals[::-1], evecs.T[::-1]):
            if lam <= cutoff:
                dropped += 1
                continue
            col = np.zeros(n, dtype=complex)
            col[comp] = vec / np.sqrt(lam)
            # deterministic phase: first nonzero coefficient real positive
            k = np.flatnonzero(np.abs(col) > 0)[0]
            col *= np.exp(-1j * np.angle(col[k]))
            cols.append(col)
    C = np.stack(cols, axis=1) if cols else np.zeros((n, 0), dtype=complex)
    return OrthonormalBasis(g.N, list(g.labels), C, dropped)


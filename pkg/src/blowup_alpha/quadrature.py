"""Quadrature rules shared by the section, Bergman and threshold code.

Two families live here:

* :class:`RadialQuadrature` integrates phase-averaged functions of the squared
  moduli ``t_i = |z_i|^2`` over ``[0, inf)^dim`` at a fixed grid.
* :class:`FanGrid` supports nested grids of growing depth for singular
  integrands, evaluated in log space.

Both work in the plane of log-moduli split into the cones of a two-dimensional
fan. Each cone ``{x v1 + y v2 : x, y >= 0}`` is tiled by panels whose
breakpoints grow geometrically, so the grid reaches far along the rays (where
the integrands have their slow tails) with a modest node count.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .geometry import FAN_CONES

__all__ = [
    "AccuracyError",
    "FanGrid",
    "RadialQuadrature",
    "gauss_panels",
    "geometric_breakpoints",
    "ladder_breakpoints",
]


class AccuracyError(RuntimeError):
    """Quadrature failed to converge; carries the last two estimates."""

    def __init__(self, message: str, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


@lru_cache(maxsize=None)
def _leggauss(order: int):
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panels(breaks, order: int):
    """Composite Gauss-Legendre nodes and weights on consecutive breakpoints."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _leggauss(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    return nodes, weights


@dataclass(frozen=True)
class RadialQuadrature:
    """Tensor rule for ``int_{[0,inf)^dim} f(t) dt`` built on log-moduli.

    With ``s = log t`` the integrand picks up ``dt = e^s ds``; the ``s``-plane is
    covered by the cones of ``cones`` (the toric fan of M by default) and each cone
    by geometric Gauss-Legendre panels out to ``depth``. Phase-averaged section
    norms decay exponentially along every ray, so a fixed depth suffices and
    refinement raises the Gauss order.
    """

    dim: int = 2
    depth: float = 64.0
    order: int = 16
    cones: tuple | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    def log_nodes(self):
        """Log-moduli nodes of shape ``(dim, K)`` and weights in ``ds``."""
        x, w = gauss_panels(geometric_breakpoints(self.depth), self.order)
        x, w = x.ravel(), w.ravel()
        if self.dim == 1:
            return np.concatenate([-x[::-1], x])[None, :], np.concatenate([w[::-1], w])
        cones = self.cones or FAN_CONES
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w).ravel()
        S1, S2, WW = [], [], []
        for v1, v2 in cones:
            S1.append((X * v1[0] + Y * v2[0]).ravel())
            S2.append((X * v1[1] + Y * v2[1]).ravel())
            WW.append(W)
        return np.stack([np.concatenate(S1), np.concatenate(S2)]), np.concatenate(WW)

    def nodes(self):
        """``(t, w)`` with ``t`` of shape ``(dim, K)`` and ``w`` the ``dt`` weights."""
        s, w = self.log_nodes()
        return np.exp(s), w * np.exp(s.sum(axis=0))

    def refined(self) -> "RadialQuadrature":
        return RadialQuadrature(self.dim, self.depth, self.order * 2, self.cones)


def integrate_until_converged(fn, quad: RadialQuadrature, rtol: float = 1e-6,
                              max_doublings: int = 4):
    """Evaluate ``fn(quad)`` (array-valued), doubling panels until stable.

    Returns ``(value, quad_used)``. Raises :class:`AccuracyError` when the
    relative change (max norm) never drops below ``rtol``.
    """
    prev = np.asarray(fn(quad))
    for _ in range(max_doublings):
        quad = quad.refined()
        cur = np.asarray(fn(quad))
        scale = np.max(np.abs(cur))
        if scale == 0 or np.max(np.abs(cur - prev)) <= rtol * scale:
            return cur, quad
        prev = cur
    raise AccuracyError("radial quadrature did not converge", (prev, cur))


def geometric_breakpoints(depth: float, head=(0.0, 0.25, 0.5, 1.0)):
    """Breakpoints ``0, 1/4, 1/2, 1, 2, 4, ...`` reaching exactly ``depth``."""
    b = list(head)
    while b[-1] < depth:
        b.append(b[-1] * 2.0)
    if b[-1] != depth:
        raise ValueError("depth must be a power of two times the last head breakpoint")
    return np.array(b)


def ladder_breakpoints(depth: float, head_depth: float = 64.0, step: float = 16.0):
    """Geometric breakpoints up to ``head_depth``, then uniform panels of width ``step``.

    The uniform tail keeps the refinement ladder additive in depth, so that a
    convergent integrand with a slowly decaying ray shows shrinking increments
    rather than the polynomial growth a doubling ladder would see.
    """
    if depth <= head_depth:
        return geometric_breakpoints(depth)
    k = (depth - head_depth) / step
    if k != int(k):
        raise ValueError("depth beyond the head must be head_depth + k * step")
    tail = head_depth + step * np.arange(1, int(k) + 1)
    return np.concatenate([geometric_breakpoints(head_depth), tail])


@dataclass(frozen=True)
class FanGrid:
    """Panels of a fan in the log-moduli plane.

    ``cones`` is a sequence of generator pairs ``(v1, v2)``; every pair must be
    a lattice basis up to sign so the change of variables has unit Jacobian.
    The grid at depth ``S`` covers ``0 <= x, y <= S`` in every cone, with axis
    panels from :func:`ladder_breakpoints`. Deeper grids contain all panels of
    shallower ones, so a positive integrand's estimate can only grow with depth.
    """

    cones: tuple
    order: int = 24
    step: float = 16.0

    def __post_init__(self):
        for v1, v2 in self.cones:
            det = v1[0] * v2[1] - v1[1] * v2[0]
            if abs(det) != 1:
                raise ValueError(f"cone {v1, v2} is not unimodular")

    def axis(self, depth: float):
        return gauss_panels(ladder_breakpoints(depth, step=self.step), self.order)

    def panel_blocks(self, depth: float, previous_depth: float | None = None):
        """Yield ``(s1, s2, w)`` node blocks for panels new since ``previous_depth``.

        Each block is one cone and one pair of axis panels. Node arrays are
        returned flattened.
        """
        x, wx = self.axis(depth)
        n = x.shape[0]
        n_old = 0 if previous_depth is None else self.axis(previous_depth)[0].shape[0]
        for v1, v2 in self.cones:
            for i in range(n):
                for j in range(n):
                    if max(i, j) < n_old:
                        continue
                    X, Y = np.meshgrid(x[i], x[j], indexing="ij")
                    s1 = X * v1[0] + Y * v2[0]
                    s2 = X * v1[1] + Y * v2[1]
                    yield s1.ravel(), s2.ravel(), np.outer(wx[i], wx[j]).ravel()

    def log_integral(self, log_f, depth: float, previous_depth: float | None = None):
        """``log`` of the integral of ``exp(log_f(s1, s2))`` over the new panels.

        Returns ``-inf`` when there are no new panels.
        """
        blocks = list(self.panel_blocks(depth, previous_depth))
        if not blocks:
            return -np.inf
        s1 = np.concatenate([b[0] for b in blocks])
        s2 = np.concatenate([b[1] for b in blocks])
        w = np.concatenate([b[2] for b in blocks])
        vals = log_f(s1, s2) + np.log(w)
        return float(np.logaddexp.reduce(vals))

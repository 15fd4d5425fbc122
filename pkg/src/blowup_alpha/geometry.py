"""Affine charts on the two-point blow-up of CP^2 and its two explicit Kahler metrics.

The surface M sits inside CP^2 x CP^1 x CP^1 and is cut out by
``Z0 X1 = Z1 X0`` and ``Z0 Y2 = Z2 Y0``. Away from the exceptional divisors it
is identified with CP^2 minus the blown-up points ``[0,1,0]`` and ``[0,0,1]``,
so every computation here is written in affine coordinates of CP^2:

* ``U0`` (Z0 != 0): ``(z1, z2) = (Z1/Z0, Z2/Z0)``
* ``U2`` (Z2 != 0): ``(w0, w1) = (Z0/Z2, Z1/Z2)``
* ``U1`` (Z1 != 0): ``(Z0/Z1, Z2/Z1)``, i.e. ``U2`` seen through the involution tau.

Volume convention: ``dV = det(g) dA1 dA2 / pi^2`` with ``dA`` Lebesgue measure
on each complex coordinate. This is ``(omega / 2 pi)^2 / 2!``, the normalization
in which the anticanonical class has volume ``c1(M)^2 / 2 = 7/2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Chart",
    "FAN_CONES",
    "ChartPoint",
    "MetricModel",
    "OutOfChartError",
    "SingularPointError",
    "chart_transition",
    "complex_hessian_det",
    "det_g0",
    "det_g1",
    "log_det_g0",
    "metric_for",
    "potential_u0",
    "tau",
    "to_homogeneous",
    "from_homogeneous",
    "volume_density",
]


#: Cones of the toric fan of M in the log-moduli plane ``(log|z1|^2, log|z2|^2)``
#: of chart U0. Rays (1,0), (1,1), (0,1) point at E1, the line Z0 = 0 and E2; the
#: negative rays are the coordinate axes of U0. Ordered so that swapping the two
#: coordinates (tau) permutes the cones together with their (x, y) parameters.
FAN_CONES = (
    ((1, 0), (1, 1)),
    ((0, 1), (1, 1)),
    ((0, 1), (-1, 0)),
    ((1, 0), (0, -1)),
    ((-1, 0), (0, -1)),
)


class Chart(str, enum.Enum):
    U0 = "U0"
    U1 = "U1"
    U2 = "U2"


class OutOfChartError(ValueError):
    """Raised when a point cannot be expressed in the requested chart."""


class SingularPointError(ValueError):
    """Raised at a coordinate degeneracy of a metric (e.g. w = 0 for g1)."""


@dataclass(frozen=True)
class ChartPoint:
    chart: Chart
    c1: complex
    c2: complex

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "c1", complex(self.c1))
        object.__setattr__(self, "c2", complex(self.c2))


def to_homogeneous(p: ChartPoint) -> tuple[complex, complex, complex]:
    """Homogeneous representative ``(Z0, Z1, Z2)`` of a chart point."""
    if p.chart is Chart.U0:
        return (1.0 + 0j, p.c1, p.c2)
    if p.chart is Chart.U2:
        return (p.c1, p.c2, 1.0 + 0j)
    return (p.c1, 1.0 + 0j, p.c2)


def from_homogeneous(Z, chart: Chart) -> ChartPoint:
    Z0, Z1, Z2 = (complex(z) for z in Z)
    chart = Chart(chart)
    pivot = {Chart.U0: Z0, Chart.U1: Z1, Chart.U2: Z2}[chart]
    if pivot == 0:
        raise OutOfChartError(f"point {Z} has vanishing pivot coordinate for {chart.value}")
    if chart is Chart.U0:
        return ChartPoint(chart, Z1 / Z0, Z2 / Z0)
    if chart is Chart.U2:
        return ChartPoint(chart, Z0 / Z2, Z1 / Z2)
    return ChartPoint(chart, Z0 / Z1, Z2 / Z1)


def chart_transition(p: ChartPoint, target: Chart) -> ChartPoint:
    """Re-express ``p`` in chart ``target``.

    Raises
    ------
    OutOfChartError
        If ``p`` lies outside the overlap (e.g. ``z2 = 0`` going from U0 to U2).
    """
    target = Chart(target)
    if p.chart is target:
        return p
    return from_homogeneous(to_homogeneous(p), target)


def tau(p: ChartPoint) -> ChartPoint:
    """The involution swapping the two blown-up points (Z1 <-> Z2, X <-> Y).

    In U0 this swaps ``z1`` and ``z2``; it maps U1 onto U2 with the same
    coordinate values and vice versa.
    """
    if p.chart is Chart.U0:
        return ChartPoint(Chart.U0, p.c2, p.c1)
    other = Chart.U2 if p.chart is Chart.U1 else Chart.U1
    return ChartPoint(other, p.c1, p.c2)


# -- closed forms in squared moduli (vectorized) -----------------------------

def det_g0(t1, t2):
    """``det g0`` on U0 as a function of ``t_i = |z_i|^2``."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    P = 1.0 + t1 + t2
    Q1 = 1.0 + t1
    Q2 = 1.0 + t2
    return 1.0 / P**3 + 1.0 / (P**2 * Q1) + 1.0 / (P**2 * Q2) + 1.0 / (Q1**2 * Q2**2)


def det_g1(s0, s1):
    """``det g1`` on U2 as a function of ``s0 = |w0|^2``, ``s1 = |w1|^2``.

    The second line of the printed display is a continuation of the sum (the
    four-term reading is the one matching the complex Hessian of the potential).
    """
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    P = 1.0 + s0 + s1
    S = s0 + s1
    Q = 1.0 + s0
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / P**3 + 1.0 / (P**2 * S) + 1.0 / (P**2 * Q) + s0 / (Q**2 * S**2)


def log_det_g0(s1, s2):
    """``log det g0`` in log-moduli ``s_i = log |z_i|^2``, overflow-safe."""
    lP = np.logaddexp(0.0, np.logaddexp(s1, s2))
    l1 = np.logaddexp(0.0, s1)
    l2 = np.logaddexp(0.0, s2)
    terms = np.stack(np.broadcast_arrays(-3 * lP, -2 * lP - l1, -2 * lP - l2, -2 * l1 - 2 * l2))
    return np.logaddexp.reduce(terms, axis=0)


def potential_u0(p: ChartPoint) -> float:
    if p.chart is not Chart.U0:
        raise ValueError(f"potential_u0 needs a U0 point, got {p.chart.value}")
    t1, t2 = abs(p.c1) ** 2, abs(p.c2) ** 2
    return float(np.log1p(t1 + t2) + np.log1p(t1) + np.log1p(t2))


def _potential_u2(c1: complex, c2: complex) -> float:
    s0, s1 = abs(c1) ** 2, abs(c2) ** 2
    if s0 + s1 == 0:
        raise SingularPointError("g1 potential is singular at w = (0, 0)")
    return float(np.log1p(s0 + s1) + np.log1p(s0) + np.log(s0 + s1))


@dataclass(frozen=True)
class MetricModel:
    """One of the explicit metrics g0 (chart U0) or g1 (charts U2, and U1 via tau)."""

    chart: Chart

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(self.chart))

    @property
    def name(self) -> str:
        return "g0" if self.chart is Chart.U0 else "g1"

    def _check(self, p: ChartPoint):
        if p.chart is not self.chart:
            raise ValueError(f"metric on {self.chart.value} evaluated at a {p.chart.value} point")

    def potential(self, p: ChartPoint) -> float:
        self._check(p)
        if self.chart is Chart.U0:
            return potential_u0(p)
        return _potential_u2(p.c1, p.c2)

    def potential_fn(self):
        """Potential as a function of the two raw complex coordinates."""
        if self.chart is Chart.U0:
            return lambda a, b: potential_u0(ChartPoint(Chart.U0, a, b))
        return _potential_u2

    def volume_density(self, p: ChartPoint) -> float:
        return volume_density(self, p)


def metric_for(chart: Chart) -> MetricModel:
    return MetricModel(Chart(chart))


def volume_density(m: MetricModel, p: ChartPoint) -> float:
    """Determinant of the metric ``m`` in its chart coordinates at ``p``."""
    m._check(p)
    if m.chart is Chart.U0:
        return float(det_g0(abs(p.c1) ** 2, abs(p.c2) ** 2))
    s0, s1 = abs(p.c1) ** 2, abs(p.c2) ** 2
    if s0 + s1 == 0:
        raise SingularPointError("det g1 is singular at w = (0, 0)")
    return float(det_g1(s0, s1))


def complex_hessian_det(f, c1: complex, c2: complex, h: float = 1e-4) -> float:
    """Determinant of ``[d^2 f / dc_a d conj(c_b)]`` by central finite differences.

    ``f(c1, c2)`` is a real function of two complex variables. Used as an
    independent oracle for the closed-form determinants.
    """
    w = np.array([c1, c2], dtype=complex)
    basis = np.eye(2, dtype=complex)

    def g(v):
        return f(v[0], v[1])

    def d2(u, v):
        return (g(w + h * u + h * v) - g(w + h * u - h * v)
                - g(w - h * u + h * v) + g(w - h * u - h * v)) / (4 * h * h)

    H = np.empty((2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            ea, eb = basis[a], basis[b]
            xx = d2(ea, eb)
            yy = d2(1j * ea, 1j * eb)
            xy = d2(ea, 1j * eb)
            yx = d2(1j * ea, eb)
            H[a, b] = (xx + yy + 1j * (xy - yx)) / 4
    return float(np.linalg.det(H).real)

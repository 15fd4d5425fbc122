import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_alpha.geometry import (
    Chart,
    ChartPoint,
    MetricModel,
    OutOfChartError,
    SingularPointError,
    chart_transition,
    complex_hessian_det,
    det_g0,
    det_g1,
    log_det_g0,
    potential_u0,
    tau,
    volume_density,
)

coord = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)
phase = st.floats(0, 2 * math.pi)


def test_potential_values():
    assert potential_u0(ChartPoint(Chart.U0, 0, 0)) == 0.0
    assert potential_u0(ChartPoint(Chart.U0, 1, 0)) == pytest.approx(2 * math.log(2), abs=1e-15)
    assert potential_u0(ChartPoint(Chart.U0, 1, 1)) == pytest.approx(math.log(3) + 2 * math.log(2), abs=1e-15)


def test_potential_rejects_other_chart():
    with pytest.raises(ValueError):
        potential_u0(ChartPoint(Chart.U2, 1, 1))


def test_det_g0_origin():
    assert volume_density(MetricModel(Chart.U0), ChartPoint(Chart.U0, 0, 0)) == 4.0


def test_det_g1_four_term_reading():
    # 1/8 + 1/4 + 1/8 + 1/4 at (w0, w1) = (1, 0)
    m = MetricModel(Chart.U2)
    assert volume_density(m, ChartPoint(Chart.U2, 1, 0)) == pytest.approx(0.75, rel=1e-15)
    fd = complex_hessian_det(m.potential_fn(), 1.0, 0.0)
    assert fd == pytest.approx(0.75, rel=1e-6)


def test_det_g1_singular_at_origin():
    with pytest.raises(SingularPointError):
        volume_density(MetricModel(Chart.U2), ChartPoint(Chart.U2, 0, 0))


@pytest.mark.parametrize("chart", [Chart.U0, Chart.U2, Chart.U1])
def test_hessian_matches_closed_form(chart):
    rng = np.random.default_rng(7)
    m = MetricModel(chart)
    for _ in range(20):
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        p = ChartPoint(chart, *c)
        fd = complex_hessian_det(m.potential_fn(), *c, h=1e-4)
        assert fd == pytest.approx(volume_density(m, p), rel=1e-5)


def test_log_det_g0_matches_direct():
    s = np.linspace(-5, 5, 11)
    S1, S2 = np.meshgrid(s, s)
    assert np.allclose(np.exp(log_det_g0(S1, S2)), det_g0(np.exp(S1), np.exp(S2)), rtol=1e-13)
    assert np.isfinite(log_det_g0(800.0, -800.0))


@given(coord, coord)
def test_tau_symmetry_of_det_g0(a, b):
    t1, t2 = abs(a) ** 2, abs(b) ** 2
    assert det_g0(t1, t2) == pytest.approx(det_g0(t2, t1), rel=1e-12)


@given(coord, coord, phase, phase)
def test_phase_invariance(a, b, th1, th2):
    p = ChartPoint(Chart.U0, a, b)
    q = ChartPoint(Chart.U0, a * cmath.exp(1j * th1), b * cmath.exp(1j * th2))
    m = MetricModel(Chart.U0)
    assert potential_u0(q) == pytest.approx(potential_u0(p), rel=1e-12, abs=1e-15)
    assert volume_density(m, q) == pytest.approx(volume_density(m, p), rel=1e-12)


def test_transition_examples():
    q = chart_transition(ChartPoint(Chart.U0, 1, 1), Chart.U2)
    assert (q.c1, q.c2) == (1, 1)
    q = chart_transition(ChartPoint(Chart.U0, 2, 4), Chart.U2)
    assert q.c1 == pytest.approx(0.25) and q.c2 == pytest.approx(0.5)
    with pytest.raises(OutOfChartError):
        chart_transition(ChartPoint(Chart.U0, 1, 0), Chart.U2)


@settings(max_examples=200)
@given(coord, coord, st.sampled_from(list(Chart)), st.sampled_from(list(Chart)))
def test_transition_round_trip(a, b, src, dst):
    p = ChartPoint(src, a, b)
    try:
        back = chart_transition(chart_transition(p, dst), src)
    except OutOfChartError:
        return
    for x, y in ((p.c1, back.c1), (p.c2, back.c2)):
        assert abs(x - y) <= 1e-12 * max(1.0, abs(x))


def test_tau_maps_u1_to_u2_and_is_involution():
    p = ChartPoint(Chart.U1, 0.3, 2j)
    assert tau(p).chart is Chart.U2
    assert tau(tau(p)) == p
    assert tau(ChartPoint(Chart.U0, 1, 2)) == ChartPoint(Chart.U0, 2, 1)


def test_tau_preserves_volume_form_across_u1_u2():
    # U1 carries g1 through tau, so densities agree at tau-related points
    p = ChartPoint(Chart.U2, 0.4 + 0.1j, -1.3)
    assert volume_density(MetricModel(Chart.U1), tau(p)) == volume_density(MetricModel(Chart.U2), p)


def test_det_g1_vectorized():
    vals = det_g1(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
    assert vals.shape == (2,) and np.all(vals > 0)

import math

import numpy as np
import pytest

from blowup_alpha.bergman import (
    MetricDomainError,
    approximation_error,
    bergman_density,
    bergman_ratio_bound,
    bergman_ratio_sum,
    line_basis,
    line_beta_norms,
    line_gram,
    log_section_approx,
    random_chart_grid,
    surface_basis,
    tyz_leading_check,
)
from blowup_alpha.geometry import Chart, ChartPoint, det_g0, tau
from blowup_alpha.quadrature import RadialQuadrature

SURFACE_POINTS = [ChartPoint(Chart.U0, 0.3, 0.7j), ChartPoint(Chart.U0, 1.2j, 0.1),
                  ChartPoint(Chart.U2, 0.5, 0.2), ChartPoint(Chart.U1, -0.4, 1.5)]


def test_line_norms_match_beta_functions():
    for m in (1, 4, 9, 16):
        g = line_gram(m)
        assert np.allclose(np.diag(g.matrix).real, line_beta_norms(m), rtol=1e-9)
    assert line_beta_norms(2) == pytest.approx([1 / 3, 1 / 6, 1 / 3])


@pytest.mark.parametrize("m", [4, 8, 16])
def test_line_density_constant(m):
    b = line_basis(m)
    vals = [bergman_density(b, z) for z in (0, 0.3 + 1j, -2.0, 5j, 40.0)]
    assert max(vals) / min(vals) - 1 < 1e-6
    # total volume 1, so density * volume / dim = 1
    assert vals[0] / (m + 1) == pytest.approx(1.0, rel=1e-8)


def test_line_leading_coefficient():
    fit = tyz_leading_check([4, 8, 16, 32], [0.5j, 2.0], model="line")
    assert np.all((0.9 <= fit.a0_est) & (fit.a0_est <= 1.1))
    # density / m = 1 + 1/m exactly
    assert fit.slope_est == pytest.approx([1.0, 1.0], abs=1e-6)
    assert fit.ratios[0, 2] == pytest.approx(17 / 16, rel=1e-9)


def test_leading_fit_needs_two_levels():
    with pytest.raises(ValueError):
        tyz_leading_check([16], [0.5], model="line")


def test_surface_leading_fit():
    fit = tyz_leading_check([2, 4], SURFACE_POINTS)
    assert np.all(np.isfinite(fit.a0_est)) and np.all(fit.a0_est > 0)
    assert np.all((fit.ratios > 0.5) & (fit.ratios < 2.0))


@pytest.mark.parametrize("N", [1, 2])
def test_surface_density_integrates_to_rank(N):
    b = surface_basis(N)
    q = RadialQuadrature(depth=32.0, order=6)
    (t1, t2), w = q.nodes()
    d = np.array([bergman_density(b, ChartPoint(Chart.U0, math.sqrt(a), math.sqrt(c)))
                  for a, c in zip(t1, t2)])
    assert np.sum(d * det_g0(t1, t2) * w) == pytest.approx(len(b), rel=1e-4)


def test_density_tau_symmetric():
    b = surface_basis(3)
    for p in SURFACE_POINTS:
        assert bergman_density(b, tau(p)) == pytest.approx(bergman_density(b, p), rel=1e-8)


def test_density_positive_everywhere_sampled():
    b = surface_basis(2)
    rng = np.random.default_rng(0)
    for chart in Chart:
        for c in rng.normal(size=(10, 2)) * 3:
            assert bergman_density(b, ChartPoint(chart, *c)) > 0


def zero(t1, t2):
    return 0.0 * t1


def test_zero_potential_error_decreases():
    errs = [approximation_error(zero, N, SURFACE_POINTS) for N in (2, 4, 6)]
    assert errs[0] > errs[1] > errs[2]


def test_constant_shift():
    c = 0.05
    base = log_section_approx(zero, 3)
    shifted = log_section_approx(lambda t1, t2: c + 0.0 * t1, 3)
    for p in SURFACE_POINTS:
        assert shifted(p) - base(p) == pytest.approx(c, abs=1e-10)


def test_line_scaled_direction_ladder():
    def phi(t):
        return 0.1 * np.log1p(t)
    pts = [0.1, 1.0, 3j, 10.0, -0.5 + 0.5j]
    assert approximation_error(phi, 16, pts, model="line") < approximation_error(phi, 8, pts, model="line")


def test_nonpositive_metric_rejected():
    def bad(t):
        return -3.0 * np.log1p(t)
    with pytest.raises(MetricDomainError):
        log_section_approx(bad, 4, model="line", points=[0.5])


def test_ratio_bound_formula():
    assert bergman_ratio_bound(1, [])[1] == pytest.approx(math.log(12))
    assert bergman_ratio_bound(2, [])[1] == pytest.approx(0.5 * math.log(54))
    with pytest.raises(ValueError):
        bergman_ratio_bound(0, [])


def test_pure_term_at_origin_is_zero():
    # only the pure Z0 multidegree survives at the U0 origin
    val = bergman_ratio_sum(1, np.array([[1.0], [0.0], [0.0]], dtype=complex))
    assert val[0] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", range(1, 7))
def test_ratio_bound_holds(n):
    rng = np.random.default_rng(n)
    grid = [random_chart_grid(c, 2000, rng) for c in Chart]
    sup, bound = bergman_ratio_bound(n, grid + [ChartPoint(Chart.U0, 0, 0)])
    assert sup <= bound

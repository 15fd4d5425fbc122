"""Acceptance checks, one group per criterion.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
the terminal summary prints one PASS/FAIL line per criterion.
"""

import math
import os
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from blowup_alpha.bergman import bergman_ratio_bound, random_chart_grid, tyz_leading_check
from blowup_alpha.cli import COMMANDS, main, read_artifact
from blowup_alpha.functionals import (
    SphereMesh,
    SpherePotential,
    compute_I,
    compute_J,
    hoelder_chain_check,
    manufactured_ricci_solution,
    mt_sphere_check,
    random_battery,
    ricci_identity_check,
)
from blowup_alpha.geometry import Chart, ChartPoint
from blowup_alpha.sections import enumerate_basis, gram_matrix, orthonormalize
from blowup_alpha.threshold import (
    HoelderSplit,
    LimitPotential,
    Verdict,
    alpha_bracket,
    alpha_scan,
    case_table,
    phi_eps_divergence,
)

criterion = pytest.mark.criterion
EPS_LADDER = [1e-1, 1e-2, 1e-3, 1e-4]


@pytest.fixture(scope="module")
def battery():
    return random_battery(SphereMesh(), count=50, seed=0)


@pytest.fixture(scope="module")
def phi_eps_table():
    return phi_eps_divergence([0.2, 0.3, 0.4, 0.5], EPS_LADDER)


# 1 ---------------------------------------------------------------------------

@criterion(1, "basis dimension (N+1)^3 (N+2) / 2 for N = 1..10")
def test_dimension_formula():
    t0 = time.perf_counter()
    for N in range(1, 11):
        assert len(enumerate_basis(N)) == (N + 1) ** 3 * (N + 2) // 2
    assert time.perf_counter() - t0 < 1.0


# 2 ---------------------------------------------------------------------------

@criterion(2, "monomial Bergman ratio bound, n = 1..6, 1e4 points per chart")
def test_ratio_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    for n in range(1, 7):
        grid = [random_chart_grid(c, 10_000, rng) for c in Chart]
        sup, bound = bergman_ratio_bound(n, grid)
        assert bound == pytest.approx(math.log((n + 1) ** 3 * (n + 2) / 2) / n)
        assert sup <= bound, (n, sup, bound)
    assert time.perf_counter() - t0 < 30


# 3 ---------------------------------------------------------------------------

@criterion(3, "alpha scan of the limit potential brackets 1/3")
def test_scan_convergent_at_030():
    assert alpha_scan(LimitPotential(), 0.30).verdict is Verdict.CONVERGENT


@criterion(3, "alpha scan of the limit potential brackets 1/3")
def test_scan_divergent_at_037():
    assert alpha_scan(LimitPotential(), 0.37).verdict is Verdict.DIVERGENT


@criterion(3, "alpha scan of the limit potential brackets 1/3")
def test_bracket_contains_one_third():
    t0 = time.perf_counter()
    lo, hi, _ = alpha_bracket(LimitPotential())
    print(f"bracket = ({lo:.4f}, {hi:.4f})")
    assert hi - lo <= 0.10
    assert lo < 1 / 3 < hi
    assert time.perf_counter() - t0 < 600


# 4 ---------------------------------------------------------------------------

@criterion(4, "phi_eps integrals blow up for alpha > 1/3 and stabilize below")
@pytest.mark.parametrize("alpha", [0.40, 0.50])
def test_phi_eps_blowup(phi_eps_table, alpha):
    row = phi_eps_table.values[phi_eps_table.alphas.index(alpha)]
    print(f"alpha = {alpha}: {row}")
    assert np.all(np.diff(row) > 0)
    assert row[-1] / row[-2] >= 1.5


@criterion(4, "phi_eps integrals blow up for alpha > 1/3 and stabilize below")
@pytest.mark.parametrize("alpha", [0.20, 0.30])
def test_phi_eps_stable(phi_eps_table, alpha):
    row = phi_eps_table.values[phi_eps_table.alphas.index(alpha)]
    print(f"alpha = {alpha}: {row}")
    assert abs(row[-1] - row[-2]) <= 1e-2 * abs(row[-1])


# 5 ---------------------------------------------------------------------------

@criterion(5, "case analysis supremum is exactly 1/3")
def test_case_table():
    t0 = time.perf_counter()
    _, sup = case_table()
    assert isinstance(sup, Fraction) and sup == Fraction(1, 3)
    assert time.perf_counter() - t0 < 1.0


# 6 ---------------------------------------------------------------------------

LINE_POINTS = [0.0, 0.3 + 0.4j, 1.0, -2.5j, 7.0]
SURFACE_POINTS = [ChartPoint(Chart.U0, 0.3, 0.7j), ChartPoint(Chart.U0, 1.2j, 0.1),
                  ChartPoint(Chart.U2, 0.5, 0.2), ChartPoint(Chart.U1, -0.4, 1.5)]


@criterion(6, "leading Bergman coefficient (CP^1 fit and surface sizes)")
def test_line_leading_coefficient():
    fit = tyz_leading_check([4, 8, 16, 32], LINE_POINTS, model="line")
    print(f"a0 estimates: {fit.a0_est}")
    assert np.all((fit.a0_est >= 0.95) & (fit.a0_est <= 1.05))


@criterion(6, "leading Bergman coefficient (CP^1 fit and surface sizes)")
def test_surface_density_ratio():
    fit = tyz_leading_check([2, 4], SURFACE_POINTS)
    print(f"density / N^2: {fit.ratios}")
    assert np.all(fit.ratios > 0)
    assert np.all((fit.ratios >= 0.5) & (fit.ratios <= 2.0))


# 7 ---------------------------------------------------------------------------

@criterion(7, "Gram structure and orthonormal round trip for N <= 3")
@pytest.mark.parametrize("N", [1, 2, 3])
def test_gram_structure(N):
    g = gram_matrix(N)
    same = np.array([[a.multidegree == b.multidegree for b in g.labels] for a in g.labels])
    assert np.max(np.abs(g.matrix[~same])) < 1e-10
    b = orthonormalize(g)
    err = np.max(np.abs(b.coeffs.conj().T @ g.matrix @ b.coeffs - np.eye(len(b))))
    assert err < 1e-8


# 8 ---------------------------------------------------------------------------

@criterion(8, "Moser-Trudinger on the round sphere")
def test_moser_trudinger(battery):
    assert all(mt_sphere_check(phi, rtol=1e-6)[2] for phi in battery)
    lhs, rhs, _ = mt_sphere_check(SpherePotential.constant(SphereMesh()))
    assert abs(lhs - rhs) <= 1e-8


# 9 ---------------------------------------------------------------------------

@criterion(9, "Holder chain links and the energy sandwich")
def test_hoelder_chain(battery):
    split = HoelderSplit(0.02, 0.002, 0.0002)
    for phi in battery:
        report = hoelder_chain_check(phi, split)
        worst = min(l.slack for l in report.links + [report.final])
        assert worst >= -1e-6
        J, I = compute_J(phi), compute_I(phi)
        tol = 1e-10 * max(1.0, I)
        assert J - tol <= I <= 2 * J + tol


# 10 --------------------------------------------------------------------------

@criterion(10, "continuity-path Ricci identity on manufactured solutions")
@pytest.mark.parametrize("t", [0.5, 0.9, 1.0])
def test_ricci_identity(t):
    assert ricci_identity_check(t).residual < 1e-4
    flat = ricci_identity_check(t, manufactured_ricci_solution(t, phi_coeffs=(0.0,)))
    assert flat.residual < 1e-4
    assert flat.equality is (t == 1.0)


# 11 --------------------------------------------------------------------------

SUITE = [
    ["--command", "dims", "--param", "N=1,2,3,4,5,6,7,8,9,10"],
    ["--command", "gram", "--param", "N=2"],
    ["--command", "bergman", "--param", "model=line"],
    ["--command", "bergman", "--param", "model=surface"],
    ["--command", "lemma31"],
    ["--command", "alpha-scan", "--param", "phi=phi0"],
    ["--command", "phi-eps"],
    ["--command", "case-table", "--format", "structured-text"],
    ["--command", "mt-battery"],
    ["--command", "hoelder"],
]


def _run_suite(directory):
    cwd = os.getcwd()
    os.chdir(directory)
    try:
        names = []
        for k, argv in enumerate(SUITE):
            name = f"{k:02d}-{argv[1]}.out"
            main([*argv, "--seed", "0", "--out", name])
            names.append(name)
        main(["--command", "report", "--out", "report.txt", *names])
        return names + ["report.txt"]
    finally:
        os.chdir(cwd)


@criterion(11, "two runs of the full suite give byte-identical artifacts")
def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    names = _run_suite(a)
    assert _run_suite(b) == names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert {read_artifact(a / n)[0].command for n in names} == set(COMMANDS)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", *sys.argv[1:]]))

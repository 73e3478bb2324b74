import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import binom

from bootperc.analytic import (
    anchored_bound, animal_bound_check, asymptotic_gamma_check, closed_form_k2, closed_form_kd,
    count_connected_sets, critical_p_regular, eval_B, gw_critical, gw_fort_fixed_point,
    gw_update, q_lower_bound, rate_function, smallest_fixed_point, z_fixed_point,
)
from bootperc.errors import DegenerateDistribution, NonConvergence, PreconditionError
from bootperc.graph_core import OffspringDistribution, gen_grid, gen_regular_tree

SKEWED = OffspringDistribution.parse("2:0.5,4:0.5")

dk = st.integers(2, 12).flatmap(lambda d: st.tuples(st.just(d), st.integers(2, d)))
unit = st.floats(0.0, 1.0)


def f_example(q):
    return 2 - q + 4 * q**2 - 3 * q**3


def subtree_counts(m_max):
    """Connected sets through a vertex of the 3-regular tree, by polynomial recursion."""
    # A = x (1 + A)^2 counts sets hanging below a vertex with two children
    A = np.zeros(m_max + 1)
    for _ in range(m_max):
        one = A.copy()
        one[0] += 1
        sq = np.convolve(one, one)[:m_max]
        A = np.concatenate(([0], sq))
    one = A.copy()
    one[0] += 1
    cube = np.convolve(np.convolve(one, one), one)[:m_max]
    return [int(round(c)) for c in np.concatenate(([0], cube))]


class TestEvalB:
    def test_trivial(self):
        assert eval_B(5, 3, 0.3, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert eval_B(4, 2, 1.0, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert eval_B(3, 2, 0.0, 0.0) == 0.0

    @given(dk, unit, unit)
    def test_matches_scipy(self, dk_, p, x):
        d, k = dk_
        expect = binom.cdf(d - k, d, (1 - x) * (1 - p))
        assert eval_B(d, k, p, x) == pytest.approx(expect, abs=1e-12)

    @pytest.mark.parametrize("d,k", [(80, 40), (200, 100), (300, 7)])
    def test_large_degree(self, d, k):
        for p, x in [(0.3, 0.2), (0.01, 0.5), (0.45, 0.1)]:
            assert eval_B(d, k, p, x) == pytest.approx(binom.cdf(d - k, d, (1 - x) * (1 - p)),
                                                       abs=1e-12)

    @given(dk, unit, unit, unit)
    def test_monotone(self, dk_, p, a, b):
        d, k = dk_
        lo, hi = sorted((a, b))
        assert eval_B(d, k, p, lo) <= eval_B(d, k, p, hi) + 1e-14
        assert eval_B(d, k, lo, p) <= eval_B(d, k, hi, p) + 1e-14

    def test_domain(self):
        for args in [(3, 1, 0.1, 0.1), (3, 4, 0.1, 0.1), (3, 2, 1.1, 0.1), (3, 2, 0.1, -0.1)]:
            with pytest.raises(PreconditionError):
                eval_B(*args)


class TestFixedPoint:
    def test_p_one(self):
        assert smallest_fixed_point(4, 2, 1.0).value == 1.0

    def test_vanishes_as_p_shrinks(self):
        ys = [smallest_fixed_point(3, 2, p).value for p in (1e-2, 1e-3, 1e-4)]
        assert ys[0] > ys[1] > ys[2] > 0 and ys[2] < 1e-3

    @given(dk, unit)
    def test_least_and_monotone(self, dk_, p):
        d, k = dk_
        res = smallest_fixed_point(d, k, p)
        if not res.converged:
            return
        assert res.residual <= 1e-11
        seq = [0.0]
        for _ in range(50):
            seq.append(eval_B(d, k, p, seq[-1]))
        assert all(a <= b + 1e-15 for a, b in zip(seq, seq[1:]))
        # stopping on a 1e-12 step leaves the iterate slightly short of the limit
        assert all(s <= res.value + 1e-9 for s in seq)
        # no fixed point strictly below the reported one
        xs = np.linspace(0, res.value, 400)
        gap = np.array([eval_B(d, k, p, x) - x for x in xs[:-1]])
        assert np.all(gap >= -1e-12)

    def test_cap(self):
        pc = 1 / 9
        res = smallest_fixed_point(3, 2, pc + 1e-9, cap=50)
        assert not res.converged and res.iterations == 50
        with pytest.raises(NonConvergence):
            smallest_fixed_point(3, 2, pc + 1e-9, cap=50, strict=True)


class TestCritical:
    @pytest.mark.parametrize("d,k,expect", [(3, 3, 2 / 3), (3, 2, 1 / 9), (4, 2, 13 / 256)])
    def test_values(self, d, k, expect):
        res = critical_p_regular(d, k)
        assert res.p_crit == pytest.approx(expect, abs=1e-9)
        assert res.bracket_width <= 1e-10
        assert res.bracket[0] <= expect <= res.bracket[1] or abs(res.p_crit - expect) < 1e-10

    def test_closed_forms(self):
        assert closed_form_kd(5) == pytest.approx(0.8)
        assert closed_form_k2(3) == pytest.approx(1 / 9, abs=1e-15)
        assert closed_form_k2(4) == pytest.approx(13 / 256, abs=1e-14)
        assert closed_form_k2(50) * 2 * 50**2 == pytest.approx(1, rel=0.1)
        with pytest.raises(PreconditionError):
            closed_form_k2(2)

    @pytest.mark.parametrize("d", range(3, 11))
    def test_bisection_matches_closed_forms(self, d):
        assert critical_p_regular(d, d).p_crit == pytest.approx(closed_form_kd(d), abs=1e-9)
        assert critical_p_regular(d, 2).p_crit == pytest.approx(closed_form_k2(d), abs=1e-8)

    def test_iteration_agrees(self):
        # plain fixed-point iteration on either side of the bracket
        for d, k in [(3, 2), (4, 3), (5, 2)]:
            pc = critical_p_regular(d, k).p_crit
            assert smallest_fixed_point(d, k, pc - 1e-4).value < 1 - 1e-3
            assert smallest_fixed_point(d, k, pc + 1e-4).value == pytest.approx(1, abs=1e-9)

    @pytest.mark.parametrize("d,k", [(3, 2), (5, 3), (6, 2), (8, 5)])
    def test_jump_at_criticality(self, d, k):
        res = critical_p_regular(d, k)
        below = smallest_fixed_point(d, k, res.bracket[0]).value
        above = smallest_fixed_point(d, k, res.bracket[1] + 1e-9).value
        assert 1 - below > 0.05
        assert above == pytest.approx(1.0, abs=1e-9)

    def test_at_most_k_minus_one_over_d(self):
        for d in range(2, 21):
            for k in range(2, d + 1):
                assert critical_p_regular(d, k).p_crit <= (k - 1) / d + 1e-9


class TestGamma:
    def test_gamma_one(self):
        for row in asymptotic_gamma_check(1.0, [3, 7, 12]):
            assert row.k == row.d and row.p_crit == pytest.approx(1 - 1 / row.d, abs=1e-9)

    def test_gamma_half_trend(self):
        rows = asymptotic_gamma_check(0.5, [10, 40, 200])
        gaps = [abs(r.p_crit - 0.5) for r in rows]
        assert gaps[0] > gaps[1] > gaps[2]
        assert all(r.below_upper for r in rows)
        assert [r.k for r in rows] == [5, 20, 100]

    def test_too_small(self):
        with pytest.raises(PreconditionError):
            asymptotic_gamma_check(0.1, [5])


class TestGaltonWatson:
    def test_example(self):
        res = gw_critical(SKEWED, 2)
        assert res.p_crit == pytest.approx(0.10504, abs=1e-4)
        assert res.p_crit < 1 / 9

    def test_independent_maximum(self):
        opt = minimize_scalar(lambda q: -f_example(q), bounds=(0, 1), method="bounded",
                              options={"xatol": 1e-12})
        assert opt.x == pytest.approx((4 + math.sqrt(7)) / 9, abs=1e-6)
        assert -opt.fun == pytest.approx(2.2347, abs=1e-3)
        assert gw_critical(SKEWED, 2).p_crit == pytest.approx(1 - 2 / -opt.fun, abs=1e-9)

    @given(unit, unit)
    def test_update_formula(self, p, q):
        expect = 0.5 * (1 - p) * (2 * q - q**2) + 0.5 * (1 - p) * (4 * q**3 - 3 * q**4)
        assert gw_update(SKEWED, 2, p, q) == pytest.approx(expect, abs=1e-14)

    @pytest.mark.parametrize("d,k", [(3, 2), (4, 2), (4, 3), (5, 5)])
    def test_point_mass_matches_regular(self, d, k):
        dist = OffspringDistribution.point_mass(d)
        assert gw_critical(dist, k).p_crit == pytest.approx(critical_p_regular(d, k).p_crit,
                                                            abs=1e-6)

    def test_fixed_point(self):
        assert gw_fort_fixed_point(SKEWED, 2, 1.0).value == 0.0
        pc = gw_critical(SKEWED, 2).p_crit
        q = gw_fort_fixed_point(SKEWED, 2, pc - 0.01)
        assert q.value > 0.1 and q.residual <= 1e-11
        assert gw_fort_fixed_point(SKEWED, 2, pc + 0.01).value < 1e-6

    def test_domination(self):
        assert gw_critical(SKEWED, 2).p_crit <= closed_form_k2(3) + 1e-12
        assert gw_critical(SKEWED, 2).p_crit >= gw_critical(OffspringDistribution.point_mass(4), 2).p_crit

    def test_degenerate(self):
        with pytest.raises(DegenerateDistribution):
            gw_critical(OffspringDistribution.parse("1:0.2,3:0.8"), 2)


class TestPathBound:
    def test_small_p(self):
        z2, z4 = z_fixed_point(3, 2, 1e-2), z_fixed_point(3, 2, 1e-4)
        assert z2 < z4 < 1 and z4 > 0.999

    def test_p_one(self):
        assert z_fixed_point(4, 3, 1.0) == 0.0

    def test_lower_bound(self):
        q = q_lower_bound(3, 2)
        assert q > 0
        assert math.sqrt(1 - z_fixed_point(3, 2, q * 0.999) ** 2) < 1 / 3
        assert q < critical_p_regular(3, 2).p_crit


class TestAnchored:
    def test_example(self):
        rep = anchored_bound(4, 2, 2)
        assert rep.c == 0.5 and rep.K == 0.25
        assert rep.p_bound == pytest.approx(1 / (36 * math.e**2), abs=1e-12)
        assert rep.rate(rep.p_bound) >= math.log(3) + 1 - 1e-9
        assert rep.rate(rep.p_sharp) == pytest.approx(math.log(3) + 1, abs=1e-9)
        assert rep.p_bound <= rep.p_sharp

    @pytest.mark.parametrize("d", [3, 4, 6, 10])
    def test_full_proportion(self, d):
        rep = anchored_bound(d, 2, d)
        assert rep.c == 1
        assert rep.p_sharp == pytest.approx(1 / (math.e * (d - 1)), rel=1e-9)
        assert rate_function(1.0, 0.3) == pytest.approx(math.log(1 / 0.3))

    def test_rejects(self):
        with pytest.raises(PreconditionError):
            anchored_bound(4, 1, 2)
        with pytest.raises(PreconditionError):
            anchored_bound(6, 2, 1.5)

    def test_weaker_than_truth(self):
        # T_{d-1} is d-regular with anchored expansion d-2
        for d in range(3, 9):
            for k in range(2, d):
                rep = anchored_bound(d, k, d - 2)
                assert rep.p_bound <= critical_p_regular(d - 1, k).p_crit


class TestAnimals:
    def test_single(self):
        rows = animal_bound_check(3, 1, gen_grid(3), 4)
        assert rows[0].count == 1 and rows[0].ok

    def test_binary_tree_counts(self):
        t = gen_regular_tree(2, 9, "d_plus_1_regular")
        rows = animal_bound_check(3, 8, t.graph, 0)
        assert [r.count for r in rows] == subtree_counts(8)[1:]
        assert [r.count for r in rows] == [1, 3, 9, 28, 90, 297, 1001, 3432]
        assert all(r.ok for r in rows)

    def test_grid_counts(self):
        # fixed polyominoes times their size (marked cell)
        polyominoes = [1, 2, 6, 19, 63, 216, 760, 2725]
        g = gen_grid(17)
        rows = animal_bound_check(4, 8, g, 8 * 17 + 8)
        assert [r.count for r in rows] == [m * a for m, a in zip(range(1, 9), polyominoes)]
        assert all(r.ok for r in rows)

    def test_limits(self):
        with pytest.raises(PreconditionError):
            animal_bound_check(3, 11, gen_grid(3), 0)
        from bootperc.errors import BudgetExceeded
        with pytest.raises(BudgetExceeded):
            count_connected_sets(gen_grid(9), 40, 8, budget=100)

import numpy as np
import pytest

from gradflow.relaxation import (
    RelaxationInputs,
    choose_relaxation_bdf2,
    choose_relaxation_cn,
    relax_R,
)

from .oracles import brute_force_min_lambda


class TestMidpointTable:
    def test_case_no_overshoot(self):
        assert choose_relaxation_cn(RelaxationInputs(5.0, 3.0, 7.0)) == (0.0, 0.0)

    def test_case_budget_covers_gap(self):
        lam, kap = choose_relaxation_cn(RelaxationInputs(3.0, 5.0, 4.0))
        assert (lam, kap) == (0.0, 0.5)

    def test_case_budget_short(self):
        lam, kap = choose_relaxation_cn(RelaxationInputs(3.0, 5.0, 0.5))
        assert (lam, kap) == (0.75, 1.0)

    def test_equal_energies(self):
        assert choose_relaxation_cn(RelaxationInputs(4.0, 4.0, 1.0)) == (0.0, 0.0)
        near = 4.0 + 1e-16
        assert choose_relaxation_cn(RelaxationInputs(4.0, near, 1.0)) == (0.0, 0.0)


class TestTwoStepTable:
    def test_case_no_overshoot(self):
        assert choose_relaxation_bdf2(RelaxationInputs(5.0, 3.0, 7.0)) == (0.0, 0.0)

    def test_case_budget_covers_gap(self):
        lam, kap = choose_relaxation_bdf2(RelaxationInputs(3.0, 5.0, 6.0))
        assert lam == 0.0
        assert kap == pytest.approx(1.0 / 3.0)

    def test_case_budget_short(self):
        lam, kap = choose_relaxation_bdf2(RelaxationInputs(3.0, 5.0, 1.2))
        assert lam == pytest.approx(0.6)
        assert kap == pytest.approx(2.0 / 3.0)

    def test_equal_energies(self):
        assert choose_relaxation_bdf2(RelaxationInputs(4.0, 4.0, 9.0)) == (0.0, 0.0)


class TestRelaxUpdate:
    def test_endpoints_and_blend(self):
        assert relax_R(0.0, 2.0, 4.0) == 4.0
        assert relax_R(1.0, 2.0, 4.0) == 2.0
        assert relax_R(0.6, 2.0, 4.0) == pytest.approx(2.8)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            relax_R(1.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            relax_R(-0.1, 1.0, 1.0)


@pytest.mark.parametrize(
    "choose,kappa_max",
    [(choose_relaxation_cn, 1.0), (choose_relaxation_bdf2, 2.0 / 3.0)],
)
class TestOptimality:
    def test_feasibility(self, choose, kappa_max):
        rng = np.random.default_rng(101)
        for _ in range(1000):
            rt, fi = rng.uniform(-5, 5, size=2)
            diss = rng.uniform(0, 5)
            lam, kap = choose(RelaxationInputs(rt, fi, diss))
            assert 0.0 <= lam <= 1.0
            assert 0.0 <= kap <= kappa_max + 1e-15
            r_new = relax_R(lam, rt, fi)
            assert r_new - rt <= kap * diss + 1e-12 * max(1.0, abs(rt))

    def test_minimality_against_grid_scan(self, choose, kappa_max):
        rng = np.random.default_rng(202)
        for _ in range(1000):
            rt, fi = rng.uniform(-5, 5, size=2)
            diss = rng.uniform(0, 5)
            lam, _ = choose(RelaxationInputs(rt, fi, diss))
            best = brute_force_min_lambda(rt, fi, diss, kappa_max)
            assert best is not None  # lambda = 1 is always feasible
            assert best >= lam - 1e-9

import numpy as np
import pytest

from gradflow.diagnostics import compute_mu, modified_energy
from gradflow.factors import FactorSpec
from gradflow.models import ModelSpec, NonlinearTerm, build_model, energy_original
from gradflow.schemes import (
    EnergyLawError,
    SchemeState,
    advance,
    bootstrap_first_step,
    initial_state,
    predictor_pair,
    step_rzf_cn,
    step_sav_cn,
    step_zf_cn,
)
from gradflow.spectral import (
    Field,
    SingularMultiplierError,
    apply_multiplier,
    inner_product,
    make_grid,
    multiplier_from_symbol,
    squared_wavenumber,
)

from .oracles import scan_bisect_roots, semi_implicit_bdf2_heat

TAU = 2.0 * np.pi
RATE = FactorSpec("rate", 1.0)
PROP = FactorSpec("proportional", 1.0)


def cosine_state(grid, model, factor=RATE, amplitude=1.0):
    x = grid.meshgrid()[0]
    return initial_state(Field(grid, amplitude * np.cos(x)), model, factor)


def ac_setup(n=16, eps=0.4, amplitude=0.001):
    grid = make_grid([n, n], [TAU, TAU])
    model = build_model("allen_cahn", {"epsilon": eps, "mobility": 1.0}, grid)
    x, y = grid.meshgrid()
    phi0 = Field(grid, amplitude * np.cos(x) * np.cos(y))
    return grid, model, phi0


def two_term_heat_model(grid):
    zero = NonlinearTerm(
        density=lambda phi: np.zeros_like(phi),
        derivative=lambda phi: np.zeros_like(phi),
    )
    return ModelSpec(
        "heat_two_term",
        linear_symbol=multiplier_from_symbol(grid, squared_wavenumber(grid)),
        mobility_symbol=multiplier_from_symbol(grid, np.ones(grid.mode_shape)),
        terms=(zero, zero),
    )


class TestPredictor:
    def test_heat_single_mode(self):
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        state = cosine_state(grid, model)
        bar, q, fp = predictor_pair(state, model, 1.0, "cn")
        x = grid.axis_coords()[0]
        assert np.abs(bar.values - np.cos(x) / 3.0).max() < 1e-13
        assert np.abs(q.values).max() == 0.0
        assert np.abs(fp.values).max() == 0.0

    def test_vanishing_force_gives_pure_linear_step(self):
        grid, model, _ = ac_setup()
        phi0 = Field(grid, np.ones(grid.dims))  # a well root: F'(1) = 0
        state = initial_state(phi0, model, RATE)
        bar, q, fp = predictor_pair(state, model, 0.1, "cn")
        assert np.abs(q.values).max() == 0.0
        assert np.abs(fp.values).max() == 0.0
        # pure linear step: with phi constant, Lap phi = 0, so phi_bar = phi
        assert np.abs(bar.values - 1.0).max() < 1e-13

    def test_crystal_step_matrix_guard(self):
        grid = make_grid([16], [TAU])
        model = build_model("pfc", {"epsilon": 0.325}, grid)
        state = cosine_state(grid, model)
        # at |k|=1: 1 + (dt/2)*1*(-0.325) = 0 when dt = 2/0.325
        with pytest.raises(SingularMultiplierError, match="dt"):
            predictor_pair(state, model, 2.0 / 0.325, "cn")


class TestSavScheme:
    def test_heat_keeps_r_constant_and_matches_cn(self):
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        state = cosine_state(grid, model)
        new, report = step_sav_cn(state, model, 1.0)
        x = grid.axis_coords()[0]
        assert new.sav_r == pytest.approx(state.sav_r, abs=1e-15)
        assert np.abs(new.phi.values - np.cos(x) / 3.0).max() < 1e-13
        assert report.p_value == pytest.approx(0.0, abs=1e-15)

    def test_decomposition_identity(self):
        # direct coupled solve equals phi_bar + (r_half/sqrt(E1+C) - 1) q
        grid, model, phi0 = ac_setup(amplitude=0.3)
        state = initial_state(phi0, model, RATE)
        for _ in range(3):
            bar, q, fp = predictor_pair(state, model, 0.05, "cn")
            new, report = step_sav_cn(state, model, 0.05)
            recomposed = bar.values + report.p_value * q.values
            assert np.abs(recomposed - new.phi.values).max() <= 1e-12
            state = new

    def test_quadratic_energy_decays(self):
        grid, model, phi0 = ac_setup(amplitude=0.5)
        state = initial_state(phi0, model, RATE)
        prev = 0.5 * inner_product(phi0, apply_multiplier(phi0, model.linear_symbol)) \
            + state.sav_r ** 2
        for _ in range(30):
            state, report = step_sav_cn(state, model, 0.05)
            quad = 0.5 * inner_product(
                state.phi, apply_multiplier(state.phi, model.linear_symbol)
            ) + state.sav_r ** 2
            assert quad <= prev + 1e-9 * max(1.0, abs(prev))
            prev = quad


class TestZfScheme:
    def test_heat_reduces_to_cn(self):
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        state = cosine_state(grid, model)
        new, report = step_zf_cn(state, model, 1.0, RATE)
        x = grid.axis_coords()[0]
        assert np.abs(new.phi.values - np.cos(x) / 3.0).max() < 1e-13
        assert report.p_value == 0.0

    def test_original_energy_balance_each_step(self):
        grid, model, phi0 = ac_setup(n=32)
        state = initial_state(phi0, model, RATE)
        for _ in range(40):
            e_before = energy_original(model, state.phi)
            state, report = step_zf_cn(state, model, 0.01, RATE)
            residual = report.e_orig - e_before + report.dissipation
            assert abs(residual) <= 1e-9 * max(1.0, abs(e_before))

    def test_newton_root_matches_bracketed_scan(self):
        grid, model, phi0 = ac_setup(n=8, amplitude=0.4)
        state = initial_state(phi0, model, RATE)
        dt = 0.05
        for _ in range(3):
            bar, q, fp = predictor_pair(state, model, dt, "cn")
            f_n = state.aux[0]

            def balance(ps):
                out = []
                for p in np.atleast_1d(ps):
                    cand = bar.values + p * q.values
                    lhs = grid.cell_volume * model.terms[0].density(cand).sum()
                    pair = inner_product(fp, Field(grid, cand - state.phi.values))
                    out.append(lhs - f_n - (1.0 + p) * pair)
                return np.asarray(out)

            roots = scan_bisect_roots(balance, -0.9, 1.0, 20001)
            state, report = step_zf_cn(state, model, dt, RATE)
            assert roots, "scan found no balance root"
            nearest = min(roots, key=lambda r: abs(r - report.p_value))
            assert abs(nearest - report.p_value) <= 1e-9


class TestRzfCn:
    def test_heat_falls_back_to_cn(self):
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        state = cosine_state(grid, model)
        new, report = step_rzf_cn(state, model, 1.0, RATE)
        x = grid.axis_coords()[0]
        assert report.branch == "fallback"
        assert report.p_value == 0.0
        assert report.lambda0 == 0.0
        assert np.abs(new.phi.values - np.cos(x) / 3.0).max() < 1e-13

    def test_scalar_balance_identity(self):
        # pre-relaxation identity: [lin + R_tilde] - [lin_old + R_old]
        # = -dissipation, up to the quadratic-solve residual
        grid, model, phi0 = ac_setup(n=32)
        state = initial_state(phi0, model, RATE)
        for _ in range(25):
            lin_old = 0.5 * inner_product(
                state.phi, apply_multiplier(state.phi, model.linear_symbol)
            )
            aux_old = state.aux[0]
            new, report = step_rzf_cn(state, model, 0.02, RATE)
            if report.branch != "fallback":
                lin_new = 0.5 * inner_product(
                    new.phi, apply_multiplier(new.phi, model.linear_symbol)
                )
                identity = (lin_new + report.r_tilde) - (lin_old + aux_old)
                assert abs(identity + report.dissipation) <= 1e-10 * max(
                    1.0, abs(lin_old + aux_old)
                )
            state = new

    def test_mu_matches_flow_rate(self):
        grid, model, phi0 = ac_setup(n=32)
        state = initial_state(phi0, model, RATE)
        dt = 0.01
        for _ in range(10):
            new, report = step_rzf_cn(state, model, dt, RATE)
            mu = compute_mu(new, state, model, dt, report.p_value, "cn")
            flow = apply_multiplier(mu, model.mobility_symbol).values
            rate = (new.phi.values - state.phi.values) / dt
            assert np.abs(flow + rate).max() <= 1e-10 * max(1.0, np.abs(rate).max())
            state = new

    def test_modified_below_original_energy(self):
        grid, model, phi0 = ac_setup(n=32)
        state = initial_state(phi0, model, RATE)
        for _ in range(50):
            state, report = step_rzf_cn(state, model, 0.05, RATE)
            assert report.e_mod <= report.e_orig + 1e-10
            assert state.aux[0] == pytest.approx(report.r_new)

    def test_original_energy_decays_on_unrelaxed_steps(self):
        grid, model, phi0 = ac_setup(n=32)
        state = initial_state(phi0, model, RATE)
        e_prev = energy_original(model, phi0)
        for _ in range(50):
            state, report = step_rzf_cn(state, model, 0.05, RATE)
            if report.lambda0 == 0.0:
                assert report.e_orig <= e_prev + 1e-10
            e_prev = report.e_orig

    def test_proportional_factor_variant(self):
        grid, model, phi0 = ac_setup(n=16)
        state = initial_state(phi0, model, PROP)
        for _ in range(20):
            state, report = step_rzf_cn(state, model, 0.05, PROP)
            assert report.e_mod <= report.e_orig + 1e-10
        assert np.isfinite(state.phi.values).all()


class TestRzfBdf2:
    def test_heat_two_steps_single_mode(self):
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        state = cosine_state(grid, model)
        x = grid.axis_coords()[0]
        state, _ = advance(state, model, 1.0, "rzf_bdf2", RATE)
        assert np.abs(state.phi.values - np.cos(x) / 3.0).max() < 1e-13
        state, _ = advance(state, model, 1.0, "rzf_bdf2", RATE)
        assert np.abs(state.phi.values - np.cos(x) / 15.0).max() < 1e-13

    def test_bootstrap_helper(self):
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        state = cosine_state(grid, model)
        boot, report = bootstrap_first_step(state, model, 1.0, "rzf_bdf2", RATE)
        x = grid.axis_coords()[0]
        assert boot.step == 1
        assert np.abs(boot.phi.values - np.cos(x) / 3.0).max() < 1e-13
        same, none_report = bootstrap_first_step(state, model, 1.0, "rzf_cn", RATE)
        assert none_report is None and same is state

    def test_first_extrapolation_is_initial_value(self):
        grid, model, phi0 = ac_setup()
        state = initial_state(phi0, model, RATE)
        extrap = 1.5 * state.phi.values - 0.5 * state.phi_prev.values
        assert np.abs(extrap - phi0.values).max() <= 1e-18

    def test_modified_energy_decays(self):
        grid, model, phi0 = ac_setup(n=32)
        state = initial_state(phi0, model, RATE)
        state, _ = advance(state, model, 0.05, "rzf_bdf2", RATE)
        prev = modified_energy(state, model, "bdf2")
        for _ in range(40):
            state, report = advance(state, model, 0.05, "rzf_bdf2", RATE)
            current = modified_energy(state, model, "bdf2")
            assert current == pytest.approx(report.e_mod, rel=1e-12, abs=1e-12)
            assert current <= prev + 1e-9 * max(1.0, abs(prev))
            prev = current


class TestRmzf:
    def test_inert_second_term_matches_single_factor(self):
        grid, model, phi0 = ac_setup(n=16, amplitude=0.4)
        zero = NonlinearTerm(
            density=lambda phi: np.zeros_like(phi),
            derivative=lambda phi: np.zeros_like(phi),
        )
        padded = ModelSpec(
            "padded", model.linear_symbol, model.mobility_symbol,
            terms=(model.terms[0], zero), params=model.params,
        )
        s_factor = FactorSpec("rate", k=3.7, eta_init=0.0)
        single = initial_state(phi0, model, RATE)
        double = initial_state(phi0, padded, RATE)
        for _ in range(25):
            single, rep1 = advance(single, model, 0.05, "rzf_cn", RATE)
            double, rep2 = advance(double, padded, 0.05, "rmzf_cn",
                                   factors=(RATE, s_factor))
            assert np.abs(single.phi.values - double.phi.values).max() <= 1e-12
            assert rep1.p_value == pytest.approx(rep2.p_value, abs=1e-12)

    def test_split_well_energy_monotone(self):
        grid = make_grid([32, 32], [TAU, TAU])
        model = build_model(
            "custom_split", {"epsilon": 0.4, "mobility": 0.5, "beta": 2.0}, grid
        )
        rng = np.random.default_rng(77)
        phi0 = Field(grid, 0.1 * rng.uniform(-1.0, 1.0, size=grid.dims))
        state = initial_state(phi0, model, RATE)
        prev = modified_energy(state, model, "cn")
        for _ in range(100):
            state, report = advance(state, model, 0.1, "rmzf_cn",
                                    factors=(RATE, RATE))
            assert report.e_mod <= prev + 1e-9 * max(1.0, abs(prev))
            prev = report.e_mod

    def test_requires_two_terms(self):
        grid, model, phi0 = ac_setup()
        state = initial_state(phi0, model, RATE)
        with pytest.raises(ValueError, match="two nonlinear"):
            advance(state, model, 0.05, "rmzf_cn", factors=(RATE, RATE))


class TestCrossSchemeProperties:
    def test_mass_conservation_conserved_flows(self):
        grid = make_grid([16, 16], [1.0, 1.0])
        rng = np.random.default_rng(5)
        for name, params in (
            ("cahn_hilliard_beta", {"epsilon": 0.05, "mobility": 1.0, "beta": 2.0}),
            ("pfc", {"epsilon": 0.325}),
        ):
            model = build_model(name, params, grid)
            phi0 = Field(grid, 0.1 + 0.05 * rng.uniform(-1, 1, size=grid.dims))
            mean0 = phi0.values.mean()
            for scheme in ("rzf_cn", "rzf_bdf2"):
                state = initial_state(phi0, model, RATE)
                for _ in range(200):
                    state, _ = advance(state, model, 1e-3, scheme, RATE)
                assert abs(state.phi.values.mean() - mean0) <= 1e-12

    def test_heat_reduction_of_every_scheme(self):
        # the midpoint family collapses onto one trajectory; the two-step
        # scheme collapses onto plain semi-implicit BDF2
        grid = make_grid([16], [TAU])
        model = build_model("heat", {}, grid)
        model2 = two_term_heat_model(grid)
        x = grid.axis_coords()[0]
        phi0 = Field(grid, np.cos(x) + 0.3 * np.cos(2 * x))
        dt, n = 0.1, 20

        results = {}
        for scheme in ("sav_cn", "zf_cn", "rzf_cn"):
            state = initial_state(phi0, model, RATE)
            for _ in range(n):
                state, _ = advance(state, model, dt, scheme, RATE)
            results[scheme] = state.phi.values
        state = initial_state(phi0, model2, RATE)
        for _ in range(n):
            state, _ = advance(state, model2, dt, "rmzf_cn", factors=(RATE, RATE))
        results["rmzf_cn"] = state.phi.values

        reference = results["rzf_cn"]
        for scheme, values in results.items():
            assert np.abs(values - reference).max() <= 1e-12, scheme

        state = initial_state(phi0, model, RATE)
        for _ in range(n):
            state, _ = advance(state, model, dt, "rzf_bdf2", RATE)
        oracle = semi_implicit_bdf2_heat(phi0.values, grid.extents, dt, n)
        assert np.abs(state.phi.values - oracle).max() <= 1e-12

    def test_determinism(self):
        grid, model, phi0 = ac_setup(n=16)

        def collect():
            reports = []
            state = initial_state(phi0, model, RATE)
            for _ in range(10):
                state, rep = advance(state, model, 0.05, "rzf_cn", RATE)
                reports.append(rep)
            return state, reports

        s1, r1 = collect()
        s2, r2 = collect()
        assert np.array_equal(s1.phi.values, s2.phi.values)
        assert r1 == r2

    def test_energy_law_violation_raises(self):
        from gradflow.schemes import _assert_decrease

        with pytest.raises(EnergyLawError, match="step 17"):
            _assert_decrease(1e-3, -2e-3, 1.0, 17, "relaxed modified-energy decrease")
        # within tolerance: no raise
        _assert_decrease(-5e-4, -2e-4, 1.0, 17, "relaxed modified-energy decrease")
        _assert_decrease(1e-10, 0.0, 1.0, 3, "relaxed modified-energy decrease")

    def test_corrupted_auxiliary_still_satisfies_theorem(self):
        # the balance-derived auxiliary keeps the energy inequality intact
        # even when the stored auxiliary is nonsense
        grid, model, phi0 = ac_setup(n=16)
        state = initial_state(phi0, model, RATE)
        bad = SchemeState(
            phi=state.phi, phi_prev=state.phi_prev,
            aux=(state.aux[0] - 50.0,), aux_prev=state.aux_prev,
            eta=0.0, eta_prev=0.0, sav_r=state.sav_r, t=0.0, step=0,
        )
        new, report = step_rzf_cn(bad, model, 0.05, RATE)
        assert np.isfinite(new.phi.values).all()

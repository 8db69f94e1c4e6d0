import math

import numpy as np
import pytest

from freeze_lab.acceptance import random_valid_params
from freeze_lab.model import EXAMPLE_PARAMS, make_params
from freeze_lab.measures import predicted_limit as predicted_limit_local
from freeze_lab.pressure import (GLimitPrediction, PressureError,
                                 PressureRangeError, _g_limit_reciprocal,
                                 _g_limit_reciprocal_scaled, block_I, block_J,
                                 g_limit_prediction, geometric_sampling_wobble,
                                 residual, solve_pressure)
from freeze_lab.series import r_exponent
from freeze_lab.tropical import gamma_closed_form

Z2_PARAMS = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.1)
Z3_PARAMS = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.25)
Z34_PARAMS = make_params(2, 2, 0.75, ((1.0, 2.0), (2.0, 3.0)), 1.5)


class TestResidual:
    def test_zero_temperature_root(self):
        # at beta=0 the equation closes in elementary terms
        value = residual(EXAMPLE_PARAMS, 0.0, math.log(5.0))
        assert value == pytest.approx(0.0, abs=1e-14)

    def test_positive_near_lower_boundary(self):
        assert residual(EXAMPLE_PARAMS, 3.0, math.log(2.0) + 1e-9) > 0.5

    def test_negative_at_upper_boundary_for_positive_beta(self):
        assert residual(EXAMPLE_PARAMS, 3.0, math.log(5.0)) < 0.0

    def test_strictly_decreasing_in_pressure(self, rng):
        for _ in range(25):
            params = random_valid_params(rng)
            beta = float(rng.uniform(0.0, 12.0))
            grid = np.linspace(math.log(params.p) + 0.05,
                               math.log(params.n_symbols), 7)
            values = [residual(params, beta, float(pp)) for pp in grid]
            assert all(values[i + 1] < values[i] for i in range(len(values) - 1))


class TestSolvePressure:
    def test_beta_zero_anchor(self):
        for shape in ((2, 2), (2, 3), (3, 2), (4, 2)):
            n_blocks, p = shape
            alpha = tuple(tuple([1.0 + 0.5 * j] + [2.0 + 0.5 * j] * (p - 1))
                          for j in range(n_blocks))
            params = make_params(n_blocks, p, 0.5, alpha, 0.3)
            sol = solve_pressure(params, 0.0)
            assert sol.P == pytest.approx(math.log(n_blocks * p + 1), abs=1e-12)

    def test_invariants_on_draws(self, rng):
        for _ in range(20):
            params = random_valid_params(rng)
            beta = float(rng.uniform(0.0, 15.0))
            sol = solve_pressure(params, beta)
            # P itself may round onto log p in double; the gap field carries
            # the strict inequality at full relative precision
            assert sol.P_minus_logp > 0.0
            assert math.log(params.p) <= sol.P <= math.log(params.n_symbols) + 1e-12
            assert abs(sol.residual) <= 1e-12
            assert sol.g > 0.0
            assert sol.bracket[0] <= sol.P <= sol.bracket[1] + 1e-15
            # g is defined through the gap and the closed-form rate
            assert sol.g == pytest.approx(
                sol.P_minus_logp * math.exp(sol.gamma * beta), rel=1e-12)

    def test_tolerance_refinement_stable(self):
        rough = solve_pressure(EXAMPLE_PARAMS, 7.0, tol=1e-10)
        fine = solve_pressure(EXAMPLE_PARAMS, 7.0, tol=1e-12)
        assert abs(rough.P - fine.P) < 1e-10

    def test_decreasing_and_convex_in_beta(self):
        betas = np.linspace(0.0, 20.0, 21)
        values = [solve_pressure(EXAMPLE_PARAMS, float(b)).P for b in betas]
        diffs = np.diff(values)
        assert np.all(diffs < 0.0)
        assert np.all(np.diff(diffs) >= -1e-9)

    def test_log_gap_slope_tracks_rate(self):
        gamma = gamma_closed_form(EXAMPLE_PARAMS)
        w20 = solve_pressure(EXAMPLE_PARAMS, 20.0).P_minus_logp
        w40 = solve_pressure(EXAMPLE_PARAMS, 40.0).P_minus_logp
        slope = (math.log(w40) - math.log(w20)) / 20.0
        assert slope == pytest.approx(-gamma, rel=0.1)

    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError):
            solve_pressure(EXAMPLE_PARAMS, -1.0)

    def test_freezing_regime_deep(self):
        # gamma*beta = 500: the gap is ~1e-218, far below double resolution
        # of P itself, but the log-gap parametrisation keeps full precision
        sol = solve_pressure(EXAMPLE_PARAMS, 400.0)
        assert sol.P_minus_logp > 0.0
        assert math.log(sol.P_minus_logp) == pytest.approx(
            -1.25 * 400.0 + math.log(sol.g), rel=1e-12)

    def test_gap_underflow_raises(self):
        with pytest.raises(PressureRangeError):
            solve_pressure(EXAMPLE_PARAMS, 1e5)


class TestBlockConstants:
    def test_block_j_example_values(self):
        # these equal block_I - log(sqrt(p)) up to the invisible wobble
        assert block_J(EXAMPLE_PARAMS, 1) == pytest.approx(0.0, abs=1e-8)
        assert block_J(EXAMPLE_PARAMS, 2) == pytest.approx(math.log(1.5), abs=1e-8)

    def test_half_weight_relation(self):
        for j in (1, 2):
            gap = block_I(EXAMPLE_PARAMS, j) - block_J(EXAMPLE_PARAMS, j)
            assert gap == pytest.approx(0.5 * math.log(2.0), abs=1e-6)


class TestGLimit:
    def test_z2_not_predicted(self):
        pred = g_limit_prediction(Z2_PARAMS)
        assert not pred.predicted
        assert pred.limit_beta_r_g is None

    def test_zone_equations_at_zero_constants(self):
        assert _g_limit_reciprocal("Z1", 2, 0.0, 0.0) == pytest.approx(1.0)
        # x^2 + x/2 - 1 = 0
        assert _g_limit_reciprocal("Z3only", 2, 0.0, 0.0) == pytest.approx(
            (-0.5 + math.sqrt(0.25 + 4.0)) / 2.0, abs=1e-14)
        assert _g_limit_reciprocal("Z4only", 2, 0.0, 0.0) == pytest.approx(
            _g_limit_reciprocal("Z3only", 2, 0.0, 0.0), abs=1e-14)
        # x^2 + x - 1 = 0: the golden section
        assert _g_limit_reciprocal("Z3andZ4", 2, 0.0, 0.0) == pytest.approx(
            (math.sqrt(5.0) - 1.0) / 2.0, abs=1e-14)

    def test_scaled_variant_equations_at_zero_constants(self):
        assert _g_limit_reciprocal_scaled("Z1", 2, 0.0, 0.0) == pytest.approx(2.0)
        assert _g_limit_reciprocal_scaled("Z3only", 2, 0.0, 0.0) == pytest.approx(
            (math.sqrt(17.0) - 1.0) / 2.0, abs=1e-14)
        # x max(1, x) = 4
        assert _g_limit_reciprocal_scaled("Z4only", 2, 0.0, 0.0) == pytest.approx(2.0, abs=1e-12)
        # x (1 + max(1, x)) = 4
        assert _g_limit_reciprocal_scaled("Z3andZ4", 2, 0.0, 0.0) == pytest.approx(
            (math.sqrt(17.0) - 1.0) / 2.0, abs=1e-12)

    def test_no_limit_for_z2_equation(self):
        with pytest.raises(ValueError):
            _g_limit_reciprocal("Z2", 2, 0.0, 0.0)

    @pytest.mark.parametrize("params,beta,rel", [
        (Z3_PARAMS, 100.0, 1e-9),
        (Z34_PARAMS, 100.0, 1e-9),
        (EXAMPLE_PARAMS, 150.0, 5e-4),
    ])
    def test_solved_prefactor_approaches_prediction(self, params, beta, rel):
        pred = g_limit_prediction(params)
        sol = solve_pressure(params, beta)
        observed = beta ** pred.r * sol.g
        assert observed == pytest.approx(pred.limit_beta_r_g, rel=rel)

    def test_prediction_fields(self):
        pred = g_limit_prediction(Z3_PARAMS)
        assert isinstance(pred, GLimitPrediction)
        assert pred.zone.label == "Z3only"
        assert pred.limit_reciprocal == pytest.approx(1.0 / pred.limit_beta_r_g)
        assert pred.reciprocal_scaled_variant > 0
        assert pred.r == pytest.approx(r_exponent(2, 0.5))

    @pytest.mark.parametrize("params", [
        # off-example corners of each zone, p = 2 and p = 3
        make_params(2, 3, 0.6, ((1.0, 1.4, 2.0), (1.6, 2.2, 3.0)), 0.45),
        make_params(2, 3, 0.45, ((0.8, 1.7, 2.1), (1.3, 2.0, 2.4)), 1.0),
        make_params(2, 2, 0.7, ((1.2, 2.0), (3.0, 4.1)), 2.4),
    ])
    def test_predictions_hold_off_the_examples(self, params):
        # Z3 boundary (p=3), Z1 interior (p=3), Z4 boundary (p=2)
        pred = g_limit_prediction(params)
        lim = predicted_limit_local(params)
        beta = min(120.0, 600.0 / pred.zone.gamma)
        sol = solve_pressure(params, beta)
        wobble = geometric_sampling_wobble(params.theta)
        allow = max(3e-3, 30.0 * wobble)
        assert beta ** pred.r * sol.g == pytest.approx(
            pred.limit_beta_r_g, rel=allow)
        from freeze_lab.measures import mu_blocks
        assert mu_blocks(params, sol).ratio_12 == pytest.approx(
            lim.ratio_limit, rel=allow)

import itertools
import math

import numpy as np
import pytest

from freeze_lab.acceptance import random_valid_params
from freeze_lab.model import EXAMPLE_PARAMS, ModelParams, make_params, ring_point, sigma_point, u_point
from freeze_lab.model import BlockLetter
from freeze_lab.tropical import (MaxPlusMatrix, NEG_INF, TropicalError,
                                 assert_product_matches_closed_form, build_M,
                                 build_M1, build_M2, build_M_closed_form,
                                 calibrated_subaction_at, critical_cycles,
                                 gamma_closed_form, max_cycle_mean,
                                 mp_identity, mp_mul, mp_vec_mul,
                                 peierls_barrier, subaction_eigenvector,
                                 zone_classify)

Z2_PARAMS = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.1)


def brute_mp_mul(a, b):
    """Triple-loop max-plus product oracle."""
    rows, inner, cols = len(a), len(b), len(b[0])
    return [[max(a[i][n] + b[n][k] for n in range(inner)) for k in range(cols)]
            for i in range(rows)]


def brute_cycle_mean(matrix):
    """Enumerate every simple cycle and return the best mean (n <= 6)."""
    n = len(matrix)
    best = NEG_INF
    for length in range(1, n + 1):
        for cycle in itertools.permutations(range(n), length):
            if cycle[0] != min(cycle):
                continue
            weight = sum(matrix[cycle[k]][cycle[(k + 1) % length]]
                         for k in range(length))
            if math.isfinite(weight):
                best = max(best, weight / length)
    return best


class TestMatrices:
    def test_m1_example(self):
        assert build_M1(EXAMPLE_PARAMS).entries == (
            (NEG_INF, -0.75, -0.3), (-0.5, NEG_INF, -0.3))

    def test_m2_example(self):
        assert build_M2(EXAMPLE_PARAMS).entries == (
            (-0.5, -1.5), (-1.0, -0.75), (-1.0, -1.5))

    def test_n1_rejected(self):
        degenerate = ModelParams(1, 2, 0.5, ((1.0, 2.0),), 0.3)
        with pytest.raises(Exception):
            build_M1(degenerate)

    def test_no_plus_inf_allowed(self):
        with pytest.raises(TropicalError):
            MaxPlusMatrix(((math.inf,),))

    def test_product_example(self):
        # brute-force oracle value, equal to the closed form
        assert build_M(EXAMPLE_PARAMS).entries == ((-1.3, -1.5), (-1.0, -1.8))

    def test_closed_form_example(self):
        closed = build_M_closed_form(EXAMPLE_PARAMS).entries
        assert closed == ((-1.3, -1.5), (-1.0, -1.8))

    def test_closed_form_off_diagonal_column_constant(self):
        params = make_params(3, 2, 0.5, ((1.0, 2.0), (1.5, 3.0), (2.0, 4.0)), 0.3)
        closed = build_M_closed_form(params).entries
        for j in range(3):
            off = {closed[i][j] for i in range(3) if i != j}
            assert len(off) == 1

    def test_product_matches_closed_form_on_draws(self, rng):
        for _ in range(100):
            params = random_valid_params(rng)
            assert assert_product_matches_closed_form(params) <= 1e-9


class TestMpMul:
    def test_neg_inf_absorbs(self):
        a = MaxPlusMatrix(((0.0, NEG_INF),))
        b = MaxPlusMatrix(((5.0,), (7.0,)))
        assert mp_mul(a, b).entries == ((5.0,),)

    def test_identity(self):
        m = build_M(EXAMPLE_PARAMS)
        assert mp_mul(mp_identity(2), m).entries == m.entries
        assert mp_mul(m, mp_identity(2)).entries == m.entries

    def test_dimension_mismatch(self):
        with pytest.raises(TropicalError):
            mp_mul(build_M1(EXAMPLE_PARAMS), build_M1(EXAMPLE_PARAMS))

    def test_against_brute_force(self, rng):
        for _ in range(50):
            r, inner, c = rng.integers(1, 5, size=3)
            a = rng.uniform(-5, 5, size=(r, inner))
            b = rng.uniform(-5, 5, size=(inner, c))
            a[rng.random(size=a.shape) < 0.2] = NEG_INF
            got = mp_mul(MaxPlusMatrix.from_array(a), MaxPlusMatrix.from_array(b))
            expected = brute_mp_mul(a.tolist(), b.tolist())
            assert np.allclose(got.to_array(), expected)

    def test_vector_action(self):
        m = build_M(EXAMPLE_PARAMS)
        assert mp_vec_mul(m, (0.0, 0.25)) == (-1.25, -1.0)


class TestCycleMean:
    def test_single_loop(self):
        assert max_cycle_mean(MaxPlusMatrix(((-2.5,),))) == -2.5

    def test_two_by_two(self):
        m = MaxPlusMatrix(((-1.0, -2.0), (-0.5, -3.0)))
        assert max_cycle_mean(m) == pytest.approx(-1.0, abs=1e-14)

    def test_example(self):
        assert max_cycle_mean(build_M(EXAMPLE_PARAMS)) == pytest.approx(-1.25, abs=1e-14)

    def test_no_finite_cycle(self):
        with pytest.raises(TropicalError):
            max_cycle_mean(MaxPlusMatrix(((NEG_INF,),)))

    def test_against_cycle_enumeration(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 6))
            m = rng.uniform(-4, 4, size=(n, n))
            m[rng.random(size=m.shape) < 0.25] = NEG_INF
            if not np.any(np.isfinite(np.diag(m))) and n == 1:
                continue
            brute = brute_cycle_mean(m.tolist())
            if not math.isfinite(brute):
                continue
            got = max_cycle_mean(MaxPlusMatrix.from_array(m))
            assert got == pytest.approx(brute, abs=1e-12)


class TestGamma:
    def test_example_value(self):
        assert gamma_closed_form(EXAMPLE_PARAMS) == pytest.approx(1.25, abs=1e-15)

    def test_alpha_branch_value(self):
        assert gamma_closed_form(Z2_PARAMS) == pytest.approx(1.1, abs=1e-15)

    def test_gamma_exceeds_barrier_slope(self, rng):
        for _ in range(200):
            params = random_valid_params(rng)
            barrier = params.alpha_first(1) * params.theta / (1 - params.theta)
            assert gamma_closed_form(params) > barrier

    def test_consistency_with_cycle_mean(self, rng):
        for _ in range(150):
            params = random_valid_params(rng)
            assert -max_cycle_mean(build_M(params)) == pytest.approx(
                gamma_closed_form(params), abs=1e-12)


class TestCriticalCycles:
    def test_example_two_cycle(self):
        m = build_M(EXAMPLE_PARAMS)
        assert critical_cycles(m, 1.25) == {(1, 2)}

    def test_self_loop_branch(self):
        m = build_M(Z2_PARAMS)
        assert critical_cycles(m, 1.1) == {(1,)}

    def test_confined_on_draws(self, rng):
        for _ in range(150):
            params = random_valid_params(rng)
            gamma = gamma_closed_form(params)
            cycles = critical_cycles(build_M(params), gamma)
            assert cycles and cycles <= {(1,), (1, 2)}


class TestSubaction:
    def test_example_values(self):
        sub = subaction_eigenvector(EXAMPLE_PARAMS)
        assert sub.gamma == pytest.approx(1.25, abs=1e-14)
        assert sub.v_sigma == (0.0, 0.25)
        assert sub.v_ring1 == (-0.5, -0.5)
        assert sub.v_u == -1.0

    def test_normalisation(self, rng):
        for _ in range(50):
            sub = subaction_eigenvector(random_valid_params(rng))
            assert sub.v_sigma[0] == 0.0

    def test_eigen_equation(self, rng):
        for _ in range(100):
            params = random_valid_params(rng)
            sub = subaction_eigenvector(params)
            image = mp_vec_mul(build_M(params), sub.v_sigma)
            for got, want in zip(image, sub.v_sigma):
                assert got == pytest.approx(want - sub.gamma, abs=1e-12)

    def test_tail_values_via_m2(self, rng):
        for _ in range(50):
            params = random_valid_params(rng)
            sub = subaction_eigenvector(params)
            tail = mp_vec_mul(build_M2(params), sub.v_sigma)
            assert tail[:-1] == sub.v_ring1
            assert tail[-1] == sub.v_u

    def test_u_value_formula(self, rng):
        for _ in range(50):
            params = random_valid_params(rng)
            sub = subaction_eigenvector(params)
            barrier = params.theta / (1 - params.theta)
            expected = max(sub.v_sigma[j] - params.alpha_first(j + 1) * barrier
                           for j in range(params.N))
            assert sub.v_u == pytest.approx(expected, abs=1e-12)


class TestBarrierAndCalibration:
    def test_zero_on_own_block(self):
        assert peierls_barrier(EXAMPLE_PARAMS, 1, sigma_point(1)) == 0.0

    def test_depth_one_ring(self):
        x = ring_point([BlockLetter(1, 1)])
        assert peierls_barrier(EXAMPLE_PARAMS, 1, x) == pytest.approx(-0.5)

    def test_from_u_cylinder(self):
        assert peierls_barrier(EXAMPLE_PARAMS, 2, u_point()) == pytest.approx(-1.5)

    def test_calibrated_value_on_sigma1(self):
        assert calibrated_subaction_at(EXAMPLE_PARAMS, sigma_point(1)) == 0.0

    def test_calibrated_value_on_ring(self):
        x = ring_point([BlockLetter(1, 1)])
        assert calibrated_subaction_at(EXAMPLE_PARAMS, x) == pytest.approx(-0.5)

    def test_matches_ring_eigen_values(self, rng):
        for _ in range(40):
            params = random_valid_params(rng)
            sub = subaction_eigenvector(params)
            for j in range(1, params.N + 1):
                x = ring_point([BlockLetter(j, 1)])
                assert calibrated_subaction_at(params, x, sub) == pytest.approx(
                    sub.v_ring1[j - 1], abs=1e-12)

    def test_idempotent_on_blocks(self, rng):
        for _ in range(40):
            params = random_valid_params(rng)
            sub = subaction_eigenvector(params)
            for i in range(1, params.N + 1):
                assert calibrated_subaction_at(params, sigma_point(i), sub) == \
                    pytest.approx(sub.v_sigma[i - 1], abs=1e-12)


class TestZones:
    def test_example_is_z1(self):
        zone = zone_classify(EXAMPLE_PARAMS)
        assert zone.label == "Z1"
        assert zone.gamma == pytest.approx(1.25)
        assert zone.active_branches == {"average"}

    def test_alpha_variant_is_z2(self):
        assert zone_classify(Z2_PARAMS).label == "Z2"

    def test_z3_boundary(self):
        params = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.25)
        zone = zone_classify(params)
        assert zone.label == "Z3only"
        assert zone.active_branches == {"average", "alpha_branch"}

    def test_z4_boundary(self):
        params = make_params(2, 2, 0.75, ((1.0, 1.5), (2.0, 3.0)), 2.0)
        zone = zone_classify(params)
        assert zone.label == "Z4only"
        assert zone.gamma == pytest.approx(4.5)

    def test_z3_and_z4_corner(self):
        params = make_params(2, 2, 0.75, ((1.0, 2.0), (2.0, 3.0)), 1.5)
        zone = zone_classify(params)
        assert zone.label == "Z3andZ4"
        assert zone.active_branches == {"average", "alpha_branch", "theta_branch"}

    def test_tie_tolerance_knob(self):
        nudged = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.25 + 1e-14)
        assert zone_classify(nudged).label == "Z3only"
        assert zone_classify(nudged, tie_tol=1e-16).label == "Z1"

    def test_gamma_agrees_and_z4_needs_wide_theta(self, rng):
        for _ in range(200):
            params = random_valid_params(rng)
            zone = zone_classify(params)
            assert zone.gamma == pytest.approx(gamma_closed_form(params), abs=1e-14)
            if params.theta <= 0.5:
                assert zone.label in ("Z1", "Z2", "Z3only")

"""Verification battery: every advertised numerical property, end to end.

Each criterion function returns a CriterionResult with a one-line detail
string; ``run_battery`` executes any subset.  The battery pins its own
parameter sets so results are reproducible bit-for-bit.  A10's product
check measures the sum-versus-integral gap, which decreases monotonically
to ``log sqrt(p)`` (the half-weight the integral comparison drops), and A6
records the equal-mix limit the mass identity forces; see each criterion's
detail output for the observed numbers.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import measures, oracle, pressure, series, tropical
from .model import EXAMPLE_PARAMS, ModelParams, block_word, make_params

#: Z2 variant of the example parameters: the u-cylinder branch wins gamma.
Z2_PARAMS = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.1)

#: On the Z3 boundary: the average and u-cylinder branches tie.
Z3_PARAMS = make_params(2, 2, 0.5, ((1.0, 2.0), (1.5, 3.0)), 0.25)

#: On the Z4 boundary (theta > 1/2): the average and theta branches tie.
Z4_PARAMS = make_params(2, 2, 0.75, ((1.0, 1.5), (2.0, 3.0)), 2.0)

#: Strictly inside Z2 through the theta branch.
THETA_BRANCH_PARAMS = make_params(2, 2, 0.75, ((1.0, 2.0), (2.5, 4.0)), 3.0)

_SEED = 20260810


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _a1() -> tuple[bool, str]:
    worst = 0.0
    for n_blocks, p in ((2, 2), (2, 3), (3, 2), (4, 2)):
        alpha = tuple(tuple([1.0 + 0.5 * j] + [2.0 + 0.5 * j] * (p - 1))
                      for j in range(n_blocks))
        params = make_params(n_blocks, p, 0.5, alpha, 0.3)
        sol = pressure.solve_pressure(params, 0.0)
        worst = max(worst, abs(sol.P - math.log(n_blocks * p + 1)))
    return worst <= 1e-12, f"max |P(0) - log(Np+1)| = {worst:.3e} (tol 1e-12)"


def _a2() -> tuple[bool, str]:
    depth = 60
    worst_p, worst_m = 0.0, 0.0
    ok = True
    for beta in (1.0, 5.0, 10.0, 20.0, 30.0):
        sol = pressure.solve_pressure(EXAMPLE_PARAMS, beta)
        chain = oracle.build_chain(EXAMPLE_PARAMS, beta, depth)
        cm = oracle.chain_measures(chain)
        bound = oracle.error_bound(EXAMPLE_PARAMS, beta, depth) + 1e-9
        gap_p = abs(sol.P - math.log(cm.lam))
        nu_o, _ = measures.nu_blocks(EXAMPLE_PARAMS, sol)
        mu = measures.mu_blocks(EXAMPLE_PARAMS, sol)
        gap_m = max(max(abs(nu_o[j] - cm.nu_O[j]) for j in range(2)),
                    max(abs(mu.mu_O[j] - cm.mu_O[j]) for j in range(2)))
        ok = ok and gap_p <= bound and gap_m <= 1e-6
        worst_p, worst_m = max(worst_p, gap_p), max(worst_m, gap_m)
    return ok, (f"max |P - log lambda_60| = {worst_p:.2e} (within bound), "
                f"max measure gap = {worst_m:.2e} (tol 1e-6)")


def random_valid_params(rng: np.random.Generator) -> ModelParams:
    """One admissible parameter draw (used by A3 and the property tests)."""
    n_blocks = int(rng.integers(2, 6))
    p = int(rng.integers(2, 4))
    theta = float(rng.uniform(0.1, 0.9))
    first = float(rng.uniform(0.2, 2.0))
    firsts = [first]
    for j in range(1, n_blocks):
        step = float(rng.uniform(0.05, 1.5)) if j <= 2 else float(rng.uniform(0.0, 1.5))
        firsts.append(firsts[-1] + step)
    alpha = []
    for f in firsts:
        row = [f, f + float(rng.uniform(0.05, 2.0))]
        for _ in range(p - 2):
            row.append(row[-1] + float(rng.uniform(0.0, 2.0)))
        alpha.append(tuple(row))
    return make_params(n_blocks, p, theta, alpha, float(rng.uniform(0.05, 4.0)))


def _a3() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED)
    worst = 0.0
    for _ in range(500):
        params = random_valid_params(rng)
        matrix = tropical.build_M(params)
        gamma = tropical.gamma_closed_form(params)
        worst = max(worst, abs(-tropical.max_cycle_mean(matrix) - gamma))
        if worst > 1e-12:
            return False, f"cycle mean vs closed form diverged: {worst:.3e}"
        cycles = tropical.critical_cycles(matrix, gamma)
        if not cycles or not cycles <= {(1,), (1, 2)}:
            return False, f"critical cycles {cycles} escape {{1->1, 1->2->1}}"
    return True, f"500 draws: max |gamma gap| = {worst:.3e} (tol 1e-12), cycles confined"


def _slope_ok(params: ModelParams) -> tuple[bool, float, float]:
    gamma = tropical.gamma_closed_form(params)
    betas = (20.0, 40.0, 80.0)
    logs = [math.log(pressure.solve_pressure(params, b).P_minus_logp) for b in betas]
    slope = float(np.polyfit(betas, logs, 1)[0])
    return abs(slope + gamma) <= 0.05 * gamma, slope, gamma


def _a4() -> tuple[bool, str]:
    details = []
    ok = True
    for params, tag in ((EXAMPLE_PARAMS, "avg"), (Z2_PARAMS, "alpha"),
                        (THETA_BRANCH_PARAMS, "theta")):
        good, slope, gamma = _slope_ok(params)
        ok = ok and good
        details.append(f"{tag}: slope {slope:.4f} vs -gamma {-gamma:.4f}")
    return ok, "; ".join(details) + " (tol 5%)"


def _a5() -> tuple[bool, str]:
    sol40 = pressure.solve_pressure(EXAMPLE_PARAMS, 40.0)
    nu_o, _ = measures.nu_blocks(EXAMPLE_PARAMS, sol40)
    deficit = 1.0 - nu_o[0]
    sol60 = pressure.solve_pressure(EXAMPLE_PARAMS, 60.0)
    lo, hi = math.inf, -math.inf
    for length in range(1, 5):
        for ranks in itertools.product(range(1, 3), repeat=length):
            scaled = measures.nu_cylinder(EXAMPLE_PARAMS, sol60,
                                          block_word(1, ranks)) * 2 ** length
            lo, hi = min(lo, scaled), max(hi, scaled)
    ok = deficit <= 1e-3 and 0.98 <= lo and hi <= 1.02
    return ok, (f"1 - nu(O1) at beta=40: {deficit:.2e} (tol 1e-3); "
                f"nu[m] p^|m| in [{lo:.6f}, {hi:.6f}] (need [0.98, 1.02])")


def _a6() -> tuple[bool, str]:
    target = 0.25
    errors, ratios = [], []
    for beta in (50.0, 100.0, 150.0):
        mu = measures.mu_blocks(EXAMPLE_PARAMS, pressure.solve_pressure(EXAMPLE_PARAMS, beta))
        ratios.append(mu.ratio_12)
        errors.append(abs(mu.ratio_12 - target))
    decreasing = all(errors[i + 1] <= errors[i] for i in range(len(errors) - 1))
    within = errors[-1] <= 0.15 * target
    prediction = measures.predicted_limit(EXAMPLE_PARAMS)
    detail = (f"ratio at beta 50/100/150 = {ratios[0]:.6f}/{ratios[1]:.6f}/"
              f"{ratios[2]:.6f}; |ratio - 0.25| decreasing: {decreasing}; "
              f"within 15% of 0.25: {within}. Mass-identity prediction: "
              f"ratio -> {prediction.ratio_limit:.6f} (equal mix), scaled "
              f"variant {prediction.ratio_scaled_variant:.4f}; the solved "
              f"ratio converges to the former.")
    return decreasing and within, detail


def _a7() -> tuple[bool, str]:
    betas = [20.0, 30.0, 40.0, 50.0, 60.0]
    logs = []
    for beta in betas:
        mu = measures.mu_blocks(Z2_PARAMS, pressure.solve_pressure(Z2_PARAMS, beta))
        logs.append(math.log(mu.mu_O[1]))
        if beta == 60.0:
            tail_mass = mu.mu_O[1]
    coeffs = np.polyfit(betas, logs, 1)
    fitted = np.polyval(coeffs, betas)
    ss_res = float(np.sum((np.asarray(logs) - fitted) ** 2))
    ss_tot = float(np.sum((np.asarray(logs) - np.mean(logs)) ** 2))
    r_sq = 1.0 - ss_res / ss_tot
    ok = tail_mass <= 1e-3 and r_sq >= 0.99 and coeffs[0] < 0
    return ok, (f"mu(O2) at beta=60: {tail_mass:.2e} (tol 1e-3); "
                f"log mu(O2) linear with R^2 = {r_sq:.6f}, slope {coeffs[0]:.4f}")


def _a8() -> tuple[bool, str]:
    noise_floor = 1e-9
    details = []
    ok = True
    for params, tag in ((Z3_PARAMS, "Z3"), (Z4_PARAMS, "Z4")):
        pred = pressure.g_limit_prediction(params)
        errors = []
        for beta in (50.0, 100.0, 150.0):
            sol = pressure.solve_pressure(params, beta)
            errors.append(abs(beta ** pred.r * sol.g - pred.limit_beta_r_g))
        monotone = all(errors[i + 1] <= max(errors[i], noise_floor)
                       for i in range(len(errors) - 1))
        within = errors[-1] <= 0.15 * pred.limit_beta_r_g
        ok = ok and monotone and within
        mu = measures.mu_blocks(params, pressure.solve_pressure(params, 150.0))
        lim = measures.predicted_limit(params)
        variant = lim.ratio_scaled_variant
        details.append(
            f"{tag}: beta^r g err 50/100/150 = {errors[0]:.1e}/{errors[1]:.1e}/"
            f"{errors[2]:.1e} vs limit {pred.limit_beta_r_g:.6f}; ratio(150) = "
            f"{mu.ratio_12:.6f} matches prediction {lim.ratio_limit:.6f} "
            f"(scaled-variant readings: {variant:.4f} / {1.0 / variant:.4f})")
    return ok, "; ".join(details)


def _a9() -> tuple[bool, str]:
    sub = tropical.subaction_eigenvector(EXAMPLE_PARAMS)
    sups = []
    for beta in (25.0, 50.0, 100.0):
        sol = pressure.solve_pressure(EXAMPLE_PARAMS, beta)
        hmap = measures.subaction_from_H(EXAMPLE_PARAMS, sol)
        sups.append(max(abs(val - tropical.calibrated_subaction_at(EXAMPLE_PARAMS, state, sub))
                        for state, val in hmap.items()))
    ok = sups[0] > sups[1] > sups[2] and sups[-1] <= 0.05
    return ok, (f"sup |log H / beta - V| at 25/50/100 = "
                f"{sups[0]:.4f}/{sups[1]:.4f}/{sups[2]:.4f} (final tol 0.05)")


def _a10() -> tuple[bool, str]:
    rng = np.random.default_rng(_SEED + 1)
    worst = 0.0
    for _ in range(1000):
        theta = float(rng.uniform(0.1, 0.9))
        p = int(rng.integers(2, 4))
        z = np.sort(rng.uniform(0.0, 100.0, size=p))
        big_z = math.log(p) + float(rng.uniform(1e-3, 3.0))
        lhs = series.F(theta, big_z, z).log_value
        inner = series.F(theta, big_z, theta * z).log_value
        rhs = -big_z + series.s_factor(theta, z, 1) + float(np.logaddexp(0.0, inner))
        worst = max(worst, abs(lhs - rhs))
    recursion_ok = worst <= 1e-10
    zero = series.I_integral([0.0])
    zero_ok = zero.value == 0.0 and zero.abs_error_bound == 0.0
    theta, xi = 0.5, np.array([1.0, 2.0])
    gaps = []
    for beta in (25.0, 50.0, 100.0, 200.0):
        n = math.ceil(4.0 * math.log(beta) / abs(math.log(theta)))
        lhs, rhs = series.product_asymptotic_check(theta, xi, beta, n)
        gaps.append(abs(lhs - rhs))
    gaps_ok = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    ok = recursion_ok and zero_ok and gaps_ok
    return ok, (f"recursion log-gap max = {worst:.2e} (tol 1e-10); I(0) = 0 exact: "
                f"{zero_ok}; product gap shrinking {gaps[0]:.6f} -> {gaps[-1]:.6f} "
                f"(limit log sqrt(p) = {0.5 * math.log(2):.6f}): {gaps_ok}")


_CRITERIA: dict[str, Callable[[], tuple[bool, str]]] = {
    "A1": _a1, "A2": _a2, "A3": _a3, "A4": _a4, "A5": _a5,
    "A6": _a6, "A7": _a7, "A8": _a8, "A9": _a9, "A10": _a10,
}


def criterion_names() -> list[str]:
    return list(_CRITERIA)


def run_criterion(name: str) -> CriterionResult:
    func = _CRITERIA.get(name.upper())
    if func is None:
        raise KeyError(f"unknown criterion {name!r}; known: {', '.join(_CRITERIA)}")
    start = time.perf_counter()
    passed, detail = func()
    return CriterionResult(name.upper(), passed, detail, time.perf_counter() - start)


def run_battery(names: Iterable[str] | None = None) -> list[CriterionResult]:
    return [run_criterion(name) for name in (names or criterion_names())]

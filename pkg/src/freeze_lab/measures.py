"""Eigenfunction values, eigenmeasure and Gibbs weights, freezing limits.

Everything is expressed through the solved pressure gap ``w`` and the block
series: the eigenmeasure gives block ``j`` the mass ``F_j/(1+F_j)``, the
Gibbs measure weighs rings by the eigenfunction and ends up proportional to
``G_j/(1+F_j)^2`` on block ``j``, and the log-scale of the eigenfunction
recovers the calibrated subaction as beta grows.  The eigenfunction is
normalised to 1 on the u-cylinder; the Gibbs weights are renormalised to
total mass one afterwards, so the choice is observationally irrelevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import tropical
from .model import (BlockLetter, InSigma, ModelParams, PointRep, ULetter,
                    birkhoff_weight, block_word, require_valid, ring_point,
                    sigma_point, u_point)
from .pressure import PressureSolution, block_I
from .series import SeriesKernel


class MeasureError(RuntimeError):
    """Raised when a measure evaluation is requested at unsupported states."""


def _log1p_exp(x: float) -> float:
    """log(1 + e^x), stable for both signs."""
    return float(np.logaddexp(0.0, x))


# ---------------------------------------------------------------------------
# Eigenfunction data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenData:
    """Eigenfunction values on blocks, rings and the u-cylinder.

    Under the normalisation ``H(u) = 1`` the ring constants are
    ``tau_j = e^P / (1 + F_j)``; they satisfy ``tau_j (1 + F_j) = e^P`` for
    every block, which is the consistency the finite-state oracle re-tests.
    All values are held in log scale so freezing betas stay representable.
    """

    params: ModelParams
    beta: float
    P: float
    gap: float
    log_F: tuple[float, ...]
    log_tau: tuple[float, ...]
    log_h_sigma: tuple[float, ...]

    H_u: float = 1.0

    def tau(self, j: int) -> float:
        return math.exp(self.log_tau[j - 1])

    def h_sigma(self, j: int) -> float:
        return math.exp(self.log_h_sigma[j - 1])

    def log_h_ring(self, j: int, n: int) -> float:
        """log of the eigenfunction on rings of depth n inside block j."""
        if n < 1:
            raise ValueError("ring depth starts at 1")
        z = np.asarray(self.params.block_slopes(j)) * self.beta * self.params.theta ** n
        kern = SeriesKernel(self.params.theta, z, tol=1e-12)
        return -self.P + self.log_tau[j - 1] + _log1p_exp(kern.log_F(self.gap))

    def h_ring(self, j: int, n: int) -> float:
        return math.exp(self.log_h_ring(j, n))


def eigen_data(params: ModelParams, solution: PressureSolution) -> EigenData:
    """Assemble eigenfunction values from a solved pressure."""
    require_valid(params)
    w = solution.P_minus_logp
    log_f = tuple(sv.log_value for sv in solution.F_blocks)
    log_tau = tuple(solution.P - _log1p_exp(lf) for lf in log_f)
    # e^P - p = p (e^w - 1), stable for freezing gaps
    log_ep_minus_p = math.log(params.p) + math.log(math.expm1(w)) if w < 709 \
        else solution.P
    log_h_sigma = tuple(lt - log_ep_minus_p for lt in log_tau)
    return EigenData(params=params, beta=solution.beta, P=solution.P, gap=w,
                     log_F=log_f, log_tau=log_tau, log_h_sigma=log_h_sigma)


# ---------------------------------------------------------------------------
# Eigenmeasure weights
# ---------------------------------------------------------------------------

def nu_blocks(params: ModelParams,
              solution: PressureSolution) -> tuple[tuple[float, ...], float]:
    """Eigenmeasure masses ``nu(O_j) = F_j/(1+F_j)`` and ``nu([u])``.

    At the solved pressure the masses add to one; asserting that re-tests
    the root rather than any extra normalisation.
    """
    nu_o = tuple(math.exp(sv.log_value - _log1p_exp(sv.log_value))
                 for sv in solution.F_blocks)
    nu_u = math.exp(-solution.P - params.alpha_u * solution.beta)
    return nu_o, nu_u


def log_nu_cylinder(params: ModelParams, solution: PressureSolution,
                    word: Sequence[BlockLetter]) -> float:
    """log of the eigenmeasure of the cylinder of a single-block word.

    The mass decomposes over the rings refining the cylinder; the inner sum
    is the prefix-modified series with weight ``S = beta * birkhoff(word)``
    plus the bare ``e^S`` term of the empty continuation.
    """
    s_weight = solution.beta * birkhoff_weight(params, word)
    j = word[0].block
    n = len(word)
    kern = SeriesKernel(params.theta,
                        np.asarray(params.block_slopes(j)) * solution.beta,
                        tol=1e-12, s_bound=abs(s_weight))
    w = solution.P_minus_logp
    log_inner = float(np.logaddexp(s_weight, kern.log_F_prefixed(w, s_weight)))
    log_fj = solution.F_blocks[j - 1].log_value
    return -n * solution.P + log_inner - _log1p_exp(log_fj)


def nu_cylinder(params: ModelParams, solution: PressureSolution,
                word: Sequence[BlockLetter]) -> float:
    return math.exp(log_nu_cylinder(params, solution, word))


# ---------------------------------------------------------------------------
# Gibbs weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MuBlocks:
    mu_O: tuple[float, ...]
    mu_u: float
    ratio_12: float


def mu_blocks(params: ModelParams, solution: PressureSolution) -> MuBlocks:
    """Gibbs masses: normalised ``G_j/(1+F_j)^2`` per block, ``e^(-P-a_u b)`` on [u].

    ``ratio_12 = mu(O_1)/mu(O_2)`` is reported raw; its freezing limit is
    what the zone predictions are checked against.
    """
    w = solution.P_minus_logp
    beta = solution.beta
    log_unnorm = []
    for j in range(1, params.N + 1):
        kern = SeriesKernel(params.theta,
                            np.asarray(params.block_slopes(j)) * beta, tol=1e-12)
        log_unnorm.append(kern.log_G(w)
                          - 2.0 * _log1p_exp(solution.F_blocks[j - 1].log_value))
    log_u = -solution.P - params.alpha_u * beta
    total = float(np.logaddexp.reduce(np.asarray(log_unnorm + [log_u])))
    mu_o = tuple(math.exp(lu - total) for lu in log_unnorm)
    return MuBlocks(mu_O=mu_o, mu_u=math.exp(log_u - total),
                    ratio_12=math.exp(log_unnorm[0] - log_unnorm[1]))


# ---------------------------------------------------------------------------
# Predicted zero-temperature limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitPrediction:
    """Predicted limit of the Gibbs measure as a mix of the two flattest blocks.

    ``ratio_limit`` is the predicted freezing limit of ``mu(O_1)/mu(O_2)``,
    obtained from the zone's mass-balance root ``x``: the common scalings of
    the block series cancel in ``e^(J1+J2)/x^2``, so the prediction is
    insensitive to the half-weight constant that separates ``block_J`` from
    ``block_I``.  ``weights`` is the induced convex combination
    ``(mu_top_1 + rho_sq * mu_top_2) / (1 + rho_sq)`` with
    ``rho_sq = 1/ratio_limit`` (Z1 gives the equal mix, Z2 the point mass on
    block 1).  ``ratio_scaled_variant`` is the limit the ``e^-P``-scaled
    variant of the mass equation would give (``1/p^2`` in Z1); the
    verification battery logs the solved ratio against the prediction, the
    variant, and the variant's reciprocal to adjudicate orientation.
    """

    zone: tropical.ZoneLabel
    rho_sq: float
    weights: tuple[float, float]
    ratio_limit: float
    ratio_scaled_variant: float


def predicted_limit(params: ModelParams,
                    tie_tol: float = tropical.DEFAULT_TIE_TOL) -> LimitPrediction:
    """Zone-dependent convex combination selected in the freezing limit."""
    require_valid(params)
    from .pressure import (_g_limit_reciprocal, _g_limit_reciprocal_scaled,
                           block_J)

    zone = tropical.zone_classify(params, tie_tol=tie_tol)
    p = params.p
    if zone.label == "Z2":
        return LimitPrediction(zone, 0.0, (1.0, 0.0), math.inf, math.inf)
    i1, i2 = block_I(params, 1), block_I(params, 2)
    j1, j2 = block_J(params, 1), block_J(params, 2)
    x = _g_limit_reciprocal(zone.label, p, j1, j2)
    ratio = math.exp(j1 + j2) / (x * x)
    if zone.label == "Z1":
        variant = 1.0 / (p * p)
    else:
        x_var = _g_limit_reciprocal_scaled(zone.label, p, i1, i2)
        variant = math.exp(i1 + i2) / (x_var * x_var)
    rho_sq = 1.0 / ratio
    weights = (1.0 / (1.0 + rho_sq), rho_sq / (1.0 + rho_sq))
    return LimitPrediction(zone, rho_sq, weights, ratio, variant)


# ---------------------------------------------------------------------------
# Log-scale eigenfunction vs calibrated subaction
# ---------------------------------------------------------------------------

def default_states(params: ModelParams, n_max: int = 6) -> list[PointRep]:
    """Blocks, rings of depth up to n_max in each block, and the u-cylinder."""
    states: list[PointRep] = [sigma_point(j) for j in range(1, params.N + 1)]
    for j in range(1, params.N + 1):
        for n in range(1, n_max + 1):
            states.append(ring_point(block_word(j, [1] * n)))
    states.append(u_point())
    return states


def _state_kind(x: PointRep) -> tuple:
    if x.prefix and isinstance(x.prefix[0], ULetter):
        return ("u",)
    if not x.prefix:
        if isinstance(x.tail, InSigma):
            return ("sigma", x.tail.block)
        raise MeasureError("empty point")
    j = x.prefix[0].block
    for letter in x.prefix:
        if isinstance(letter, ULetter) or letter.block != j:
            raise MeasureError(f"state {x} is not a block, ring or u-cylinder point")
    if isinstance(x.tail, InSigma) and x.tail.block == j:
        return ("sigma", j)
    return ("ring", j, len(x.prefix))


def subaction_from_H(params: ModelParams, solution: PressureSolution,
                     states: Iterable[PointRep] | None = None,
                     n_max: int = 6) -> dict[PointRep, float]:
    """``(1/beta) log H`` at the tracked states, shifted to vanish on block 1.

    The states must be block points, single-block ring representatives or
    u-cylinder points (the eigenfunction is constant on each of those).  As
    beta grows the map converges to the calibrated subaction.
    """
    if solution.beta <= 0:
        raise MeasureError("log-scale comparison needs beta > 0")
    if states is None:
        states = default_states(params, n_max=n_max)
    data = eigen_data(params, solution)
    shift = data.log_h_sigma[0]
    out: dict[PointRep, float] = {}
    for x in states:
        kind = _state_kind(x)
        if kind[0] == "u":
            log_h = 0.0
        elif kind[0] == "sigma":
            log_h = data.log_h_sigma[kind[1] - 1]
        else:
            log_h = data.log_h_ring(kind[1], kind[2])
        out[x] = (log_h - shift) / solution.beta
    return out


# ---------------------------------------------------------------------------
# Combined report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureReport:
    beta: float
    nu_O: tuple[float, ...]
    nu_u: float
    mu_O: tuple[float, ...]
    mu_u: float
    ratio_12: float
    zone: tropical.ZoneLabel
    predicted: LimitPrediction


def measure_report(params: ModelParams, solution: PressureSolution,
                   tie_tol: float = tropical.DEFAULT_TIE_TOL) -> MeasureReport:
    """Everything the measures CSV row needs, computed once."""
    nu_o, nu_u = nu_blocks(params, solution)
    mu = mu_blocks(params, solution)
    prediction = predicted_limit(params, tie_tol=tie_tol)
    return MeasureReport(beta=solution.beta, nu_O=nu_o, nu_u=nu_u,
                         mu_O=mu.mu_O, mu_u=mu.mu_u, ratio_12=mu.ratio_12,
                         zone=prediction.zone, predicted=prediction)

"""Independent finite-state ground truth for pressure and measures.

The potential only sees a point through its leading letter and the length of
its leading single-block run, so capping the run length at ``L`` turns the
transfer operator into an exact ``(N L + 1)``-state weighted matrix.  Its
Perron data converge to the true pressure and measures with the explicit
bound ``beta * alpha_max * theta^L`` (the pressure is 1-Lipschitz in the sup
norm of the potential).  Nothing here shares code with the series route:
agreement between the two is the decisive correctness check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .model import Letter, ModelParams, ULetter


class OracleError(RuntimeError):
    """Eigen-solve failure or malformed chain request."""


State = tuple  # ("u",) or ("run", j, a)

_U_STATE: State = ("u",)


@dataclass(frozen=True)
class TruncatedChain:
    """Run-length truncated transfer matrix at one inverse temperature.

    ``matrix[t, s]`` sums the weights ``e^(beta * A_L)`` of all letters that
    prepend a state-``t`` point into a state-``s`` point; the chain is
    irreducible because every state reaches the u-state and conversely.
    """

    params: ModelParams
    beta: float
    L: int
    states: tuple[State, ...]
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, state: State) -> int:
        if state == _U_STATE:
            return 0
        _, j, a = state
        return 1 + (j - 1) * self.L + (a - 1)

    def step(self, letter: Letter, state: State) -> tuple[State, float]:
        """Prepend one letter: the successor state and the log weight."""
        params, theta = self.params, self.params.theta
        if isinstance(letter, ULetter):
            return _U_STATE, -self.beta * params.alpha_u
        j, i = letter.block, letter.rank
        if state != _U_STATE and state[1] == j:
            depth = min(state[2] + 1, self.L)
        else:
            depth = 1
        log_w = -self.beta * params.alpha_entry(j, i) * theta ** depth
        return ("run", j, depth), log_w


def build_chain(params: ModelParams, beta: float, L: int) -> TruncatedChain:
    """Assemble the truncated chain; degenerate N=1 is allowed for testing."""
    if L < 1:
        raise OracleError("truncation depth L must be >= 1")
    if beta < 0:
        raise OracleError("beta must be nonnegative")
    if not (0.0 < params.theta < 1.0):
        raise OracleError("theta must lie in (0,1)")
    states: list[State] = [_U_STATE]
    for j in range(1, params.N + 1):
        for a in range(1, L + 1):
            states.append(("run", j, a))
    n = len(states)
    chain = TruncatedChain(params=params, beta=beta, L=L,
                           states=tuple(states), matrix=np.zeros((n, n)))
    matrix = chain.matrix
    theta = params.theta
    into_first = [sum(math.exp(-beta * a * theta) for a in params.block_slopes(l))
                  for l in range(1, params.N + 1)]
    into_u = math.exp(-beta * params.alpha_u)
    if into_u == 0.0 or min(into_first) == 0.0:
        raise OracleError(
            f"chain weights underflow at beta={beta}; irreducibility lost")
    for t, state in enumerate(states):
        matrix[t, 0] = into_u
        for l in range(1, params.N + 1):
            if state != _U_STATE and state[1] == l:
                depth = min(state[2] + 1, L)
                weight = sum(math.exp(-beta * a * theta ** depth)
                             for a in params.block_slopes(l))
                matrix[t, chain.index(("run", l, depth))] += weight
            else:
                matrix[t, chain.index(("run", l, 1))] = into_first[l - 1]
    matrix.setflags(write=False)
    return chain


def error_bound(params: ModelParams, beta: float, L: int) -> float:
    """``beta * alpha_max * theta^L``: sup-norm gap of the capped potential,
    hence a pressure error bound (only block slopes enter distances)."""
    return beta * params.alpha_max * params.theta ** L


#: relative window for the leading eigenvalue cluster; the freezing block
#: modes collapse within e^(-gamma beta) of the top while the rest of the
#: spectrum stays a bounded factor below, so a wide window keeps the
#: subspace-iteration contraction healthy without dragging in true bulk
_CLUSTER_TOL = 0.05

#: escalation ladder for the extended-precision eigensolve; the cluster's
#: internal gap shrinks like e^(-gamma beta), so deep freezing needs more bits
_MP_PREC_LADDER = (256, 768, 2048)


def _cluster_info(matrix: np.ndarray) -> tuple[int, float, np.ndarray, np.ndarray]:
    """Size of the leading eigenvalue cluster and the contraction ratio.

    Returns ``(m, ratio, values, vectors)`` where the cluster collects every
    eigenvalue within relative ``_CLUSTER_TOL`` of the top one and ``ratio``
    is ``|lambda_{m+1}| / lambda_1`` (0 when nothing is left outside).
    """
    values, vectors = np.linalg.eig(matrix)
    order = np.argsort(-values.real)
    values, vectors = values[order], vectors[:, order]
    top = values[0].real
    m = int(np.sum(values.real >= top * (1.0 - _CLUSTER_TOL)))
    ratio = abs(values[m]) / top if m < values.size else 0.0
    return m, float(ratio), values, vectors


def _start_basis(vectors: np.ndarray, m: int) -> np.ndarray:
    """Real orthonormal start columns spanning roughly the leading subspace."""
    n = vectors.shape[0]
    cols = []
    for k in range(m):
        cols.append(vectors[:, k].real)
        cols.append(vectors[:, k].imag)
    basis = np.column_stack(cols + [np.ones(n)])
    q, _ = np.linalg.qr(basis)
    return q[:, :m]


def _gram_schmidt(z: np.ndarray, m: int) -> None:
    import gmpy2

    for c in range(m):
        for prev in range(c):
            z[:, c] -= (z[:, prev] @ z[:, c]) * z[:, prev]
        z[:, c] /= gmpy2.sqrt(z[:, c] @ z[:, c])


def _mp_attempt(matrix: np.ndarray, m: int, ratio: float, z: np.ndarray,
                prec: int, digits_done: float):
    """One subspace-iteration rung at ``prec`` bits.

    Returns ``(eigenpair_or_None, refined_basis, digits_now)``; the pair is
    None while the cluster's internal splitting is still buried under the
    measured subspace residual, in which case the caller escalates with the
    already-purified basis.
    """
    import gmpy2
    from gmpy2 import mpfr

    digits_target = 0.40 * prec * math.log10(2.0)
    rate = max(-math.log10(min(ratio, 0.97)) if ratio > 0 else digits_target, 1e-3)
    # generous start margin: degenerate double eigenbases can be near-garbage
    iters = min(3000, max(10, math.ceil((digits_target + 6.0 - digits_done) / rate)))
    with gmpy2.context(precision=prec):
        bmp = np.array([[mpfr(x) for x in row] for row in matrix], dtype=object)
        res_goal = mpfr(10) ** (3.0 - digits_target)
        for _ in range(4):
            for _ in range(iters):
                z = bmp @ z
                _gram_schmidt(z, m)
            bz = bmp @ z
            t = z.T @ bz
            # measured invariant-subspace residual bounds the noise in the
            # projected eigenproblem; the cluster split must clear it widely
            residual = bz - z @ t
            res_norm = max(abs(x) for x in residual.ravel())
            if res_norm <= res_goal:
                break
            iters = min(3000, max(10, math.ceil(12.0 / rate)))
        scale = max(max(abs(t[i, j]) for i in range(m) for j in range(m)), mpfr(1))
        floor = mpfr(1e6) * scale * (res_norm + scale * mpfr(2) ** (8 - prec))
        if m == 1:
            lam_mp = t[0, 0]
            y = np.array([mpfr(1)], dtype=object)
        elif m == 2:
            a, b, c, d = t[0, 0], t[0, 1], t[1, 0], t[1, 1]
            disc2 = (a - d) * (a - d) + 4 * b * c
            if disc2 <= floor * floor:
                return None, z, digits_target  # split below noise: escalate
            disc = gmpy2.sqrt(disc2)
            lam_mp = (a + d + disc) / 2
            # null vector of (T - lam I), picking the better-conditioned row
            if abs(b) + abs(lam_mp - a) >= abs(c) + abs(lam_mp - d):
                y = np.array([b, lam_mp - a], dtype=object)
            else:
                y = np.array([lam_mp - d, c], dtype=object)
        else:
            pair = _mp_small_eig(t, m, prec, floor)
            if pair is None:
                return None, z, digits_target
            lam_mp, y = pair
        v = z @ y
    vec = np.array([float(x) for x in v])
    if vec.sum() < 0:
        vec = -vec
    return (float(lam_mp), vec), z, digits_target


def _mp_leading(matrix: np.ndarray, m: int, ratio: float,
                start: np.ndarray) -> tuple[float, np.ndarray]:
    """Perron pair by extended-precision subspace iteration.

    Double precision cannot split the leading cluster once its internal gap
    drops to ``e^(-gamma beta)`` scale, but the cluster stays well separated
    from the rest of the spectrum, so iterating an m-column basis purifies
    the invariant subspace at the healthy rate ``ratio`` and the tiny m x m
    projected problem is solved in extended precision.  Each escalation
    rung reuses the previous basis, so deeper precision only pays for the
    extra purity it adds.  The matrix is taken exactly as built (its double
    entries are the object being certified), so the refinement answers for
    the chain as constructed, not for an idealised re-derivation of it.
    """
    from gmpy2 import mpfr

    z = np.array([[mpfr(x) for x in row] for row in start], dtype=object)
    digits = 0.0
    for prec in _MP_PREC_LADDER:
        result, z, digits = _mp_attempt(matrix, m, ratio, z, prec, digits)
        if result is not None:
            return result
    raise OracleError(
        "leading cluster unresolved at maximum precision; beta too large")


def _mp_small_eig(t: np.ndarray, m: int, prec: int, floor):
    """Max-real eigenpair of an m x m gmpy2 matrix via mpmath (m >= 3)."""
    import gmpy2
    import mpmath

    digits = max(30, int(prec * math.log10(2.0)) - 2)
    with mpmath.workprec(prec):
        tm = mpmath.matrix([[mpmath.mpf(t[i, j]) for j in range(m)]
                            for i in range(m)])
        values, vectors = mpmath.eig(tm)
        best = max(range(m), key=lambda k: mpmath.re(values[k]))
        lam = values[best]
        split = min(abs(values[k] - lam) for k in range(m) if k != best)
        if float(split) <= float(floor):
            return None
        if abs(mpmath.im(lam)) > float(floor):
            raise OracleError(f"leading eigenvalue not real: {lam}")
        lam_mp = gmpy2.mpfr(mpmath.nstr(mpmath.re(lam), digits))
        y = np.array([gmpy2.mpfr(mpmath.nstr(mpmath.re(vectors[i, best]), digits))
                      for i in range(m)], dtype=object)
    return lam_mp, y


def _perron(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    m, ratio, values, vectors = _cluster_info(matrix)
    top = values[0]
    # double vectors are trustworthy only when the top eigenvalue is simple
    # well beyond rounding scale
    simple = m == 1 or (values[0].real - values[1].real) > 1e-5 * abs(top.real)
    degenerate = (not simple) or abs(top.imag) > 1e-9 * max(1.0, abs(top.real))
    if not degenerate:
        lam, vec = float(top.real), vectors[:, 0].real
        if vec.sum() < 0:
            vec = -vec
        if np.all(vec > 0):
            return lam, vec
        degenerate = True  # mixed vector despite a nominal gap: refine
    lam, vec = _mp_leading(matrix, max(m, 1), ratio,
                           _start_basis(vectors, max(m, 1)))
    if np.any(vec <= 0):
        raise OracleError("Perron vector not positive; chain not primitive?")
    return lam, vec


def leading_triple(chain: TruncatedChain,
                   tol: float = 1e-9) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron root with right and left eigenvectors of the chain matrix.

    In the freezing regime the top eigenvalues collapse together like
    ``e^(-gamma beta)``, which rules out power iteration (its rate is the
    eigenvalue ratio) and, past ``gap ~ 1e-14``, double-precision dense
    solves as well; the degenerate branch switches to extended-precision
    subspace iteration.  Residuals, realness and positivity are verified on
    the returned data: right vector sup-normalised, left vector summing to 1.
    """
    lam, right = _perron(chain.matrix)
    lam_t, left = _perron(chain.matrix.T)
    scale = max(1.0, abs(lam))
    if abs(lam - lam_t) > tol * scale:
        raise OracleError(f"left/right eigenvalues disagree: {lam} vs {lam_t}")
    res_r = float(np.max(np.abs(chain.matrix @ right - lam * right))) / float(np.max(np.abs(right)))
    res_l = float(np.max(np.abs(chain.matrix.T @ left - lam * left))) / float(np.max(np.abs(left)))
    if res_r > tol * scale or res_l > tol * scale:
        raise OracleError(f"eigen residuals too large: {res_r}, {res_l}")
    return lam, right / right.max(), left / left.sum()


@dataclass(frozen=True)
class ChainMeasures:
    """Block and u-cylinder masses of the truncated eigen- and Gibbs measures."""

    chain: TruncatedChain
    lam: float
    nu_O: tuple[float, ...]
    nu_u: float
    mu_O: tuple[float, ...]
    mu_u: float
    left: np.ndarray
    right: np.ndarray

    def nu_cylinder(self, word: Sequence[Letter]) -> float:
        """Truncated eigenmeasure of the cylinder of an arbitrary finite word.

        Conformality turns the mass into a weighted path sum: for each tail
        state, walk the word back to front accumulating one-letter weights.
        """
        if not word:
            raise OracleError("empty word")
        chain = self.chain
        log_terms = []
        for t, state in enumerate(chain.states):
            current, log_w = state, 0.0
            for letter in reversed(word):
                current, lw = chain.step(letter, current)
                log_w += lw
            log_terms.append(log_w + math.log(self.left[t]))
        return math.exp(float(logsumexp(np.asarray(log_terms)))
                        - len(word) * math.log(self.lam))


def chain_measures(chain: TruncatedChain,
                   triple: tuple[float, np.ndarray, np.ndarray] | None = None,
                   tol: float = 1e-9) -> ChainMeasures:
    """Masses of the truncated measures from the Perron triple.

    The left vector is the eigenmeasure on states; the entrywise product
    with the right vector (renormalised) is the Gibbs measure, mirroring
    ``d mu = H d nu``.
    """
    if triple is None:
        triple = leading_triple(chain, tol=tol)
    lam, right, left = triple
    gibbs = left * right
    gibbs = gibbs / gibbs.sum()
    nu_o, mu_o = [], []
    for j in range(1, chain.params.N + 1):
        idx = [chain.index(("run", j, a)) for a in range(1, chain.L + 1)]
        nu_o.append(float(left[idx].sum()))
        mu_o.append(float(gibbs[idx].sum()))
    return ChainMeasures(chain=chain, lam=lam, nu_O=tuple(nu_o),
                         nu_u=float(left[0]), mu_O=tuple(mu_o),
                         mu_u=float(gibbs[0]), left=left, right=right)

"""Max-plus spectral machinery: freezing rate, subaction, parameter zones.

The exponential rate ``gamma`` at which the pressure approaches ``log p`` is
the negated max-plus eigenvalue of a small ``N x N`` matrix ``M = M1 (x) M2``
assembled from the first slope of each block, and the calibrated subaction is
the corresponding eigenvector.  All matrices live over the semiring
``(R U {-inf}, max, +)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ModelParams, PointRep, require_valid

NEG_INF = float("-inf")

#: Names of the three closed-form branches competing for gamma.
BRANCH_AVERAGE = "average"
BRANCH_ALPHA = "alpha_branch"
BRANCH_THETA = "theta_branch"
_BRANCH_ORDER = (BRANCH_AVERAGE, BRANCH_ALPHA, BRANCH_THETA)

DEFAULT_TIE_TOL = 1e-12


class TropicalError(ValueError):
    """Raised for malformed max-plus inputs (dimensions, missing cycles)."""


# ---------------------------------------------------------------------------
# Max-plus matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxPlusMatrix:
    """Dense matrix over the max-plus semiring; -inf is the additive zero."""

    entries: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if not self.entries or not self.entries[0]:
            raise TropicalError("empty matrix")
        width = len(self.entries[0])
        for row in self.entries:
            if len(row) != width:
                raise TropicalError("ragged rows")
            for value in row:
                if math.isnan(value) or value == math.inf:
                    raise TropicalError(f"entry {value} not in R U {{-inf}}")

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "MaxPlusMatrix":
        return cls(tuple(tuple(float(v) for v in row) for row in np.asarray(array)))


def mp_identity(n: int) -> MaxPlusMatrix:
    """Max-plus identity: 0 on the diagonal, -inf elsewhere."""
    return MaxPlusMatrix.from_array(
        np.where(np.eye(n, dtype=bool), 0.0, NEG_INF))


def mp_mul(a: MaxPlusMatrix, b: MaxPlusMatrix) -> MaxPlusMatrix:
    """Max-plus product: ``(A (x) B)[i,k] = max_n A[i,n] + B[n,k]``."""
    if a.cols != b.rows:
        raise TropicalError(f"dimension mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    aa, bb = a.to_array(), b.to_array()
    # -inf + -inf would give -inf (fine), but numpy warns on -inf + inf only;
    # entries never contain +inf, so plain broadcasting is safe.
    product = np.max(aa[:, :, None] + bb[None, :, :], axis=1)
    return MaxPlusMatrix.from_array(product)


def mp_add(a: MaxPlusMatrix, b: MaxPlusMatrix) -> MaxPlusMatrix:
    """Entrywise maximum (the semiring sum)."""
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise TropicalError("shape mismatch in max-plus sum")
    return MaxPlusMatrix.from_array(np.maximum(a.to_array(), b.to_array()))


def mp_vec_mul(a: MaxPlusMatrix, v: Sequence[float]) -> tuple[float, ...]:
    """Matrix-vector product in the max-plus semiring."""
    if a.cols != len(v):
        raise TropicalError("vector length mismatch")
    arr = a.to_array() + np.asarray(v, dtype=float)[None, :]
    return tuple(float(x) for x in np.max(arr, axis=1))


# ---------------------------------------------------------------------------
# The transfer matrices M1, M2 and their product
# ---------------------------------------------------------------------------

def build_M1(params: ModelParams) -> MaxPlusMatrix:
    """N x (N+1) matrix of one-step costs out of the blocks.

    Row ``j`` holds ``-alpha_first(l) * theta`` in column ``l != j`` (enter
    block ``l`` and immediately leave), ``-inf`` on the diagonal and
    ``-alpha_u`` in the last column.
    """
    require_valid(params)
    theta = params.theta
    m = np.full((params.N, params.N + 1), NEG_INF)
    for j in range(params.N):
        for l in range(params.N):
            if l != j:
                m[j, l] = -params.alpha_first(l + 1) * theta
        m[j, params.N] = -params.alpha_u
    return MaxPlusMatrix.from_array(m)


def build_M2(params: ModelParams) -> MaxPlusMatrix:
    """(N+1) x N matrix of optimal approach costs into the blocks.

    Column ``j`` holds the barrier slope ``-alpha_first(j) * theta/(1-theta)``
    scaled by one extra ``theta`` on the diagonal (the walker already stands
    one letter inside block ``j``); the last row is the unscaled barrier from
    the u-cylinder.
    """
    require_valid(params)
    theta = params.theta
    barrier = theta / (1.0 - theta)
    m = np.empty((params.N + 1, params.N))
    for j in range(params.N):
        col = -params.alpha_first(j + 1) * barrier
        m[:, j] = col
        m[j, j] = col * theta
    return MaxPlusMatrix.from_array(m)


def build_M(params: ModelParams) -> MaxPlusMatrix:
    """The N x N selection matrix ``M = M1 (x) M2`` (product form)."""
    return mp_mul(build_M1(params), build_M2(params))


def build_M_closed_form(params: ModelParams) -> MaxPlusMatrix:
    """Entrywise closed form of ``M``; cross-checked against the product.

    ``m[j,j] = max(-a_other * theta, -alpha_u) - alpha_first(j) * b`` where
    ``a_other`` is the smallest first-slope among the other blocks and
    ``b = theta/(1-theta)``; off-diagonal entries depend only on the column:
    ``m[i,j] = -alpha_first(j) * b``.
    """
    require_valid(params)
    theta = params.theta
    barrier = theta / (1.0 - theta)
    m = np.empty((params.N, params.N))
    for j in range(1, params.N + 1):
        other = min(params.alpha_first(l) for l in range(1, params.N + 1) if l != j)
        m[:, j - 1] = -params.alpha_first(j) * barrier
        m[j - 1, j - 1] = (max(-other * theta, -params.alpha_u)
                           - params.alpha_first(j) * barrier)
    return MaxPlusMatrix.from_array(m)


# ---------------------------------------------------------------------------
# Maximal cycle mean (Karp) and critical cycles
# ---------------------------------------------------------------------------

def max_cycle_mean(matrix: MaxPlusMatrix) -> float:
    """Maximal mean weight over directed cycles, by Karp's algorithm.

    A virtual source with zero-weight edges into every node guarantees the
    reachability hypothesis of Karp's theorem; the answer is exact up to
    rounding in sums of at most ``n+1`` entries.
    """
    if matrix.rows != matrix.cols:
        raise TropicalError("cycle mean needs a square matrix")
    w = matrix.to_array()
    n = matrix.rows
    if not np.any(np.isfinite(w)):
        raise TropicalError("no finite entries, hence no cycle")
    # d[k][v] = max weight of a k-edge walk from the virtual source to v
    total = n + 1
    d = np.full((total + 1, n), NEG_INF)
    d[1, :] = 0.0  # one edge: source -> v, weight 0
    for k in range(2, total + 1):
        d[k] = np.max(d[k - 1][:, None] + w, axis=0)
    if not np.any(np.isfinite(d[total])):
        raise TropicalError("graph has no cycle of finite weight")
    best = NEG_INF
    for v in range(n):
        if not math.isfinite(d[total, v]):
            continue
        ratios = [(d[total, v] - d[k, v]) / (total - k)
                  for k in range(1, total) if math.isfinite(d[k, v])]
        best = max(best, min(ratios))
    return best


def _kleene_plus(matrix: MaxPlusMatrix) -> MaxPlusMatrix:
    """``M+ = M (+) M^2 (+) ... (+) M^n`` for a square max-plus matrix."""
    acc = matrix
    power = matrix
    for _ in range(matrix.rows - 1):
        power = mp_mul(power, matrix)
        acc = mp_add(acc, power)
    return acc


def critical_cycles(matrix: MaxPlusMatrix, gamma: float,
                    tol: float = 1e-9) -> set[tuple[int, ...]]:
    """All simple cycles of mean ``-gamma`` (the maximal mean), 1-based nodes.

    Cycles are canonicalised to start at their smallest node, e.g. the
    two-cycle through nodes 1 and 2 is ``(1, 2)`` and a self-loop is ``(1,)``.
    """
    if matrix.rows != matrix.cols:
        raise TropicalError("critical cycles need a square matrix")
    n = matrix.rows
    shifted = MaxPlusMatrix.from_array(matrix.to_array() + gamma)
    plus = _kleene_plus(shifted).to_array()
    sh = shifted.to_array()
    # arc (i, j) lies on a zero-mean cycle of the shifted matrix iff the
    # best return path closes it to total weight 0
    critical_arcs = set()
    for i in range(n):
        for j in range(n):
            back = 0.0 if j == i else plus[j, i]
            if math.isfinite(sh[i, j]) and abs(sh[i, j] + back) <= tol:
                critical_arcs.add((i, j))
    cycles: set[tuple[int, ...]] = set()
    nodes = sorted({i for arc in critical_arcs for i in arc})
    for length in range(1, len(nodes) + 1):
        for cycle in itertools.permutations(nodes, length):
            if cycle[0] != min(cycle):
                continue  # canonical rotation only
            arcs = [(cycle[k], cycle[(k + 1) % length]) for k in range(length)]
            if not all(arc in critical_arcs for arc in arcs):
                continue
            mean = sum(matrix.entries[i][j] for i, j in arcs) / length
            if abs(mean + gamma) <= tol:
                cycles.add(tuple(i + 1 for i in cycle))
    return cycles


# ---------------------------------------------------------------------------
# gamma: closed form and zone classification
# ---------------------------------------------------------------------------

def _branch_values(params: ModelParams) -> dict[str, float]:
    theta = params.theta
    barrier = theta / (1.0 - theta)
    a1 = params.alpha_first(1)
    ap1 = params.alpha_first(2)
    return {
        BRANCH_AVERAGE: 0.5 * (a1 + ap1) * barrier,
        BRANCH_ALPHA: a1 * barrier + params.alpha_u,
        BRANCH_THETA: a1 * barrier + ap1 * theta,
    }


def gamma_closed_form(params: ModelParams) -> float:
    """Freezing rate ``gamma = min(min(a_{p+1} theta, a_u) + a_1 b, (a_1+a_{p+1}) b / 2)``.

    Here ``b = theta/(1-theta)``; the value equals the negated maximal cycle
    mean of ``M`` and always exceeds ``a_1 * b``.
    """
    require_valid(params)
    return min(_branch_values(params).values())


@dataclass(frozen=True)
class ZoneLabel:
    """Parameter zone, the rate gamma, and the branches attaining it."""

    label: str  # one of Z1, Z2, Z3only, Z4only, Z3andZ4
    gamma: float
    active_branches: frozenset[str]


def zone_classify(params: ModelParams, tie_tol: float = DEFAULT_TIE_TOL) -> ZoneLabel:
    """Classify parameters into the zones governing the zero-temperature limit.

    Z2: the average branch strictly loses the minimum; Z1: it strictly wins.
    The boundary zones are tie sets: Z3 ties average with the alpha branch,
    Z4 (only reachable for theta > 1/2) ties average with the theta branch,
    and Z3&Z4 ties all three.  Ties are detected within ``tie_tol``.
    """
    require_valid(params)
    branches = _branch_values(params)
    gamma = min(branches.values())
    active = frozenset(name for name, value in branches.items()
                       if value - gamma <= tie_tol)
    if BRANCH_AVERAGE not in active:
        label = "Z2"
    elif BRANCH_ALPHA in active and BRANCH_THETA in active:
        label = "Z3andZ4"
    elif BRANCH_ALPHA in active:
        label = "Z3only"
    elif BRANCH_THETA in active:
        label = "Z4only"
    else:
        label = "Z1"
    return ZoneLabel(label, gamma, active)


# ---------------------------------------------------------------------------
# Peierls barrier, subaction eigenvector, calibration equation
# ---------------------------------------------------------------------------

def peierls_barrier(params: ModelParams, j: int, x: PointRep) -> float:
    """Optimal asymptotic approach cost ``-alpha_first(j) * b * d(x, Sigma_j)``."""
    from .model import dist_to_sigma  # local import keeps module load cheap
    barrier = params.theta / (1.0 - params.theta)
    return -params.alpha_first(j) * barrier * dist_to_sigma(params, x, j)


@dataclass(frozen=True)
class SubactionValues:
    """Calibrated subaction on the blocks, on depth-1 rings and on [u].

    Normalised so the value on ``Sigma_1`` is zero; ``v_sigma`` is a max-plus
    eigenvector of ``M`` for the eigenvalue ``-gamma``.
    """

    gamma: float
    v_sigma: tuple[float, ...]
    v_ring1: tuple[float, ...]
    v_u: float


def subaction_eigenvector(params: ModelParams,
                          tie_tol: float = DEFAULT_TIE_TOL) -> SubactionValues:
    """Unique (normalised) max-plus eigenvector of ``M``, plus derived values.

    The vector is read off the column of the Kleene star of the eigenvalue-
    normalised matrix at the lowest-index critical node and shifted so the
    first entry vanishes; ring and u values follow by one application of M2.
    """
    matrix = build_M(params)
    lam = max_cycle_mean(matrix)
    gamma = -lam
    shifted = MaxPlusMatrix.from_array(matrix.to_array() + gamma)
    plus = _kleene_plus(shifted).to_array()
    critical = [i for i in range(matrix.rows) if abs(plus[i, i]) <= max(tie_tol, 1e-11)]
    if not critical:
        raise TropicalError("no critical node found; cycle mean inconsistent")
    column = plus[:, critical[0]]
    v_sigma = tuple(float(v - column[0]) for v in column)
    tail = mp_vec_mul(build_M2(params), v_sigma)
    return SubactionValues(gamma=gamma, v_sigma=v_sigma,
                           v_ring1=tail[:-1], v_u=tail[-1])


def calibrated_subaction_at(params: ModelParams, x: PointRep,
                            sub: SubactionValues | None = None) -> float:
    """Value of the calibrated subaction: ``max_j (V(Sigma_j) + h_j(x))``."""
    if sub is None:
        sub = subaction_eigenvector(params)
    return max(sub.v_sigma[j - 1] + peierls_barrier(params, j, x)
               for j in range(1, params.N + 1))


def assert_product_matches_closed_form(params: ModelParams,
                                       tol: float = 1e-9) -> float:
    """Max absolute gap between the product and closed-form builds of ``M``.

    Raises TropicalError if any entry differs by more than ``tol``; the
    product form stays authoritative either way.
    """
    prod = build_M(params).to_array()
    closed = build_M_closed_form(params).to_array()
    gap = float(np.max(np.abs(prod - closed)))
    if not gap <= tol:
        raise TropicalError(
            f"closed form of M deviates from the max-plus product by {gap}")
    return gap

"""Alphabet, parameters, metric and potential of the layered full shift.

The system is a one-sided full shift on ``N*p + 1`` symbols: ``N`` disjoint
blocks of ``p`` letters each (block ``j`` spans the sub-shift ``Sigma_j``)
plus one extra letter ``u``.  Every letter carries a positive slope: letter
``i`` of block ``j`` carries ``alpha[j][i]`` and ``u`` carries ``alpha_u``.
The potential vanishes on each ``Sigma_j`` and is ``-slope * distance`` to
the block of the leading letter elsewhere, so the blocks are the flat loci
and the slope ordering makes block 1 the flattest.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union


class ModelError(ValueError):
    """Raised for invalid parameters, letters or point representations."""


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector of the shift model.

    Attributes:
        N: number of sub-shifts (blocks), at least 2.
        p: letters per block, at least 2.
        theta: metric base, strictly inside (0, 1).
        alpha: N rows of p positive slopes; ``alpha[j-1][i-1]`` is the slope
            of letter ``i`` in block ``j``.
        alpha_u: slope on the cylinder of the extra letter ``u``.
    """

    N: int
    p: int
    theta: float
    alpha: tuple[tuple[float, ...], ...]
    alpha_u: float

    def alpha_entry(self, j: int, i: int) -> float:
        """Slope of letter ``i`` (1-based) in block ``j`` (1-based)."""
        return self.alpha[j - 1][i - 1]

    def alpha_first(self, j: int) -> float:
        """Smallest slope of block ``j``; the flatness ranking key."""
        return self.alpha[j - 1][0]

    def block_slopes(self, j: int) -> tuple[float, ...]:
        return self.alpha[j - 1]

    @property
    def alpha_max(self) -> float:
        """Largest block slope (the extra letter does not enter distances)."""
        return max(max(row) for row in self.alpha)

    @property
    def n_symbols(self) -> int:
        return self.N * self.p + 1


def make_params(N: int, p: int, theta: float,
                alpha: Sequence[Sequence[float]], alpha_u: float,
                check: bool = True) -> ModelParams:
    """Build ModelParams from nested sequences, optionally validating."""
    params = ModelParams(int(N), int(p), float(theta),
                         tuple(tuple(float(a) for a in row) for row in alpha),
                         float(alpha_u))
    if check:
        require_valid(params)
    return params


#: Parameter set used as the running example throughout the test-suite.
EXAMPLE_PARAMS = ModelParams(
    N=2, p=2, theta=0.5, alpha=((1.0, 2.0), (1.5, 3.0)), alpha_u=0.3)


def validate(params: ModelParams) -> list[str]:
    """Check every ordering and positivity constraint.

    Returns a list of human-readable violations, empty when the parameters
    are admissible.  Constraints: within each block the first gap is strict
    and the rest nondecreasing; across blocks the first slopes satisfy
    ``alpha[1][1] < alpha[2][1] < alpha[3][1] <= ... <= alpha[N][1]``;
    theta lies strictly inside (0, 1); every slope is positive.
    """
    errors: list[str] = []
    if params.N < 2:
        errors.append(f"N must be >= 2, got {params.N}")
    if params.p < 2:
        errors.append(f"p must be >= 2, got {params.p}")
    if not (0.0 < params.theta < 1.0) or not math.isfinite(params.theta):
        errors.append(f"theta outside (0,1): {params.theta}")
    if len(params.alpha) != params.N:
        errors.append(f"alpha has {len(params.alpha)} rows, expected N={params.N}")
        return errors
    for j, row in enumerate(params.alpha, start=1):
        if len(row) != params.p:
            errors.append(f"alpha block {j} has {len(row)} entries, expected p={params.p}")
            continue
        for i, a in enumerate(row, start=1):
            if not (a > 0.0) or not math.isfinite(a):
                errors.append(f"alpha.{j}.{i} must be positive and finite, got {a}")
        if len(row) >= 2 and not row[0] < row[1]:
            errors.append(f"first gap not strict in block {j}: "
                          f"alpha.{j}.1={row[0]} !< alpha.{j}.2={row[1]}")
        for i in range(1, len(row) - 1):
            if not row[i] <= row[i + 1]:
                errors.append(f"block {j} slopes not nondecreasing at position {i + 1}")
    firsts = [row[0] for row in params.alpha if row]
    if len(firsts) == params.N:
        # first two cross-block gaps strict, the rest nondecreasing
        for j in range(params.N - 1):
            lo, hi = firsts[j], firsts[j + 1]
            if j < 2:
                if not lo < hi:
                    errors.append(f"need alpha.{j + 1}.1 < alpha.{j + 2}.1, "
                                  f"got {lo} !< {hi}")
            elif not lo <= hi:
                errors.append(f"need alpha.{j + 1}.1 <= alpha.{j + 2}.1, "
                              f"got {lo} !<= {hi}")
    if not (params.alpha_u > 0.0) or not math.isfinite(params.alpha_u):
        errors.append(f"alpha_u must be positive and finite, got {params.alpha_u}")
    return errors


def require_valid(params: ModelParams) -> ModelParams:
    """Raise ModelError listing all violated constraints, if any."""
    errors = validate(params)
    if errors:
        raise ModelError("; ".join(errors))
    return params


# ---------------------------------------------------------------------------
# Letters and points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockLetter:
    """Letter ``i`` of block ``j``; the flat alphabet index is (j-1)*p + i."""

    block: int
    rank: int

    def __repr__(self) -> str:  # compact, e.g. b2.1
        return f"b{self.block}.{self.rank}"


@dataclass(frozen=True)
class ULetter:
    """The extra letter ``u`` outside every block."""

    def __repr__(self) -> str:
        return "u"


U = ULetter()

Letter = Union[BlockLetter, ULetter]


@dataclass(frozen=True)
class InSigma:
    """Tail tag: after the prefix the point stays inside ``Sigma_block``."""

    block: int


@dataclass(frozen=True)
class StarTail:
    """Tail tag: the next letter breaks the block of the leading run."""


STAR = StarTail()

Tail = Union[InSigma, StarTail]


@dataclass(frozen=True)
class PointRep:
    """A point of the shift given as a finite word plus a tail tag.

    Every quantity of interest (potential, distances, eigenfunction values,
    barriers) only depends on a point through such a representation: either
    the point eventually lies in one ``Sigma_j`` (tail ``InSigma(j)``) or it
    is a ring representative whose next letter leaves the leading block
    (tail ``STAR``).
    """

    prefix: tuple[Letter, ...]
    tail: Tail

    def __post_init__(self) -> None:
        if isinstance(self.tail, StarTail) and not self.prefix:
            raise ModelError("a Star tail needs a nonempty prefix")


def ring_point(word: Iterable[Letter]) -> PointRep:
    """Ring representative: the given word followed by a block break."""
    return PointRep(tuple(word), STAR)


def sigma_point(j: int, prefix: Iterable[Letter] = ()) -> PointRep:
    """A point that continues inside ``Sigma_j`` after the given prefix."""
    return PointRep(tuple(prefix), InSigma(j))


def u_point() -> PointRep:
    """Canonical representative of the cylinder of the extra letter."""
    return PointRep((U,), InSigma(1))


def block_word(j: int, ranks: Iterable[int]) -> tuple[BlockLetter, ...]:
    """Word inside block ``j`` from the sequence of letter ranks (1-based)."""
    return tuple(BlockLetter(j, i) for i in ranks)


def _check_letter(params: ModelParams, letter: Letter) -> None:
    if isinstance(letter, BlockLetter):
        if not (1 <= letter.block <= params.N and 1 <= letter.rank <= params.p):
            raise ModelError(f"letter {letter!r} out of range for N={params.N}, p={params.p}")
    elif not isinstance(letter, ULetter):
        raise ModelError(f"not a letter: {letter!r}")


def letter_alpha(params: ModelParams, letter: Letter) -> float:
    """Slope attached to a letter: ``alpha[j][i]`` for block letters, ``alpha_u`` for u."""
    _check_letter(params, letter)
    if isinstance(letter, ULetter):
        return params.alpha_u
    return params.alpha_entry(letter.block, letter.rank)


def leading_run(x: PointRep) -> tuple[int, float] | None:
    """Block and length of the maximal single-block run starting the point.

    Returns ``None`` when the first letter is ``u``; the run length is
    ``math.inf`` for points of some ``Sigma_j``.
    """
    if x.prefix:
        first = x.prefix[0]
        if isinstance(first, ULetter):
            return None
        j = first.block
    elif isinstance(x.tail, InSigma):
        return x.tail.block, math.inf
    else:  # unreachable: StarTail requires a prefix
        raise ModelError("empty point")
    run = 0
    for letter in x.prefix:
        if isinstance(letter, BlockLetter) and letter.block == j:
            run += 1
        else:
            return j, float(run)
    if isinstance(x.tail, InSigma) and x.tail.block == j:
        return j, math.inf
    return j, float(run)


def dist_to_sigma(params: ModelParams, x: PointRep, j: int) -> float:
    """Distance ``theta**a`` to ``Sigma_j``; a is the admissible prefix length.

    ``a = 0`` (distance 1) when the first letter is not in block ``j`` and
    the distance is 0 exactly for points of ``Sigma_j``.
    """
    run = leading_run(x)
    if run is None or run[0] != j:
        return 1.0
    _, a = run
    if math.isinf(a):
        return 0.0
    return params.theta ** a


def potential_A(params: ModelParams, x: PointRep) -> float:
    """Potential at a point: ``-slope(first letter) * d(x, Sigma_block)``.

    Nonpositive everywhere, equal to ``-alpha_u`` on the u-cylinder and to 0
    exactly on the union of the ``Sigma_j``.
    """
    if x.prefix:
        first = x.prefix[0]
    elif isinstance(x.tail, InSigma):
        return 0.0
    else:
        raise ModelError("empty point")
    if isinstance(first, ULetter):
        return -params.alpha_u
    return -letter_alpha(params, first) * dist_to_sigma(params, x, first.block)


def birkhoff_weight(params: ModelParams, word: Sequence[BlockLetter]) -> float:
    """Cost ``S(m) = -sum_l alpha[m_l] * theta**(n-l)`` of a single-block word.

    This is the Birkhoff sum of the potential along the ring representative
    of ``m`` (the inverse temperature is applied by the caller).  Words
    mixing blocks are rejected.
    """
    if not word:
        raise ModelError("empty word")
    j = None
    for letter in word:
        if not isinstance(letter, BlockLetter):
            raise ModelError("word contains the extra letter")
        _check_letter(params, letter)
        if j is None:
            j = letter.block
        elif letter.block != j:
            raise ModelError(f"mixed-block word: block {j} and block {letter.block}")
    n = len(word)
    return -sum(letter_alpha(params, letter) * params.theta ** (n - l)
                for l, letter in enumerate(word))


# ---------------------------------------------------------------------------
# Structured-text configuration
# ---------------------------------------------------------------------------

_ALPHA_KEY = re.compile(r"alpha\.(\d+)\.(\d+)$")


def params_from_text(text: str) -> ModelParams:
    """Parse ``key = value`` lines into validated ModelParams.

    Recognised keys: ``N``, ``p``, ``theta``, ``alpha_u`` and one
    ``alpha.<j>.<i>`` per block entry.  Blank lines and ``#`` comments are
    ignored.  Errors name the offending key.
    """
    scalars: dict[str, float] = {}
    entries: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        match = _ALPHA_KEY.fullmatch(key)
        try:
            number = float(value)
        except ValueError:
            raise ModelError(f"key {key!r}: malformed number {value!r}") from None
        if match:
            entries[(int(match.group(1)), int(match.group(2)))] = number
        elif key in ("N", "p"):
            if number != int(number):
                raise ModelError(f"key {key!r}: expected an integer, got {value!r}")
            scalars[key] = number
        elif key in ("theta", "alpha_u"):
            scalars[key] = number
        else:
            raise ModelError(f"unknown key {key!r}")
    for key in ("N", "p", "theta", "alpha_u"):
        if key not in scalars:
            raise ModelError(f"missing required key {key!r}")
    N, p = int(scalars["N"]), int(scalars["p"])
    alpha = []
    for j in range(1, N + 1):
        row = []
        for i in range(1, p + 1):
            if (j, i) not in entries:
                raise ModelError(f"missing required key 'alpha.{j}.{i}'")
            row.append(entries.pop((j, i)))
        alpha.append(tuple(row))
    if entries:
        j, i = sorted(entries)[0]
        raise ModelError(f"key 'alpha.{j}.{i}' outside the {N}x{p} slope matrix")
    params = ModelParams(N, p, scalars["theta"], tuple(alpha), scalars["alpha_u"])
    require_valid(params)
    return params


def params_to_text(params: ModelParams) -> str:
    """Serialise parameters in the ``key = value`` configuration format."""
    lines = [f"N = {params.N}", f"p = {params.p}",
             f"theta = {params.theta!r}", f"alpha_u = {params.alpha_u!r}"]
    for j in range(1, params.N + 1):
        for i in range(1, params.p + 1):
            lines.append(f"alpha.{j}.{i} = {params.alpha_entry(j, i)!r}")
    return "\n".join(lines) + "\n"

"""Certified evaluation of the auxiliary series and the singular integral.

The central object is ``F(Z, z) = sum_{n>=1} e^{-nZ} prod_{j<=n} s_j`` with
``s_j = sum_i exp(-z_i theta^j)``.  Each factor tends to ``p = len(z)``
geometrically fast, so past an explicitly computable index the series is a
geometric series in ``q = p e^{-Z}`` whose sum is known in closed form.  We
therefore sum a short explicit head in the log domain and attach the exact
geometric tail, with a certified relative error bound.  Everything is
parametrised internally by the gap ``w = Z - log p`` so that the freezing
regime (w of order e^{-gamma*beta}, far below the resolution of ``Z`` as a
double) loses no precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp


class SeriesDivergenceError(ValueError):
    """Series parameter on or past the divergence boundary Z <= log p."""


class ToleranceError(ValueError):
    """Requested certificate cannot be achieved."""


#: floor below which w = Z - log p cannot be represented as a double
_LOG_W_FLOOR = math.log(5e-324) + 2.0

#: default head length target for the certified relative tail error
_DELTA_FLOOR = 1e-18

_MAX_HEAD_TERMS = 2_000_000


@dataclass(frozen=True)
class SeriesValue:
    """A positive sum in log scale with a certified relative error bound."""

    log_value: float
    tail_rel_bound: float
    terms_used: int

    @property
    def value(self) -> float:
        """Linear-scale value; may overflow to inf for huge sums."""
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf


@dataclass(frozen=True)
class IntegralValue:
    value: float
    abs_error_bound: float


# ---------------------------------------------------------------------------
# Log-domain factor machinery
# ---------------------------------------------------------------------------

def _check_theta(theta: float) -> None:
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0,1), got {theta}")


def _log_mean_factors(theta: float, z: np.ndarray, n: int) -> np.ndarray:
    """``f_j = log(mean_i exp(-z_i theta^j))`` for j = 1..n, cancellation-free.

    For small exponents the expm1 form ``log1p(sum_i expm1(-z_i t)/p)`` is
    exact where the direct form would cancel; for large exponents the
    min-shifted form never underflows (z up to 1e6 is safe).
    """
    t = theta ** np.arange(1, n + 1)
    if z.size == 0:
        raise ValueError("empty slope vector")
    args = np.outer(t, z)  # shape (n, p), all >= 0
    small = args.max(axis=1) <= 0.5
    f = np.empty(n)
    if np.any(small):
        f[small] = np.log1p(np.expm1(-args[small]).sum(axis=1) / z.size)
    if not np.all(small):
        big = ~small
        shift = args[big].min(axis=1)
        f[big] = -shift + np.log(
            np.exp(-(args[big] - shift[:, None])).sum(axis=1) / z.size)
    return f


def s_factor(theta: float, z: Sequence[float], j: int) -> float:
    """``log sum_i exp(-z_i theta^j)``, max-shifted so huge slopes are safe."""
    _check_theta(theta)
    if j < 1:
        raise ValueError("factor index starts at 1")
    zz = np.asarray(z, dtype=float)
    return float(math.log(zz.size) + _log_mean_factors(theta, zz, j)[-1])


def _one_minus_exp_neg(w: float) -> float:
    """``1 - e^-w`` without cancellation (w > 0)."""
    return -math.expm1(-w)


def _log_one_minus_exp_neg(w: float) -> float:
    """``log(1 - e^-w)`` accurate down to subnormal w."""
    if w > 1e-8:
        return math.log(-math.expm1(-w))
    # 1 - e^-w = w (1 - w/2 + w^2/6 - ...)
    return math.log(w) + math.log1p(-0.5 * w + w * w / 6.0)


class SeriesKernel:
    """Reusable head/tail data for all series sharing ``(theta, z)``.

    Building the kernel costs one pass over the head factors; evaluating
    ``log F``, ``log G`` or the prefix-modified variant at any gap ``w > 0``
    is then a single vectorised log-sum-exp.  ``s_bound`` widens the head so
    prefix factors ``exp(S theta^k)`` with ``|S| <= s_bound`` are certified.
    """

    def __init__(self, theta: float, z: Sequence[float], tol: float = 1e-12,
                 s_bound: float = 0.0):
        _check_theta(theta)
        zz = np.asarray(z, dtype=float)
        if zz.size == 0:
            raise ValueError("empty slope vector")
        if np.any(zz < 0) or not np.all(np.isfinite(zz)):
            raise ValueError("slopes must be finite and nonnegative")
        if tol < 5e-15:
            raise ToleranceError(f"cannot certify relative tolerance {tol}")
        self.theta = float(theta)
        self.z = zz
        self.p = zz.size
        self.tol = float(tol)
        scale = float(zz.max()) / (1.0 - theta) + abs(float(s_bound))
        delta_target = max(_DELTA_FLOOR, 0.25 * tol)
        if scale <= delta_target:
            head = 4
        else:
            head = max(4, math.ceil(math.log(scale / delta_target)
                                    / -math.log(theta)))
        if head > _MAX_HEAD_TERMS:
            raise ToleranceError(
                f"head of {head} terms needed for theta={theta}; tolerance unreachable")
        self.head = head
        self._n = np.arange(1, head + 1, dtype=float)
        self._f = _log_mean_factors(theta, zz, head)
        self._c = np.cumsum(self._f)  # c_n = sum_{j<=n} log(s_j / p)
        # residual movement of c_n past the head, plus float summation slop
        self._delta = (scale * theta ** (head + 1)) + 4e-16 * head
        self.tail_rel_bound = self._delta
        if self.tail_rel_bound > tol:
            raise ToleranceError(
                f"certified bound {self.tail_rel_bound} exceeds tolerance {tol}")

    @property
    def log_factor_total(self) -> float:
        """Converged ``sum_{j>=1} log(s_j / p)`` (within the certificate)."""
        return float(self._c[-1])

    def _require_convergent(self, w: float) -> None:
        if not w > 0.0:
            raise SeriesDivergenceError(
                f"series diverges for Z <= log p (gap w = {w})")

    def log_F(self, w: float) -> float:
        """``log F`` at gap ``w = Z - log p``."""
        self._require_convergent(w)
        head_terms = self._c - self._n * w
        log_tail = self._c[-1] - (self.head + 1) * w - _log_one_minus_exp_neg(w)
        return float(logsumexp(np.append(head_terms, log_tail)))

    def log_G(self, w: float) -> float:
        """``log G`` with the extra factor n on each term."""
        self._require_convergent(w)
        head_terms = self._c - self._n * w + np.log(self._n)
        omen = _one_minus_exp_neg(w)
        log_tail = (self._c[-1] - (self.head + 1) * w
                    + math.log1p(self.head * omen)
                    - 2.0 * _log_one_minus_exp_neg(w))
        return float(logsumexp(np.append(head_terms, log_tail)))

    def log_F_prefixed(self, w: float, S: float) -> float:
        """``log`` of the prefix-modified series with factors ``exp(S theta^k)``."""
        self._require_convergent(w)
        if abs(S) > 0 and abs(S) * self.theta ** (self.head + 1) > self.tol:
            raise ToleranceError(
                f"prefix weight {S} too large for this kernel; rebuild with s_bound")
        head_terms = (self._c - self._n * w
                      + S * self.theta ** self._n)
        log_tail = self._c[-1] - (self.head + 1) * w - _log_one_minus_exp_neg(w)
        return float(logsumexp(np.append(head_terms, log_tail)))

    def log_F_truncated(self, w: float, K: int) -> float:
        """Plain partial sum to K terms (diagnostic; w may be any real)."""
        if K < 1:
            raise ValueError("K must be >= 1")
        total = -math.inf
        start = 1
        chunk = 1_000_000
        while start <= K:
            stop = min(K, start + chunk - 1)
            if stop <= self.head:
                c = self._c[start - 1:stop]
            else:
                n_extra = stop - max(start - 1, self.head)
                base = self._c[start - 1:self.head] if start <= self.head else np.empty(0)
                # factors past the head are p (up to the certified wobble)
                extra = np.full(n_extra, self._c[-1])
                c = np.concatenate([base, extra])
            n = np.arange(start, stop + 1, dtype=float)
            total = np.logaddexp(total, logsumexp(c - n * w))
            start = stop + 1
        return float(total)


def _kernel(theta: float, z: Sequence[float], tol: float,
            s_bound: float = 0.0) -> SeriesKernel:
    return SeriesKernel(theta, z, tol=tol, s_bound=s_bound)


# ---------------------------------------------------------------------------
# Public series functions (Z-parametrised)
# ---------------------------------------------------------------------------

def _gap(Z: float, p: int) -> float:
    return Z - math.log(p)


def F(theta: float, Z: float, z: Sequence[float], tol: float = 1e-12) -> SeriesValue:
    """``sum_{n>=1} e^{-nZ} prod_{j=1}^n s_j(z)`` with certified relative error.

    Converges exactly for ``Z > log p`` (each factor is at most p); smaller
    ``Z`` raises SeriesDivergenceError.
    """
    kern = _kernel(theta, z, tol)
    w = _gap(Z, kern.p)
    return SeriesValue(kern.log_F(w), kern.tail_rel_bound, kern.head)


def G(theta: float, Z: float, z: Sequence[float], tol: float = 1e-12) -> SeriesValue:
    """The n-weighted variant ``sum n e^{-nZ} prod s_j`` (tail-mass series)."""
    kern = _kernel(theta, z, tol)
    w = _gap(Z, kern.p)
    return SeriesValue(kern.log_G(w), kern.tail_rel_bound, kern.head)


def F_prefixed(theta: float, Z: float, z: Sequence[float], S: float,
               tol: float = 1e-12) -> SeriesValue:
    """Variant with the extra cylinder prefix factor ``exp(S theta^k)``, S <= 0."""
    kern = _kernel(theta, z, tol, s_bound=abs(S))
    w = _gap(Z, kern.p)
    return SeriesValue(kern.log_F_prefixed(w, S), kern.tail_rel_bound, kern.head)


def F_truncated(theta: float, Z: float, z: Sequence[float], K: int) -> SeriesValue:
    """Partial sum to K terms with the geometric remainder bound attached.

    The bound ``q^(K+1)/(1-q)`` with ``q = p e^-Z`` is stored relative to the
    partial sum; it is infinite when the full series diverges.
    """
    kern = _kernel(theta, z, tol=1e-12)
    w = _gap(Z, kern.p)
    log_value = kern.log_F_truncated(w, K)
    if w > 0:
        log_bound = -(K + 1) * w - _log_one_minus_exp_neg(w)
        rel = math.exp(log_bound - log_value)
    else:
        rel = math.inf
    return SeriesValue(log_value, rel, K)


# ---------------------------------------------------------------------------
# The singular integral I and the product asymptotics
# ---------------------------------------------------------------------------

def I_integral(eta: Sequence[float], tol: float = 1e-10) -> IntegralValue:
    """Two-piece improper integral governing the sub-exponential prefactor.

    ``I(eta) = int_0^1 log((1 + sum_i e^{-eta_i x}) / p) dx/x
             + int_1^inf (sum_i eta_i e^{-eta_i x}) / (1 + sum_i e^{-eta_i x}) log x dx``

    with ``p = len(eta) + 1``.  The first integrand extends continuously to 0
    with value ``-sum(eta)/p`` (computed via expm1, so no cancellation); the
    second decays like ``e^{-eta_min x}``.  Identically zero when every gap
    vanishes.
    """
    e = np.asarray(eta, dtype=float)
    if e.size == 0:
        raise ValueError("need at least one gap (p >= 2)")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError("gaps must be finite and nonnegative")
    if np.any(np.diff(e) < 0):
        raise ValueError("gaps must be sorted nondecreasing")
    if not np.any(e > 0):
        return IntegralValue(0.0, 0.0)
    p = e.size + 1
    sum_eta = float(e.sum())
    positive = e[e > 0]
    eta_min = float(positive.min())

    def near_zero(x: float) -> float:
        if x == 0.0:
            return -sum_eta / p
        return math.log1p(float(np.expm1(-e * x).sum()) / p) / x

    def far_log(u: float) -> float:
        # substitution x = e^u: the integrand in u is a bump around
        # log(1/eta_min), well conditioned even for nearly closed gaps
        x = math.exp(u)
        decays = np.exp(-e * x)
        return float((e * decays).sum() / (1.0 + decays.sum())) * u * x

    def far_tail_bound(x: float) -> float:
        # int_X^inf eta e^(-eta t) log t dt <= e^(-eta X)(log X + 1/(eta X))
        return float(sum(math.exp(-h * x) * (math.log(x) + 1.0 / (h * x))
                         for h in positive))

    # the far integrand's mass sits near 1/eta; truncate where the analytic
    # remainder bound clears the budget (diverges ~ log(1/eta) as gaps close)
    upper = max(10.0, 2.0 / eta_min)
    while far_tail_bound(upper) > tol / 4.0:
        upper *= 2.0
        if upper > 1e14:
            raise ToleranceError("far-integral truncation point ran away")
    inner_points = sorted({min(1.0, 1.0 / float(h)) for h in positive} - {1.0})
    part1, err1 = quad(near_zero, 0.0, 1.0, epsabs=tol / 4, epsrel=1e-12,
                       limit=200, points=inner_points or None)
    u_hi = math.log(upper)
    far_points = sorted({math.log(1.0 / h) for h in positive
                         if 1.0 < 1.0 / h < upper})
    part2, err2 = quad(far_log, 0.0, u_hi, epsabs=tol / 4, epsrel=1e-12,
                       limit=300, points=far_points or None)
    bound = err1 + err2 + far_tail_bound(upper)
    if bound > tol:
        raise ToleranceError(f"quadrature error estimate {bound} exceeds {tol}")
    return IntegralValue(part1 + part2, bound)


def r_exponent(p: int, theta: float) -> float:
    """Polynomial decay exponent ``r = -log p / log theta`` (positive)."""
    _check_theta(theta)
    if p < 2:
        raise ValueError("p must be >= 2")
    return -math.log(p) / math.log(theta)


def product_asymptotic_check(theta: float, xi: Sequence[float], beta: float,
                             n: int) -> tuple[float, float]:
    """Both sides of the n-fold product asymptotics, in log scale.

    LHS is the exact ``log prod_{j<=n} sum_i e^{-xi_i theta^j beta}``; RHS is
    the predicted ``n log p - r log beta - xi_1 theta (1-theta^n) beta/(1-theta)
    - I(eta)/log theta``.  No equality is claimed at finite beta; the gap
    shrinks as beta grows (with n growing first).
    """
    _check_theta(theta)
    x = np.asarray(xi, dtype=float)
    if x.size < 2 or np.any(np.diff(x) < 0) or not x[0] < x[1]:
        raise ValueError("xi must be sorted with a strict first gap")
    if beta <= 0 or n < 1:
        raise ValueError("need beta > 0 and n >= 1")
    f = _log_mean_factors(theta, x * beta, n)
    p = x.size
    lhs = n * math.log(p) + float(f.sum())
    eta = x[1:] - x[0]
    ival = I_integral(eta).value
    rhs = (n * math.log(p) - r_exponent(p, theta) * math.log(beta)
           - x[0] * theta * (1.0 - theta ** n) * beta / (1.0 - theta)
           - ival / math.log(theta))
    return lhs, rhs

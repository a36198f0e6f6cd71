"""Log-domain scalar arithmetic, special functions, and quadrature rules.

Everything downstream runs on quantities like (p-2)!, l^{p-1} and
|log|z|^2|^p that overflow doubles far below the tensor powers of
interest, so the universal scalar here is a signed log-domain number
(LogReal).  The special-function layer provides log-factorial and the
regularized incomplete gamma functions P and Q, which are the closed
forms of every cusp integral after the substitution u = -2*l*log(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import DomainError, InvalidIntervalError, QuadratureError

__all__ = [
    "LogReal",
    "log_add",
    "signed_log_sum",
    "log_factorial",
    "stirling_ratio",
    "reg_gamma_lower",
    "reg_gamma_upper",
    "log_reg_gamma_lower",
    "log_reg_gamma_upper",
    "QuadratureRule",
    "gauss_rule",
    "adaptive_gauss",
    "log_integral",
    "gamma_weighted_log_integral",
]

_LOG_HUGE = 709.0  # exp overflows just past this


class LogReal:
    """Signed log-domain scalar: sign in {-1, 0, +1} and log of |value|.

    sign == 0 encodes exact zero; its log field is never read.  Values are
    immutable.  Arithmetic uses max-extraction so no intermediate quantity
    overflows for magnitudes far beyond native float range.
    """

    __slots__ = ("sign", "log")

    def __init__(self, sign: int, log: float):
        if sign not in (-1, 0, 1):
            raise DomainError(f"sign must be -1, 0 or +1, got {sign!r}")
        if sign != 0 and not math.isfinite(log):
            if log == -math.inf:
                sign, log = 0, 0.0
            else:
                raise DomainError(f"non-finite log magnitude {log!r}")
        object.__setattr__(self, "sign", 0 if sign == 0 else sign)
        object.__setattr__(self, "log", 0.0 if sign == 0 else float(log))

    def __setattr__(self, name, value):
        raise AttributeError("LogReal is immutable")

    # -- construction / destruction --------------------------------------

    @classmethod
    def from_float(cls, x: float) -> "LogReal":
        x = float(x)
        if x == 0.0:
            return cls(0, 0.0)
        if not math.isfinite(x):
            raise DomainError(f"cannot encode non-finite value {x!r}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def exp(cls, log: float) -> "LogReal":
        """Positive value given as its natural log."""
        return cls(1, float(log))

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(0, 0.0)

    @classmethod
    def one(cls) -> "LogReal":
        return cls(1, 0.0)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log > _LOG_HUGE:
            return math.inf * self.sign
        return self.sign * math.exp(self.log)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    # -- arithmetic -------------------------------------------------------

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0 or other.sign == 0:
            return LogReal(0, 0.0)
        return LogReal(self.sign * other.sign, self.log + other.log)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.sign == 0:
            raise ZeroDivisionError("LogReal division by zero")
        if self.sign == 0:
            return LogReal(0, 0.0)
        return LogReal(self.sign * other.sign, self.log - other.log)

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.log >= other.log:
            big, small = self, other
        else:
            big, small = other, self
        d = small.log - big.log
        if big.sign == small.sign:
            return LogReal(big.sign, big.log + math.log1p(math.exp(d)))
        if d == 0.0:
            return LogReal(0, 0.0)
        t = -math.expm1(d)  # 1 - exp(d), exact near cancellation
        if t == 0.0:
            return LogReal(0, 0.0)
        return LogReal(big.sign, big.log + math.log(t))

    def __neg__(self) -> "LogReal":
        return LogReal(-self.sign, self.log)

    def __sub__(self, other: "LogReal") -> "LogReal":
        return self + (-other)

    def __abs__(self) -> "LogReal":
        return LogReal(abs(self.sign), self.log)

    def __pow__(self, e: float) -> "LogReal":
        if self.sign == 0:
            if e <= 0:
                raise DomainError("0 ** nonpositive exponent")
            return LogReal(0, 0.0)
        if self.sign < 0:
            if float(e) != int(e):
                raise DomainError("negative base with non-integer exponent")
            s = -1 if int(e) % 2 else 1
            return LogReal(s, self.log * e)
        return LogReal(1, self.log * e)

    def sqrt(self) -> "LogReal":
        if self.sign < 0:
            raise DomainError("sqrt of negative LogReal")
        if self.sign == 0:
            return LogReal(0, 0.0)
        return LogReal(1, 0.5 * self.log)

    # -- comparison (by encoded value) -------------------------------------

    def _key(self):
        return (self.sign, self.sign * self.log)

    def __lt__(self, other):
        return self._key() < other._key()

    def __le__(self, other):
        return self._key() <= other._key()

    def __eq__(self, other):
        if not isinstance(other, LogReal):
            return NotImplemented
        return self.sign == other.sign and (self.sign == 0 or self.log == other.log)

    def __hash__(self):
        return hash((self.sign, 0.0 if self.sign == 0 else self.log))

    def __repr__(self):
        if self.sign == 0:
            return "LogReal(0)"
        return f"LogReal({'+' if self.sign > 0 else '-'}exp({self.log:.12g}))"


def log_add(a: LogReal, b: LogReal) -> LogReal:
    """Sum of two log-domain scalars (max-extraction, no overflow)."""
    return a + b


def signed_log_sum(logs, signs) -> LogReal:
    """Sum of many signed log-domain terms given as parallel arrays.

    Positive and negative parts are each combined with one max-extracted
    logsumexp, then the two parts are subtracted once, which keeps the
    relative error near machine epsilon measured against the larger part.
    """
    logs = np.asarray(logs, dtype=float)
    signs = np.asarray(signs)
    if logs.size == 0:
        return LogReal.zero()
    live = signs != 0
    if not live.any():
        return LogReal.zero()
    logs, signs = logs[live], signs[live]

    def _part(mask):
        if not mask.any():
            return None
        sel = logs[mask]
        m = sel.max()
        return m + math.log(np.exp(sel - m).sum())

    lpos = _part(signs > 0)
    lneg = _part(signs < 0)
    if lpos is None and lneg is None:
        return LogReal.zero()
    if lneg is None:
        return LogReal(1, lpos)
    if lpos is None:
        return LogReal(-1, lneg)
    return LogReal(1, lpos) + LogReal(-1, lneg)


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def log_factorial(n: int) -> LogReal:
    """n! as a LogReal (log magnitude = ln n!).  Exact 0 for n in {0, 1}."""
    if n < 0 or int(n) != n:
        raise DomainError(f"log_factorial needs a nonnegative integer, got {n!r}")
    n = int(n)
    if n <= 1:
        return LogReal(1, 0.0)
    return LogReal(1, math.lgamma(n + 1))


def stirling_ratio(p: float) -> float:
    """(p^p / p!) / ((2 pi p)^{-1/2} e^p); tends to 1 like 1 + 1/(12p)."""
    if p <= 0:
        raise DomainError("stirling_ratio needs p > 0")
    return math.exp(p * math.log(p) - math.lgamma(p + 1) + 0.5 * math.log(2 * math.pi * p) - p)


_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 100000


def _lower_series_log(a: float, x: float) -> float:
    """log P(a, x) by the lower series; accurate for x < a + 1, any size of P."""
    if x == 0.0:
        return -math.inf
    term = 1.0 / a
    total = term
    n = 0
    ap = a
    while n < _GAMMA_MAX_ITER:
        n += 1
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return a * math.log(x) - x - math.lgamma(a) + math.log(total)
    raise QuadratureError("incomplete gamma series did not converge")


def _upper_cf_log(a: float, x: float) -> float:
    """log Q(a, x) by the Lentz continued fraction; accurate for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return a * math.log(x) - x - math.lgamma(a) + math.log(h)
    raise QuadratureError("incomplete gamma continued fraction did not converge")


def _check_gamma_args(a: float, x: float):
    if a <= 0:
        raise DomainError(f"incomplete gamma needs a > 0, got a={a!r}")
    if x < 0:
        raise DomainError(f"incomplete gamma needs x >= 0, got x={x!r}")


def reg_gamma_lower(a: float, x: float) -> float:
    """P(a, x) = (1/Gamma(a)) * integral_0^x t^{a-1} e^{-t} dt.

    Lower series for x < a + 1, else 1 minus the continued-fraction Q.
    """
    _check_gamma_args(a, x)
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return math.exp(_lower_series_log(a, x))
    return -math.expm1(_upper_cf_log(a, x))


def reg_gamma_upper(a: float, x: float) -> float:
    """Q(a, x) = 1 - P(a, x), computed by its own continued fraction when small."""
    _check_gamma_args(a, x)
    if x == 0.0:
        return 1.0
    if x >= a + 1.0:
        return math.exp(_upper_cf_log(a, x))
    return -math.expm1(_lower_series_log(a, x))


def log_reg_gamma_lower(a: float, x: float) -> LogReal:
    """P(a, x) as a LogReal; exact deep into the underflow range of P."""
    _check_gamma_args(a, x)
    if x == 0.0:
        return LogReal.zero()
    if x < a + 1.0:
        return LogReal(1, _lower_series_log(a, x))
    q = _upper_cf_log(a, x)
    return LogReal(1, math.log(-math.expm1(q)))


def log_reg_gamma_upper(a: float, x: float) -> LogReal:
    """Q(a, x) as a LogReal; exact deep into the underflow range of Q."""
    _check_gamma_args(a, x)
    if x == 0.0:
        return LogReal.one()
    if x >= a + 1.0:
        return LogReal(1, _upper_cf_log(a, x))
    p = _lower_series_log(a, x)
    return LogReal(1, math.log(-math.expm1(p)))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights for integration over [a, b].

    Exact on polynomials up to `degree`; the weights sum to b - a.
    """

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float
    degree: int

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=128)
def _legendre(n: int):
    return roots_legendre(n)

def gauss_rule(n: int, a: float, b: float) -> QuadratureRule:
    """Gauss-Legendre rule with n nodes on [a, b], exact to degree 2n - 1."""
    if n < 1 or int(n) != n:
        raise DomainError(f"gauss_rule needs n >= 1, got {n!r}")
    if not a < b:
        raise InvalidIntervalError(f"invalid interval [{a!r}, {b!r}]")
    x, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return QuadratureRule(
        nodes=a + half * (x + 1.0),
        weights=w * half,
        a=float(a),
        b=float(b),
        degree=2 * int(n) - 1,
    )


def adaptive_gauss(f, a: float, b: float, rel_tol: float = 1e-12,
                   abs_tol: float = 0.0, max_depth: int = 28) -> float:
    """Panel-adaptive Gauss quadrature of a vectorized integrand.

    Each panel compares a 16- and a 32-node estimate and bisects until they
    agree; smooth after the cusp substitutions, so depth stays shallow.
    """
    if not a < b:
        raise InvalidIntervalError(f"invalid interval [{a!r}, {b!r}]")
    x_lo, w_lo = _legendre(16)
    x_hi, w_hi = _legendre(32)

    def panel(lo, hi, depth):
        half = 0.5 * (hi - lo)
        mid = lo + half
        lo_est = half * float(np.dot(w_lo, f(lo + half * (x_lo + 1.0))))
        hi_est = half * float(np.dot(w_hi, f(lo + half * (x_hi + 1.0))))
        err = abs(hi_est - lo_est)
        if err <= abs_tol + rel_tol * abs(hi_est):
            return hi_est
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive quadrature stalled on [{lo}, {hi}] with residual {err:.3e}")
        return panel(lo, mid, depth + 1) + panel(mid, hi, depth + 1)

    return panel(float(a), float(b), 0)


def log_integral(log_f, a: float, b: float, n: int = 64, panels: int = 16) -> LogReal:
    """Integral of exp(log_f) over [a, b] via scaled composite Gauss.

    log_f must be vectorized and may return -inf where the integrand
    vanishes.  The max of log_f on the node set is factored out so the
    summation never overflows.
    """
    if not a < b:
        raise InvalidIntervalError(f"invalid interval [{a!r}, {b!r}]")
    edges = np.linspace(a, b, panels + 1)
    x, w = _legendre(n)
    half = 0.5 * np.diff(edges)
    nodes = (edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    lf = np.asarray(log_f(nodes), dtype=float)
    m = lf.max()
    if m == -math.inf:
        return LogReal.zero()
    total = float(np.dot(weights, np.exp(lf - m)))
    if total <= 0.0:
        return LogReal.zero()
    return LogReal(1, m + math.log(total))


def gamma_weighted_log_integral(shape: float, log_g, u_lo: float, u_hi: float,
                                n: int = 64, panels: int = 16) -> LogReal:
    """(1/Gamma(shape)) * integral_{u_lo}^{u_hi} u^{shape-1} e^{-u} g(u) du.

    log_g returns log of the nonnegative factor g.  This is the common form
    of every cut-off moment after the substitution u = -2*l*log(t).
    """
    if u_lo >= u_hi:
        return LogReal.zero()
    lg = math.lgamma(shape)

    def log_f(u):
        u = np.asarray(u, dtype=float)
        return (shape - 1.0) * np.log(u) - u - lg + np.asarray(log_g(u), dtype=float)

    lo = max(u_lo, 1e-300)
    return log_integral(log_f, lo, u_hi, n=n, panels=panels)

"""Exact Bergman kernel of the Poincare punctured disc.

The weighted space of square-integrable holomorphic functions on the
punctured unit disc with weight |log|z|^2|^p has the orthonormal basis
c_l z^l, c_l = (l^{p-1} / (2 pi (p-2)!))^{1/2}, l >= 1.  Everything in
this module is built from that closed form: the diagonal kernel series,
the two-variable kernel, norms restricted to sub-discs, and the Kodaira
map into projective space together with its pulled-back Fubini-Study
density.

Series are summed adaptively in the log domain.  Truncation is certified
at runtime: after N terms the omitted mass relative to the full series is
at most (N+1)^{p-1} z^{2N} whenever (N+1) z^{2N/(p-1)} <= 1/2; outside
that regime a monotone geometric-ratio bound on consecutive terms is used
instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SeriesTruncationError
from .numerics import LogReal, reg_gamma_upper

__all__ = [
    "ModelBasis",
    "model_coeff",
    "log_model_coeff_sq",
    "KernelEvaluation",
    "model_kernel_diag",
    "model_kernel_offdiag",
    "model_norm_restricted",
    "model_moment_series",
    "KodairaPoint",
    "model_kodaira",
]

_TERM_CAP_DEFAULT = 10 ** 6
_BLOCK = 512


def _check_power(p: int):
    if p < 2 or int(p) != p:
        raise DomainError(f"tensor power must be an integer >= 2, got {p!r}")


def log_model_coeff_sq(p: int, ls) -> np.ndarray:
    """log of (c_l)^2 = l^{p-1} / (2 pi (p-2)!) for an array of indices l."""
    ls = np.asarray(ls, dtype=float)
    return (p - 1) * np.log(ls) - math.log(2 * math.pi) - math.lgamma(p - 1)


def model_coeff(p: int, l: int) -> LogReal:
    """Orthonormal coefficient c_l = (l^{p-1} / (2 pi (p-2)!))^{1/2}."""
    _check_power(p)
    if l < 1 or int(l) != l:
        raise DomainError(f"basis index must be an integer >= 1, got {l!r}")
    return LogReal(1, 0.5 * float(log_model_coeff_sq(p, l)))


@dataclass(frozen=True)
class ModelBasis:
    """Orthonormal basis data of the weighted disc at tensor power p."""

    p: int

    def __post_init__(self):
        _check_power(self.p)

    def coeff(self, l: int) -> LogReal:
        return model_coeff(self.p, l)

    def log_coeff_sq(self, ls) -> np.ndarray:
        return log_model_coeff_sq(self.p, ls)


@dataclass(frozen=True)
class KernelEvaluation:
    """Diagonal kernel value with its truncation certificate.

    certified_relative_tail bounds the omitted series mass relative to the
    returned value; terms_used is the summation length.
    """

    log_value: LogReal
    terms_used: int
    certified_relative_tail: float


def _tail_certificate(p: int, log_zabs: float, n: int) -> float:
    """Certified bound on tail(n) / head(n) for the series sum_l l^{p-1} z^{2l}.

    Primary: tail <= q * full with q = (n+1)^{p-1} z^{2n}, valid when
    (n+1) z^{2n/(p-1)} <= 1/2, hence tail/head <= q / (1 - q).
    Fallback: one-step geometric ratio r_n = ((n+1)/n)^{p-1} z^2 < 1, which
    is decreasing in n, so tail(n) <= term(n) * r_n / (1 - r_n); the caller
    converts term(n)/head to the relative form.  Returns inf if neither
    certificate applies yet.
    """
    log_q = (p - 1) * math.log(n + 1) + 2 * n * log_zabs
    valid = math.log(n + 1) + (2 * n / (p - 1)) * log_zabs <= -math.log(2.0)
    if valid and log_q < 0:
        q = math.exp(log_q)
        return q / (1.0 - q)
    return math.inf


def _geometric_tail(p: int, log_zabs: float, n: int, log_term_n: float,
                    log_head: float) -> float:
    ratio_log = (p - 1) * math.log((n + 1) / n) + 2 * log_zabs
    if ratio_log >= 0:
        return math.inf
    r = math.exp(ratio_log)
    return math.exp(log_term_n - log_head) * r / (1.0 - r)


def model_moment_series(p: int, s: float, power: int = 0,
                        rel_tol: float = 1e-12,
                        term_cap: int = _TERM_CAP_DEFAULT,
                        start: int = 1) -> tuple[LogReal, int, float]:
    """sum_{l>=start} l^power (c_l)^2 e^{l s} with certified truncation.

    Returns (value, terms_used, certified_relative_tail).  power = 0 is the
    kernel series itself; power = 1, 2 give the s-derivative moments used by
    the Fubini-Study density and the quotient derivatives.  The certificate
    is inherited from the power-0 series: the extra factor l^power is
    absorbed by running the bound at effective exponent p + power.
    """
    _check_power(p)
    if s >= 0:
        raise DomainError(f"series needs s = log|z|^2 < 0, got {s!r}")
    log_zabs = 0.5 * s
    base = -math.log(2 * math.pi) - math.lgamma(p - 1)
    p_eff = p + power
    n = start - 1
    log_head = -math.inf
    cert = math.inf
    while n < term_cap:
        ls = np.arange(n + 1, min(n + 1 + _BLOCK, term_cap + 1), dtype=float)
        logs = (p - 1 + power) * np.log(ls) + base + ls * s
        m = max(logs.max(), log_head)
        head = float(np.exp(logs - m).sum())
        if log_head > -math.inf:
            head += math.exp(log_head - m)
        log_head = m + math.log(head)
        n = int(ls[-1])
        cert = _tail_certificate(p_eff, log_zabs, n)
        if not math.isfinite(cert):
            cert = _geometric_tail(p_eff, log_zabs, n, float(logs[-1]), log_head)
        if cert <= rel_tol:
            return LogReal(1, log_head), n - (start - 1), cert
    raise SeriesTruncationError(
        f"model series did not certify to {rel_tol:g} within {term_cap} terms "
        f"(s={s:g}); point too close to the unit circle for this tolerance",
        achieved=cert, terms=n)


def model_kernel_diag(p: int, z_abs: float, rel_tol: float = 1e-12,
                      term_cap: int = _TERM_CAP_DEFAULT) -> KernelEvaluation:
    """Diagonal model kernel B_p(z) = |log|z|^2|^p sum_l (c_l)^2 |z|^{2l}."""
    _check_power(p)
    if not 0.0 < z_abs < 1.0:
        raise DomainError(f"need 0 < |z| < 1, got {z_abs!r}")
    s = 2.0 * math.log(z_abs)
    series, terms, cert = model_moment_series(p, s, 0, rel_tol, term_cap)
    value = LogReal(1, p * math.log(-s) + series.log)
    return KernelEvaluation(log_value=value, terms_used=terms,
                            certified_relative_tail=cert)


def model_kernel_offdiag(p: int, x: complex, y: complex,
                         rel_tol: float = 1e-12,
                         term_cap: int = _TERM_CAP_DEFAULT) -> tuple[LogReal, float]:
    """Two-variable kernel beta_p(x, y) = (1/(2 pi (p-2)!)) sum_l l^{p-1} x^l conj(y)^l.

    Returned as (log magnitude, phase).  The truncation certificate runs on
    the absolute series in |x y|, so the reported magnitude is reliable up to
    rel_tol as long as the angular sum does not cancel to below that level.
    """
    _check_power(p)
    ax, ay = abs(x), abs(y)
    if not (0.0 < ax < 1.0 and 0.0 < ay < 1.0):
        raise DomainError("need 0 < |x| < 1 and 0 < |y| < 1")
    w = complex(x) * complex(y).conjugate()
    s = math.log(abs(w))
    theta = math.atan2(w.imag, w.real)
    base = -math.log(2 * math.pi) - math.lgamma(p - 1)

    acc = 0.0 + 0.0j
    log_scale = -math.inf
    log_abs_head = -math.inf
    n = 0
    while n < term_cap:
        ls = np.arange(n + 1, min(n + 1 + _BLOCK, term_cap + 1), dtype=float)
        logs = (p - 1) * np.log(ls) + base + ls * s
        m = max(logs.max(), log_scale)
        if log_scale > -math.inf:
            acc = acc * math.exp(log_scale - m)
        acc = acc + np.sum(np.exp(logs - m) * np.exp(1j * ls * theta))
        log_scale = m
        head_new = float(np.exp(logs - m).sum()) + (
            math.exp(log_abs_head - m) if log_abs_head > -math.inf else 0.0)
        log_abs_head = m + math.log(head_new)
        n = int(ls[-1])
        cert = _tail_certificate(p, 0.5 * s, n)
        if not math.isfinite(cert):
            cert = _geometric_tail(p, 0.5 * s, n, float(logs[-1]), log_abs_head)
        if cert <= rel_tol:
            mag = abs(acc)
            if mag == 0.0:
                return LogReal.zero(), 0.0
            return LogReal(1, log_scale + math.log(mag)), math.atan2(acc.imag, acc.real)
    raise SeriesTruncationError(
        f"off-diagonal series did not certify to {rel_tol:g} within {term_cap} terms",
        achieved=cert, terms=n)


def model_norm_restricted(p: int, l: int, radius: float) -> float:
    """Squared norm of c_l z^l restricted to |z| <= radius.

    The substitution u = -2 l log t turns the radial integral into the
    regularized upper gamma Q(p-1, 2 l |log radius|); equal to 1 at radius 1.
    """
    _check_power(p)
    if l < 1 or int(l) != l:
        raise DomainError(f"basis index must be an integer >= 1, got {l!r}")
    if not 0.0 < radius <= 1.0:
        raise DomainError(f"need 0 < radius <= 1, got {radius!r}")
    if radius == 1.0:
        return 1.0
    return reg_gamma_upper(p - 1, 2.0 * l * abs(math.log(radius)))


@dataclass(frozen=True)
class KodairaPoint:
    """Finite slice of the model Kodaira map plus the pulled-back FS density.

    components holds the first n homogeneous coordinates c_l z^l scaled so
    the largest magnitude is 1.  fs_density is the density of the pulled
    back Fubini-Study form against i dz wedge dzbar / |z|^2, computed from
    the full series by analytic differentiation in s = log|z|^2.
    """

    components: np.ndarray
    fs_density: float


def fs_density_model(p: int, s: float, rel_tol: float = 1e-12) -> float:
    """(1/(2 pi)) d^2/ds^2 log sum_l (c_l)^2 e^{l s}: variance of the index l.

    Computed as a shifted second moment, Var = <(l - l0)^2> - (<l> - l0)^2
    with l0 the nearest integer to <l>, so the final subtraction cannot
    cancel catastrophically even deep in the cusp where the weight collapses
    onto l = 1.
    """
    m0, _, _ = model_moment_series(p, s, 0, rel_tol)
    m1, _, _ = model_moment_series(p, s, 1, rel_tol)
    m2, n2, _ = model_moment_series(p, s, 2, rel_tol)
    mean = (m1 / m0).to_float()
    l0 = max(1, round(mean))
    # accumulate <(l - l0)^2> directly; its tail is dominated by the tail of
    # the plain second moment, which is certified once n passes n2
    base = -math.log(2 * math.pi) - math.lgamma(p - 1)
    n_stop = max(n2, 2 * l0 + _BLOCK)
    ls = np.arange(1, n_stop + 1, dtype=float)
    logs = (p - 1) * np.log(ls) + base + ls * s
    m = logs.max()
    shifted = float(np.sum(np.exp(logs - m) * (ls - l0) ** 2))
    second = shifted * math.exp(m - m0.log)
    var = second - (mean - l0) ** 2
    return var / (2 * math.pi)


def model_kodaira(p: int, z: complex, n: int, rel_tol: float = 1e-12) -> KodairaPoint:
    """First n homogeneous components of the Kodaira map iota_p at z.

    Rotation acts diagonally on the components and leaves fs_density fixed.
    """
    _check_power(p)
    if n < 2 or int(n) != n:
        raise DomainError(f"need at least 2 components, got {n!r}")
    az = abs(z)
    if not 0.0 < az < 1.0:
        raise DomainError(f"need 0 < |z| < 1, got {az!r}")
    ls = np.arange(1, n + 1, dtype=float)
    logs = 0.5 * log_model_coeff_sq(p, ls) + ls * math.log(az)
    m = logs.max()
    phases = np.exp(1j * ls * math.atan2(z.imag, z.real))
    comps = np.exp(logs - m) * phases
    s = 2.0 * math.log(az)
    return KodairaPoint(components=comps, fs_density=fs_density_model(p, s, rel_tol))

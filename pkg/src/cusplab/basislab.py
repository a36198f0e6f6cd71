"""Constructive basis machinery: cut-off sections and their orthonormalization.

The head sections start as c_l * chi(|z|) * z^l with a quintic-smoothstep
cut-off chi supported in [r^beta, 2r].  Projection onto holomorphic
sections, Gram-Schmidt, and completion to a full orthonormal basis produce
the coefficient matrix a_{jl} (sections expanded in monomials), the head
defect reports, and the epsilon matrix that drives the kernel-quotient
derivative series.

All cut-off integrals reduce, via u = -2 l log t, to gamma-weighted
integrals over a finite u-window, evaluated in the log domain; the cut-off
support must lie inside the exact-cusp region of the surface (2r <=
e^{-S0/2}), which makes every head integral identical on the surface and
on the disc model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DomainError, EmptyScheduleError, RankDeficiencyError)
from .numerics import (LogReal, gamma_weighted_log_integral, gauss_rule,
                       log_reg_gamma_lower)
from .discmodel import log_model_coeff_sq, model_coeff
from .surface import (GramData, SurfaceModel, dimension, global_kernel,
                      gram_matrix, norm_deviations)

__all__ = [
    "Cutoff",
    "cutoff_eval",
    "TruncationSchedule",
    "TruncatedSection",
    "truncated_section",
    "head_norm_defect",
    "chi_moment_deficits",
    "OrthoBasis",
    "project_and_orthonormalize",
    "HeadClosenessRow",
    "head_closeness_report",
    "coefficient_tail_bound",
    "kodaira_laplacian_apply",
    "laplacian_norm",
    "laplacian_decay_check",
    "minimal_power_for_head",
    "epsilon_matrix",
]


@dataclass(frozen=True)
class Cutoff:
    """Quintic smoothstep cut-off: 1 on [0, r^beta], 0 beyond 2r.

    Requires 0 < r < 1/(4e) and r^beta < 2r; the bridge is
    1 - (10 t^3 - 15 t^4 + 6 t^5), which keeps chi'' continuous (the
    Kodaira Laplacian needs exactly chi' and chi'').
    """

    r: float = 0.05
    beta: float = 0.85

    def __post_init__(self):
        if not 0.0 < self.r < 1.0 / (4 * math.e):
            raise DomainError(f"need 0 < r < 1/(4e) ~ {1/(4*math.e):.4f}, got {self.r!r}")
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"need 0 < beta < 1, got {self.beta!r}")
        if not self.inner < self.outer:
            raise DomainError(
                f"need r^beta < 2r: r^beta = {self.inner:.4g}, 2r = {self.outer:.4g}")

    @property
    def inner(self) -> float:
        return self.r ** self.beta

    @property
    def outer(self) -> float:
        return 2.0 * self.r

    def chi(self, u, order: int = 0):
        u = np.asarray(u, dtype=float)
        lo, hi = self.inner, self.outer
        t = np.clip((u - lo) / (hi - lo), 0.0, 1.0)
        if order == 0:
            v = 1.0 - (10 * t ** 3 - 15 * t ** 4 + 6 * t ** 5)
        elif order == 1:
            v = -(30 * t ** 2 - 60 * t ** 3 + 30 * t ** 4) / (hi - lo)
        elif order == 2:
            v = -(60 * t - 180 * t ** 2 + 120 * t ** 3) / (hi - lo) ** 2
        else:
            raise DomainError(f"derivative order must be 0, 1 or 2, got {order!r}")
        if order > 0:
            v = np.where((t <= 0.0) | (t >= 1.0), 0.0, v)
        return v if np.ndim(u) else float(v)


def cutoff_eval(cutoff: Cutoff, u: float, order: int = 0) -> float:
    """chi(u), chi'(u) or chi''(u)."""
    if u < 0:
        raise DomainError(f"cut-off argument must be nonnegative, got {u!r}")
    return cutoff.chi(u, order)


@dataclass(frozen=True)
class TruncationSchedule:
    """Head-count schedules delta_p (coarse) and delta'_p (refined).

    delta_p = floor((p-2) / (2|log r|)); the refined schedule uses
    c(kappa) in (0, e^{-1}] with log c <= -1 - 2 kappa (default: the maximal
    value e^{-1-2 kappa}) and delta'_p = floor((p-2) c / (2|log r|)) - 2.
    """

    r: float = 0.05
    beta: float = 0.85
    kappa: float = 0.5
    c_kappa: float | None = None

    def __post_init__(self):
        if self.kappa <= 0:
            raise DomainError(f"kappa must be positive, got {self.kappa!r}")
        c = self.c_kappa if self.c_kappa is not None else math.exp(-1.0 - 2.0 * self.kappa)
        if not 0.0 < c < 1.0 / math.e or math.log(c) > -1.0 - 2.0 * self.kappa + 1e-15:
            raise DomainError(
                f"c(kappa) must lie in (0, 1/e) with log c <= -1 - 2 kappa, got {c!r}")
        object.__setattr__(self, "c_kappa", c)

    @property
    def log_r_abs(self) -> float:
        return abs(math.log(self.r))

    @property
    def p_min(self) -> int:
        """Smallest p for which delta_p >= 1 (p >= 2 + 2|log r|)."""
        return math.ceil(2.0 + 2.0 * self.log_r_abs)

    def delta(self, p: int) -> int:
        return int((p - 2) / (2.0 * self.log_r_abs))

    def delta_prime(self, p: int) -> int:
        return int((p - 2) * self.c_kappa / (2.0 * self.log_r_abs)) - 2

    def alpha(self, p: int) -> float:
        """The largest alpha with alpha * p <= delta_p at this p."""
        d = self.delta(p)
        if d < 1:
            raise DomainError(f"schedule empty at p={p}; need p >= {self.p_min}")
        return d / p

    def head_count(self, p: int, refined: bool = False) -> int:
        return self.delta_prime(p) if refined else self.delta(p)


def minimal_power_for_head(schedule: TruncationSchedule, l: int = 1) -> int:
    """Smallest p with delta'_p >= l for the given schedule."""
    need = (l + 2) * 2.0 * schedule.log_r_abs / schedule.c_kappa + 2.0
    p = math.ceil(need)
    while schedule.delta_prime(p) < l:
        p += 1
    return p


@dataclass(frozen=True)
class TruncatedSection:
    """Cut-off head section c_l * chi(|z|) * z^l."""

    p: int
    l: int
    cutoff: Cutoff
    coeff: LogReal

    def eval(self, z: complex) -> complex:
        chi = self.cutoff.chi(abs(z))
        if chi == 0.0:
            return 0.0j
        return self.coeff.to_float() * chi * complex(z) ** self.l

    def h_norm_pointwise(self, z: complex) -> LogReal:
        """Pointwise h^p-norm |phi|_{h^p}(z) = |log|z|^2|^{p/2} c_l chi |z|^l."""
        az = abs(z)
        chi = self.cutoff.chi(az)
        if chi == 0.0 or az == 0.0:
            return LogReal.zero()
        log_val = (0.5 * self.p * math.log(abs(math.log(az * az)))
                   + self.coeff.log + self.l * math.log(az) + math.log(chi))
        return LogReal(1, log_val)


def truncated_section(p: int, l: int, cutoff: Cutoff) -> TruncatedSection:
    if l < 1 or int(l) != l:
        raise DomainError(f"head index must be a positive integer, got {l!r}")
    return TruncatedSection(p=p, l=l, cutoff=cutoff, coeff=model_coeff(p, l))


def _chi_weight_moment(p: int, l: int, cutoff: Cutoff, kind: str) -> LogReal:
    """(1/(p-2)!) * int_0^{2 l beta |log r|} u^{p-2} e^{-u} g(chi) du.

    kind selects g: "one_minus_chi", "one_minus_chi_sq", "one_minus_chi_all_sq"
    for 1 - chi, 1 - chi^2, (1 - chi)^2.  The integration window is split at
    u = 2 l |log 2r|, where the cut-off bridge begins, so every quadrature
    panel sees a smooth integrand.
    """
    u_break = 2.0 * l * abs(math.log(cutoff.outer))
    u_top = 2.0 * l * cutoff.beta * abs(math.log(cutoff.r))

    def log_g(u):
        chi = cutoff.chi(np.exp(-np.asarray(u) / (2.0 * l)))
        if kind == "one_minus_chi":
            g = 1.0 - chi
        elif kind == "one_minus_chi_sq":
            g = 1.0 - chi * chi
        elif kind == "one_minus_chi_all_sq":
            g = (1.0 - chi) ** 2
        else:
            raise DomainError(f"unknown moment kind {kind!r}")
        with np.errstate(divide="ignore"):
            return np.log(g)

    outer = gamma_weighted_log_integral(p - 1, log_g, 0.0, u_break, n=64, panels=12)
    window = gamma_weighted_log_integral(p - 1, log_g, u_break, u_top, n=64, panels=12)
    return outer + window


def chi_moment_deficits(p: int, l: int, cutoff: Cutoff) -> tuple[LogReal, LogReal, LogReal]:
    """(1 - chi moment, 1 - chi^2 moment, (1-chi)^2 moment) for head l."""
    return (_chi_weight_moment(p, l, cutoff, "one_minus_chi"),
            _chi_weight_moment(p, l, cutoff, "one_minus_chi_sq"),
            _chi_weight_moment(p, l, cutoff, "one_minus_chi_all_sq"))


def head_norm_defect(p: int, l: int, cutoff: Cutoff,
                     schedule: TruncationSchedule) -> tuple[float, float]:
    """(defect, majorant): defect = 1 - ||c_l chi z^l||^2 and its gamma bound.

    The majorant is P(p-1, 2 delta_p beta |log r|), uniform over the heads;
    0 <= defect <= majorant holds term by term in the integrand.
    """
    delta = schedule.delta(p)
    if not 1 <= l <= delta:
        raise DomainError(f"head index {l} outside 1..delta_p = {delta}")
    defect = _chi_weight_moment(p, l, cutoff, "one_minus_chi_sq").to_float()
    bound = log_reg_gamma_lower(
        p - 1, 2.0 * delta * cutoff.beta * abs(math.log(cutoff.r))).to_float()
    return defect, bound


# ---------------------------------------------------------------------------
# orthonormal basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal basis in monomial coordinates, scaled by the model coefficients.

    scaled[j-1, l-1] holds a_{jl} / c_j, so the echelon zero block and the
    closeness of heads to the model basis read off directly.  In symmetric
    mode the matrix is exactly diagonal.  log_c carries log c_j for
    rescaling back; chi_moments the head cut-off moments used by the
    reports.
    """

    p: int
    mode: str
    head_count: int
    refined: bool
    schedule: TruncationSchedule
    cutoff: Cutoff
    scaled: np.ndarray
    log_c: np.ndarray
    log_norms: np.ndarray
    gram: GramData

    @property
    def dim(self) -> int:
        return self.scaled.shape[0]

    def coefficient(self, j: int, l: int) -> LogReal:
        """a_{jl} as a LogReal."""
        v = self.scaled[j - 1, l - 1]
        if v == 0.0:
            return LogReal.zero()
        return LogReal(1 if v > 0 else -1, math.log(abs(v)) + self.log_c[j - 1])

    def epsilon(self, cap: int | None = None) -> np.ndarray:
        """Deviation matrix eps_{qs} of this basis against the disc model."""
        return epsilon_matrix(self, cap)

    def export_rows(self):
        """(j, l, sign, log_abs) rows of the dense a_{jl} matrix."""
        rows = []
        for j in range(1, self.dim + 1):
            for l in range(1, self.dim + 1):
                v = self.scaled[j - 1, l - 1]
                if v == 0.0:
                    rows.append((j, l, 0, 0.0))
                else:
                    rows.append((j, l, 1 if v > 0 else -1,
                                 math.log(abs(v)) + self.log_c[j - 1]))
        return rows


def _validate_cutoff_inside_cusp(model: SurfaceModel, cutoff: Cutoff):
    # supp chi must sit inside the exact-cusp region s <= -S0
    if 2.0 * math.log(cutoff.outer) > -model.S0 + 1e-12:
        raise DomainError(
            f"cut-off support |z| <= {cutoff.outer:g} leaves the exact cusp "
            f"region s <= -{model.S0:g}; decrease r or increase the bundle degree")


def project_and_orthonormalize(model: SurfaceModel, p: int,
                               schedule: TruncationSchedule | None = None,
                               cutoff: Cutoff | None = None,
                               refined: bool = False,
                               gram: GramData | None = None) -> OrthoBasis:
    """Project the cut-off heads onto holomorphic sections and orthonormalize.

    Because the cut-off is radial and supported in the exact cusp, the
    projection of head l is proportional to G^{-1} e_l; modified
    Gram-Schmidt (with one re-orthogonalization pass) over the heads,
    completed by the remaining monomials, yields the full basis.
    """
    schedule = schedule or TruncationSchedule()
    cutoff = cutoff or Cutoff(r=schedule.r, beta=schedule.beta)
    if not math.isclose(cutoff.r, schedule.r) or not math.isclose(cutoff.beta, schedule.beta):
        raise DomainError("cutoff and schedule must share r and beta")
    _validate_cutoff_inside_cusp(model, cutoff)
    d = dimension(model, p)
    head = schedule.head_count(p, refined=refined)
    if head < 1:
        raise EmptyScheduleError(
            f"schedule is empty at p={p}",
            minimal_p=minimal_power_for_head(schedule, 1) if refined else schedule.p_min)
    head = min(head, d)
    if gram is None:
        gram = gram_matrix(model, p)
    js = np.arange(1, d + 1, dtype=float)
    log_c = 0.5 * log_model_coeff_sq(p, js)

    if gram.mode == "symmetric":
        # projection of head l is parallel to z^l; Gram-Schmidt reduces to
        # normalization, so a_{jl}/c_j = delta_{jl} / (c_j ||z^j||)
        scaled = np.diag(np.exp(-(log_c + 0.5 * gram.log_norms)))
        return OrthoBasis(p=p, mode="symmetric", head_count=head, refined=refined,
                          schedule=schedule, cutoff=cutoff, scaled=scaled,
                          log_c=log_c, log_norms=gram.log_norms.copy(), gram=gram)

    # perturbed mode: work in the diagonally scaled monomial frame
    gt = gram.scaled
    cols = np.zeros((d, d))
    for l in range(head):
        cols[:, l] = np.linalg.solve(gt, np.eye(d)[:, l])
    cols[:, head:] = np.eye(d)[:, head:]

    def gdot(u, v):
        return float(u @ (gt @ v))

    q = np.zeros((d, d))
    for i in range(d):
        v = cols[:, i].copy()
        norm0 = math.sqrt(gdot(v, v))
        for _pass in range(2):  # modified GS with re-orthogonalization
            for jcol in range(i):
                v -= gdot(q[:, jcol], v) * q[:, jcol]
        nrm = math.sqrt(gdot(v, v))
        if nrm < 1e-8 * norm0:
            raise RankDeficiencyError(
                f"head section {i + 1} is numerically dependent at p={p}; "
                "the head count is too large for this power")
        q[:, i] = v / nrm
    # back to raw monomial coordinates: a_{jl} = q_{jl} / sqrt(D_j), so
    # a_{jl}/c_j = q_{jl} * exp(-0.5 log D_j - log c_j)
    scale_back = np.exp(-0.5 * gram.log_diag - log_c)
    scaled = q * scale_back[:, None]
    return OrthoBasis(p=p, mode="perturbed", head_count=head, refined=refined,
                      schedule=schedule, cutoff=cutoff, scaled=scaled,
                      log_c=log_c, log_norms=gram.log_norms.copy(), gram=gram)


@dataclass(frozen=True)
class HeadClosenessRow:
    """Per-head closeness report: the L^2 defect of sigma_l versus the cut-off
    section and the worst off-diagonal inner product against the projected heads."""

    l: int
    sigma_defect: float
    max_offdiag: float
    diag_deviation: float


def head_closeness_report(basis: OrthoBasis, model: SurfaceModel) -> list[HeadClosenessRow]:
    """Head defects ||sigma_l - phi_{l,0}|| and inner-product deviations.

    Symmetric mode is semi-analytic: with eps1 = (1 - chi) moment and nu =
    (c_l ||z^l||)^2 - 1 (cancellation-free pieces from norm_deviations),
    ||sigma_l - phi_{l,0}||^2 = (1-chi)^2-moment + 2 (1 - eps1)(1 - 1/sqrt(1+nu)),
    so no near-1 subtraction ever happens.
    """
    rows = []
    p = basis.p
    nus = norm_deviations(model, p) if basis.mode == "symmetric" else None
    for l in range(1, basis.head_count + 1):
        d1, d2, dsq = chi_moment_deficits(p, l, basis.cutoff)
        if basis.mode == "symmetric":
            nu = nus[l - 1].to_float()
            eps1 = d1.to_float()
            shrink = -math.expm1(-0.5 * math.log1p(nu))  # 1 - (1+nu)^{-1/2}
            defect_sq = dsq.to_float() + 2.0 * (1.0 - eps1) * shrink
            defect = math.sqrt(max(defect_sq, 0.0))
            # <phi_j, sigma_l> = delta_jl (1 - eps1)/sqrt(1+nu); off-diagonal exact 0
            diag_dev = abs(math.expm1(math.log1p(-eps1) - 0.5 * math.log1p(nu)))
            rows.append(HeadClosenessRow(l=l, sigma_defect=defect,
                                   max_offdiag=0.0, diag_deviation=diag_dev))
        else:
            # <sigma_m, phi_j> = (1 - eps1_j) * scaled[j-1, m-1]
            eps1_vec = [chi_moment_deficits(p, j, basis.cutoff)[0].to_float()
                        for j in range(1, basis.head_count + 1)]
            col = basis.scaled[: basis.head_count, l - 1]
            inner = (1.0 - np.asarray(eps1_vec)) * col
            diag_dev = abs(inner[l - 1] - 1.0)
            off = np.delete(inner, l - 1)
            max_off = float(np.max(np.abs(off))) if off.size else 0.0
            defect_sq = 1.0 + (1.0 - d2.to_float()) - 2.0 * inner[l - 1]
            defect = math.sqrt(max(defect_sq, 0.0))
            rows.append(HeadClosenessRow(l=l, sigma_defect=defect,
                                   max_offdiag=max_off, diag_deviation=diag_dev))
    return rows


def coefficient_tail_bound(model: SurfaceModel, basis: OrthoBasis, j: int, l: int,
                           n_angles: int = 32) -> tuple[LogReal, LogReal]:
    """(|a_{jl}|, Cauchy bound (2r)^{-j} |log (2r)^2|^{-p/2} sup_{|z|=2r} B_p^{1/2})."""
    p = basis.p
    two_r = basis.cutoff.outer
    if basis.mode == "symmetric":
        log_sup_b = global_kernel(model, p, two_r, basis.gram).log
    else:
        angles = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False)
        log_sup_b = max(global_kernel(model, p, two_r * complex(math.cos(a), math.sin(a)),
                                      basis.gram).log for a in angles)
    log_bound = (-j * math.log(two_r)
                 - 0.5 * p * math.log(abs(math.log(two_r * two_r)))
                 + 0.5 * log_sup_b)
    a_jl = abs(basis.coefficient(j, l))
    return a_jl, LogReal(1, log_bound)


# ---------------------------------------------------------------------------
# Kodaira Laplacian on cut-off sections
# ---------------------------------------------------------------------------


def _laplacian_bracket(p: int, l: int, cutoff: Cutoff, t):
    """Radial factor of box_p phi_{0,l} / (c_l z^l): three chi-derivative terms."""
    t = np.asarray(t, dtype=float)
    log2 = np.log(t * t)
    chi1 = cutoff.chi(t, 1)
    chi2 = cutoff.chi(t, 2)
    return (-(2 * l + 1) / 4.0 * t * log2 ** 2 * chi1
            - 0.25 * t * t * log2 ** 2 * chi2
            - 0.5 * p * t * log2 * chi1)


def kodaira_laplacian_apply(p: int, l: int, cutoff: Cutoff, z: complex) -> complex:
    """box_p applied to the cut-off head, evaluated pointwise by the closed form.

    Vanishes identically off the cut-off bridge (holomorphic sections are
    harmonic).  Intended for moderate p; the L^2 norm below stays in the log
    domain for large p.
    """
    z = complex(z)
    t = abs(z)
    if t == 0.0 or cutoff.chi(t, 1) == 0.0 and cutoff.chi(t, 2) == 0.0:
        return 0.0j
    c_l = model_coeff(p, l).to_float()
    return c_l * float(_laplacian_bracket(p, l, cutoff, t)) * z ** l


def laplacian_norm(p: int, l: int, cutoff: Cutoff) -> LogReal:
    """L^2 norm ||box_p phi_{0,l}|| over the cusp, by log-domain quadrature.

    The integrand c_l^2 bracket(t)^2 t^{2l} |log t^2|^p * 4 pi/(t log^2 t^2)
    is supported on [r^beta, 2r].
    """
    lo, hi = cutoff.inner, cutoff.outer
    rule = gauss_rule(96, -1.0, 1.0)
    panels = np.linspace(lo, hi, 25)
    half = 0.5 * np.diff(panels)
    nodes = (panels[:-1, None] + half[:, None] * (rule.nodes[None, :] + 1.0)).ravel()
    weights = (half[:, None] * rule.weights[None, :]).ravel()
    bracket = _laplacian_bracket(p, l, cutoff, nodes)
    log2 = np.log(nodes * nodes)
    with np.errstate(divide="ignore"):
        log_f = (2.0 * np.log(np.abs(bracket)) + 2 * l * np.log(nodes)
                 + p * np.log(np.abs(log2)) - np.log(nodes) - 2 * np.log(np.abs(log2))
                 + math.log(4 * math.pi))
    m = float(log_f.max())
    total = float(np.dot(weights, np.exp(log_f - m)))
    log_sq = float(log_model_coeff_sq(p, np.array([l]))[0]) + m + math.log(total)
    return LogReal(1, 0.5 * log_sq)


def laplacian_decay_check(p_ladder, l: int, schedule: TruncationSchedule,
                          cutoff: Cutoff, slack: float = 0.2):
    """Norms ||box phi_{0,l}||/p^2 along a p-ladder plus the one-sided rate check.

    The bound being verified is an upper bound C p^2 e^{-kappa p}, so the
    check requires the observed decay rate to be at least kappa*(1 - slack)
    per unit p between consecutive ladder points; faster decay passes.
    """
    p_ladder = list(p_ladder)
    for p in p_ladder:
        dp = schedule.delta_prime(p)
        if dp < max(1, l):
            raise EmptyScheduleError(
                f"delta'_{p} = {dp} < {max(1, l)} for kappa={schedule.kappa}",
                minimal_p=minimal_power_for_head(schedule, max(1, l)))
    logs = [laplacian_norm(p, l, cutoff).log - 2.0 * math.log(p) for p in p_ladder]
    ok = True
    for (p0, y0), (p1, y1) in zip(zip(p_ladder, logs), zip(p_ladder[1:], logs[1:])):
        rate = -(y1 - y0) / (p1 - p0)
        if rate < schedule.kappa * (1.0 - slack):
            ok = False
    return logs, ok


def epsilon_matrix(basis: OrthoBasis, cap: int | None = None) -> np.ndarray:
    """eps_{qs} = sum_l a_{ql} conj(a_{sl}) / (c_q c_s) - delta_{qs}, up to cap."""
    d = basis.dim
    cap = d if cap is None else min(cap, d)
    block = basis.scaled[:cap, :]
    return block @ block.T - np.eye(cap)

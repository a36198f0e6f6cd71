"""Kernel quotient, Fubini-Study pullbacks, and random-section zeros.

The central object is the deviation vector eps_q = 1/(c_q ||z^q||)^2 - 1,
assembled from cancellation-free incomplete-gamma and bridge pieces.  In
the cusp region (s = log|z|^2 <= -S0) the kernel quotient is

    B_p / B_p^model = 1 + E(s)/D(s),
    E(s) = sum_q (c_q)^2 eps_q e^{q s},   D(s) = sum_q (c_q)^2 e^{q s},

with E carrying the tiny deviations at full relative precision; forming
the quotient as a ratio of two log-kernels would bury everything below the
~1e-12 noise floor of the big logarithms.  Derivatives in z follow either
from the radial moments of E and D (radial path) or from the explicit
coefficient series in eps (series path); both are exposed so they can
cross-check each other and central finite differences.

Random holomorphic sections are sampled as standard complex Gaussians in
an orthonormal basis; their zeros come from a balanced companion-matrix
solve with one Newton polishing step and a scale-aware residual gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DifferentiationInstabilityError, DomainError,
                     RootPolishError)
from .numerics import LogReal, gauss_rule, signed_log_sum
from .discmodel import log_model_coeff_sq, model_moment_series
from .surface import (GramData, SurfaceModel, dimension, global_kernel,
                      gram_matrix, log_section_norms, norm_deviations)
from .basislab import OrthoBasis, epsilon_matrix

__all__ = [
    "CuspComparison",
    "quotient",
    "quotient_derivative",
    "fs_pullback",
    "eta_p",
    "eta_zero_limit",
    "QuotientScan",
    "quotient_scan",
    "fitted_loglog_slope",
    "ZeroEnsemble",
    "sample_sections",
    "zero_statistics",
    "zero_mass_conservation",
    "fs_current_pairing",
]


class CuspComparison:
    """Symmetric-mode comparison engine between B_p and the disc model."""

    def __init__(self, model: SurfaceModel, p: int, self_comparison: bool = False,
                 rel_tol: float = 1e-12):
        self.model = model
        self.p = int(p)
        self.rel_tol = rel_tol
        if not model.symmetric:
            raise DomainError("CuspComparison needs a circle-symmetric model")
        self.d = dimension(model, p)
        self.self_comparison = bool(self_comparison)
        qs = np.arange(1, self.d + 1, dtype=float)
        self.qs = qs
        self.log_c2 = log_model_coeff_sq(p, qs)
        if self_comparison:
            eps = [LogReal.zero()] * self.d
        else:
            # eps_q = -nu_q / (1 + nu_q), nu_q = (c_q ||z^q||)^2 - 1
            eps = []
            for nu in norm_deviations(model, p):
                eps.append(-nu / (LogReal.one() + nu))
        self.eps = eps
        self.eps_sign = np.array([e.sign for e in eps], dtype=float)
        self.eps_log = np.array([e.log if e.sign else -np.inf for e in eps])

    # -- radial moments ----------------------------------------------------

    def model_moment(self, s: float, power: int) -> LogReal:
        val, _, _ = model_moment_series(self.p, s, power, self.rel_tol)
        return val

    def deviation_moment(self, s: float, power: int) -> LogReal:
        """sum_q q^power (c_q)^2 eps_q e^{q s}, with the q > d_p model tail
        (where eps = -1) subtracted exactly.  Identically zero when the
        surface data has been replaced by the model's own (self-comparison,
        where the full model basis is present by definition)."""
        if self.self_comparison:
            return LogReal.zero()
        logs = self.log_c2 + self.qs * s + power * np.log(self.qs) + self.eps_log
        within = signed_log_sum(logs, self.eps_sign)
        beyond, _, _ = model_moment_series(self.p, s, power, self.rel_tol,
                                           start=self.d + 1)
        return within - beyond

    def _check_region(self, s: float):
        if s > -self.model.S0 + 1e-12:
            raise DomainError(
                f"quotient comparison needs s = log|z|^2 <= -S0 = {-self.model.S0:g}, "
                f"got s = {s:g} (outside the exact-cusp region)")

    # -- quotient and derivatives -------------------------------------------

    def quotient_minus_one(self, s: float) -> float:
        self._check_region(s)
        return (self.deviation_moment(s, 0) / self.model_moment(s, 0)).to_float()

    def quotient(self, s: float) -> float:
        return 1.0 + self.quotient_minus_one(s)

    def quotient_direct(self, s: float) -> float:
        """Same quotient as exp(log N - log D); the coarse cross-check path."""
        self._check_region(s)
        logs = self.qs * s - log_section_norms(self.model, self.p)
        m = logs.max()
        log_n = m + math.log(np.exp(logs - m).sum())
        return math.exp(log_n - self.model_moment(s, 0).log)

    def _g_derivatives(self, s: float):
        """(G, G', G'') for G = E/D as floats (values are small in the cusp)."""
        d0 = self.model_moment(s, 0)
        d1 = self.model_moment(s, 1)
        d2 = self.model_moment(s, 2)
        e0 = self.deviation_moment(s, 0)
        e1 = self.deviation_moment(s, 1)
        e2 = self.deviation_moment(s, 2)
        g = e0 / d0
        gp = (e1 * d0 - e0 * d1) / (d0 * d0)
        # G'' = E''/D - (2 E' D' + E D'')/D^2 + 2 E D'^2 / D^3
        gpp = (e2 / d0 - (LogReal.from_float(2.0) * e1 * d1 + e0 * d2) / (d0 * d0)
               + LogReal.from_float(2.0) * e0 * d1 * d1 / (d0 * d0 * d0))
        return g.to_float(), gp.to_float(), gpp.to_float()

    def radial_dF(self, s: float) -> tuple[float, float]:
        """(F'(s), F''(s)) of the quotient F = 1 + E/D against s."""
        self._check_region(s)
        _, gp, gpp = self._g_derivatives(s)
        return gp, gpp

    def log_quotient_dd(self, s: float) -> float:
        """(d^2/ds^2) log(B_p / B_p^model) = (G''(1+G) - G'^2)/(1+G)^2."""
        self._check_region(s)
        g, gp, gpp = self._g_derivatives(s)
        return (gpp * (1.0 + g) - gp * gp) / (1.0 + g) ** 2

    def eta(self, s: float) -> float:
        """Density of iota_p^* omega_FS - J_p^* omega_FS against i dz wedge dzbar."""
        return -math.exp(-s) * self.log_quotient_dd(s) / (2 * math.pi)

    def eta_zero_limit(self) -> float:
        """Smooth extension of eta across the puncture:
        -(1/2 pi) (c_2/c_1)^2 (eps_2 - eps_1) / (1 + eps_1)."""
        if self.d < 2:
            raise DomainError("need at least two basis sections for the z -> 0 limit")
        diff = self.eps[1] - self.eps[0]
        ratio = LogReal(1, self.log_c2[1] - self.log_c2[0])
        val = ratio * diff / (LogReal.one() + self.eps[0])
        return -val.to_float() / (2 * math.pi)

    # -- series paths (explicit coefficient sums) ----------------------------

    def _m_cap(self, s: float) -> int:
        _, terms, _ = model_moment_series(self.p, s, 2, self.rel_tol)
        return terms

    def series_dz(self, z: complex, order: int = 1) -> complex:
        """d/dz or d^2/dz^2 of the quotient by the explicit eps-weighted series.

        Order 1 is (beta)^{-2} sum_{q,m} (q-m)(c_m)^2 (c_q)^2 eps_q z^{q+m-1}
        zbar^{q+m}; order 2 factorizes its extra index t into model moments.
        The q > d_p tail (eps = -1) enters through closed moment products.
        """
        z = complex(z)
        s = 2.0 * math.log(abs(z))
        self._check_region(s)
        if self.self_comparison:
            return 0.0j
        mcap = self._m_cap(s)
        ms = np.arange(1, mcap + 1, dtype=float)
        log_y = log_model_coeff_sq(self.p, ms) + ms * s  # Y_m = c_m^2 e^{ms}
        log_x = self.log_c2 + self.qs * s + self.eps_log  # X_q = c_q^2 eps_q e^{qs}

        qgrid = self.qs[:, None]
        mgrid = ms[None, :]
        logs = (log_x[:, None] + log_y[None, :])
        weight = qgrid - mgrid
        signs = self.eps_sign[:, None] * np.sign(weight)
        with np.errstate(divide="ignore"):
            logs_w = logs + np.log(np.abs(weight))
        t_within = signed_log_sum(logs_w.ravel(), signs.ravel())

        # tail q > d: sum (q-m) X Y with eps = -1 factorizes into moments
        a0 = self.model_moment(s, 0)
        a1 = self.model_moment(s, 1)
        b0, _, _ = model_moment_series(self.p, s, 0, self.rel_tol, start=self.d + 1)
        b1, _, _ = model_moment_series(self.p, s, 1, self.rel_tol, start=self.d + 1)
        t_beyond = b0 * a1 - b1 * a0  # minus sign of eps = -1 folded in
        t_total = t_within + t_beyond

        if order == 1:
            val = t_total / (a0 * a0)
            return val.to_float() / z
        if order != 2:
            raise DomainError(f"derivative order must be 1 or 2, got {order!r}")
        with np.errstate(divide="ignore"):
            logs_u = logs + np.log(np.abs(weight * (qgrid + mgrid - 1.0)))
        u_within = signed_log_sum(logs_u.ravel(), signs.ravel())
        # beyond tail of (q-m)(q+m-1) = (q^2-q) - (m^2-m): moment products
        b2, _, _ = model_moment_series(self.p, s, 2, self.rel_tol, start=self.d + 1)
        a2 = self.model_moment(s, 2)
        u_beyond = -((b2 - b1) * a0 - b0 * (a2 - a1))
        u_total = u_within + u_beyond
        val = (u_total * a0 - LogReal.from_float(2.0) * a1 * t_total) / (a0 * a0 * a0)
        return val.to_float() / (z * z)


def quotient(model: SurfaceModel, p: int, z: complex,
             engine: CuspComparison | None = None) -> float:
    """B_p(z) / B_p^model(z) in the cusp region (1 + E/D, log-domain exact)."""
    engine = engine or CuspComparison(model, p)
    return engine.quotient(2.0 * math.log(abs(complex(z))))


def quotient_perturbed(model: SurfaceModel, p: int, z: complex,
                       gram: GramData | None = None) -> float:
    """Kernel quotient for a perturbed model, via the Cholesky kernel path.

    Valid in the cusp region, where the perturbed weight still equals the
    model weight pointwise; precision is limited to the ~1e-13 floor of the
    plain log-ratio, which the tau-driven deviations far exceed.
    """
    z = complex(z)
    s = 2.0 * math.log(abs(z))
    if s > -model.S0 + 1e-12:
        raise DomainError(f"quotient needs s <= -S0 = {-model.S0:g}, got {s:g}")
    if gram is None:
        gram = gram_matrix(model, p)
    log_bp = global_kernel(model, p, z, gram).log
    log_model = p * math.log(-s) + model_moment_series(p, s, 0)[0].log
    return math.exp(log_bp - log_model)


def quotient_derivative(model: SurfaceModel, p: int, z: complex, order: int = 1,
                        engine: CuspComparison | None = None,
                        basis: OrthoBasis | None = None) -> complex:
    """d/dz or d^2/dz^2 of the kernel quotient by the coefficient series.

    Symmetric mode uses the diagonal deviation vector; a perturbed model
    must supply its orthonormal basis, whose epsilon matrix feeds the
    explicit triple sum.
    """
    if model.symmetric and basis is None:
        engine = engine or CuspComparison(model, p)
        return engine.series_dz(complex(z), order)
    if basis is None:
        raise DomainError("perturbed quotient derivative needs the orthonormal basis")
    return _series_dz_perturbed(model, p, complex(z), basis, order)


def _series_dz_perturbed(model: SurfaceModel, p: int, z: complex,
                         basis: OrthoBasis, order: int) -> complex:
    """Explicit epsilon-matrix series for the perturbed quotient derivative.

    Sums (q-m) (c_m)^2 c_q c_s eps_{qs} z^{q+m-1} zbar^{s+m} over q, s <= d_p
    and m up to a certified cap; the q > d_p continuation (eps = -delta)
    enters through factorized model moments exactly as in symmetric mode.
    One global max-extraction keeps the float accumulation in range at the
    moderate powers where perturbed mode operates.
    """
    s = 2.0 * math.log(abs(z))
    if s > -model.S0 + 1e-12:
        raise DomainError(f"quotient derivative needs s <= -S0, got {s:g}")
    theta = math.atan2(z.imag, z.real)
    d = basis.dim
    eps = epsilon_matrix(basis)
    qs = np.arange(1, d + 1, dtype=float)
    mcap = model_moment_series(p, s, 2)[1]
    ms = np.arange(1, mcap + 1, dtype=float)
    log_y = log_model_coeff_sq(p, ms) + ms * s

    with np.errstate(divide="ignore"):
        log_e = (np.log(np.abs(eps)) + basis.log_c[:, None] + basis.log_c[None, :]
                 + 0.5 * s * (qs[:, None] + qs[None, :]))
    sign_e = np.sign(eps)
    mu = float(log_e[np.isfinite(log_e)].max()) + float(log_y.max())
    phase = np.exp(1j * theta * (qs[:, None] - qs[None, :]))
    t_acc = 0.0j  # sum (q-m) * terms, phases e^{i(q-sigma)theta}
    u_acc = 0.0j  # sum (q-m)(q+m-1) * terms
    for im, m in enumerate(ms):
        w = qs[:, None] - m
        amp = sign_e * np.exp(log_e + log_y[im] - mu)
        t_acc += complex(np.sum(w * amp * phase))
        u_acc += complex(np.sum(w * (qs[:, None] + m - 1.0) * amp * phase))

    def _scaled(lr: LogReal) -> float:
        return lr.sign * math.exp(lr.log - mu) if lr.sign else 0.0

    a0 = model_moment_series(p, s, 0)[0]
    a1 = model_moment_series(p, s, 1)[0]
    b0 = model_moment_series(p, s, 0, start=d + 1)[0]
    b1 = model_moment_series(p, s, 1, start=d + 1)[0]
    t_acc += _scaled(b0 * a1 - b1 * a0)  # radial q > d tail, phase 0 on the grid

    if order == 1:
        # T = (1/z) e^{mu} t_acc; dF/dz = T / a0^2
        return complex(t_acc) * math.exp(mu - 2.0 * a0.log) / z
    if order != 2:
        raise DomainError(f"derivative order must be 1 or 2, got {order!r}")
    a2 = model_moment_series(p, s, 2)[0]
    b2 = model_moment_series(p, s, 2, start=d + 1)[0]
    u_acc += _scaled(-((b2 - b1) * a0 - b0 * (a2 - a1)))
    # d2F/dz2 = (U a0 - 2 a1 T) / (a0^3 z^2) with U, T in the mu-scaled frame
    num = u_acc - 2.0 * math.exp(a1.log - a0.log) * t_acc
    return complex(num) * math.exp(mu - 2.0 * a0.log) / (z * z)


def fs_pullback(model: SurfaceModel, p: int, s: float,
                engine: CuspComparison | None = None,
                fd_guard: bool = True) -> tuple[float, float]:
    """(metric density, defect) of the normalized Fubini-Study pullback.

    density = (1/2 pi) phi''(s) + (1/(2 pi p)) (log B_p)''(s); the defect
    compares against the disc-model counterpart, which reduces to
    (1/(2 pi p)) |(log quotient)''|.  A 5-point finite difference of
    log B_p guards the analytic second derivative.
    """
    engine = engine or CuspComparison(model, p)
    engine._check_region(s)
    # (log B_p)'' = -p phi'' + (log N)'' with (log N)'' = (log D)'' + (log(1+G))''
    var_d = _model_log_dd(engine, s)
    lqdd = engine.log_quotient_dd(s)
    log_bp_dd = -p * model.potential.d2phi(s) + var_d + lqdd
    density = model.potential.d2phi(s) / (2 * math.pi) + log_bp_dd / (2 * math.pi * p)
    defect = abs(lqdd) / (2 * math.pi * p)
    if fd_guard:
        h = 1e-3
        vals = [_log_n(engine, s + i * h) for i in (-2, -1, 0, 1, 2)]
        fd = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)
        analytic = var_d + lqdd
        if abs(fd - analytic) > 1e-6 * max(1.0, abs(analytic)):
            raise DifferentiationInstabilityError(
                f"series second derivative {analytic:.6e} vs finite difference "
                f"{fd:.6e} at s={s:g}")
    return density, defect


def _log_n(engine: CuspComparison, s: float) -> float:
    g = (engine.deviation_moment(s, 0) / engine.model_moment(s, 0)).to_float()
    return engine.model_moment(s, 0).log + math.log1p(g)


def _model_log_dd(engine: CuspComparison, s: float) -> float:
    """(log D)''(s) as the index variance of the model weights (shifted)."""
    d0 = engine.model_moment(s, 0)
    d1 = engine.model_moment(s, 1)
    mean = (d1 / d0).to_float()
    l0 = max(1, round(mean))
    qs = engine.qs
    # include the certified model continuation beyond d_p
    shifted_within = signed_log_sum(
        engine.log_c2 + qs * s + 2 * np.log(np.abs(qs - l0) + (qs == l0)),
        np.where(qs == l0, 0.0, 1.0))
    b0, _, _ = model_moment_series(engine.p, s, 0, engine.rel_tol, start=engine.d + 1)
    b1, _, _ = model_moment_series(engine.p, s, 1, engine.rel_tol, start=engine.d + 1)
    b2, _, _ = model_moment_series(engine.p, s, 2, engine.rel_tol, start=engine.d + 1)
    shifted_beyond = b2 - LogReal.from_float(2.0 * l0) * b1 + LogReal.from_float(
        float(l0 * l0)) * b0
    second = ((shifted_within + shifted_beyond) / d0).to_float()
    return second - (mean - l0) ** 2


def eta_p(model: SurfaceModel, p: int, z: complex,
          engine: CuspComparison | None = None) -> float:
    """Difference density of the model and surface Fubini-Study pullbacks.

    eta = -(1/2 pi) e^{-s} (log quotient)''(s); real by rotation invariance
    and smooth across the puncture (use eta_zero_limit for z = 0).
    """
    engine = engine or CuspComparison(model, p)
    z = complex(z)
    if z == 0:
        return engine.eta_zero_limit()
    return engine.eta(2.0 * math.log(abs(z)))


def eta_zero_limit(model: SurfaceModel, p: int,
                   engine: CuspComparison | None = None) -> float:
    engine = engine or CuspComparison(model, p)
    return engine.eta_zero_limit()


# ---------------------------------------------------------------------------
# scan driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuotientScan:
    """Grid scan of the quotient and its z-derivatives at one tensor power."""

    p: int
    s_grid: np.ndarray
    quotient_minus_1: np.ndarray
    d1_abs: np.ndarray
    d2_abs: np.ndarray

    @property
    def sup_quotient(self) -> float:
        return float(np.max(np.abs(self.quotient_minus_1)))

    @property
    def sup_d1(self) -> float:
        return float(np.max(self.d1_abs))

    @property
    def sup_d2(self) -> float:
        return float(np.max(self.d2_abs))

    def rows(self):
        for s, q, d1, d2 in zip(self.s_grid, self.quotient_minus_1,
                                self.d1_abs, self.d2_abs):
            yield (self.p, float(s), math.exp(s / 2), float(q), float(d1), float(d2))


def quotient_scan(model: SurfaceModel, p: int, s_min: float, s_max: float,
                  n_points: int = 400, derivatives: bool = True,
                  engine: CuspComparison | None = None) -> QuotientScan:
    """Scan on a geometric grid in |s| from s_min up to s_max (both < 0)."""
    if not s_min < s_max < 0:
        raise DomainError(f"need s_min < s_max < 0, got [{s_min}, {s_max}]")
    engine = engine or CuspComparison(model, p)
    grid = -np.geomspace(-s_min, -s_max, n_points)
    qvals = np.empty(n_points)
    d1 = np.zeros(n_points)
    d2 = np.zeros(n_points)
    for i, s in enumerate(grid):
        qvals[i] = engine.quotient_minus_one(s)
        if derivatives:
            fp, fpp = engine.radial_dF(s)
            d1[i] = abs(fp) * math.exp(-s / 2)
            d2[i] = abs(fpp - fp) * math.exp(-s)
    return QuotientScan(p=p, s_grid=grid, quotient_minus_1=qvals, d1_abs=d1, d2_abs=d2)


def fitted_loglog_slope(ps, values) -> float:
    """Least-squares slope of log(value) against log(p)."""
    x = np.log(np.asarray(ps, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# random sections and their zeros
# ---------------------------------------------------------------------------


@dataclass
class ZeroEnsemble:
    """Zeros of Gaussian random sections at tensor power p.

    Coefficients are standard complex Gaussians in an orthonormal basis,
    drawn from one counter-based seed split per sample (SeedSequence(seed,
    spawn_key=(i,))), so samples are reproducible and order-independent.
    """

    p: int
    k: int
    n_samples: int
    seed: int
    roots: list = field(default_factory=list)         # per-sample complex arrays
    orders_at_punctures: list = field(default_factory=list)  # (ord_0, ord_inf)
    failures: list = field(default_factory=list)
    residual_tol: float = 1e-10


def _gaussian_coeffs(d: int, seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    return (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / math.sqrt(2.0)


def _polish_roots(coeffs_high_first: np.ndarray, roots: np.ndarray,
                  tol: float) -> tuple[np.ndarray, float]:
    """One Newton step plus a scale-aware residual check.

    Residuals are measured on the reversed polynomial at 1/root when
    |root| > 1, which keeps the evaluation backward error comparable to the
    coefficient norm on both sides of the unit circle.
    """
    deriv = np.polyder(coeffs_high_first)
    val = np.polyval(coeffs_high_first, roots)
    der = np.polyval(deriv, roots)
    step = np.where(np.abs(der) > 0, val / der, 0.0)
    polished = roots - step
    scale = np.linalg.norm(coeffs_high_first)
    rev = coeffs_high_first[::-1]
    worst = 0.0
    for rt in polished:
        if abs(rt) <= 1.0:
            resid = abs(np.polyval(coeffs_high_first, rt)) / scale
        else:
            resid = abs(np.polyval(rev, 1.0 / rt)) / scale
        worst = max(worst, float(resid))
    return polished, worst


def sample_sections(model: SurfaceModel, p: int, n_samples: int, seed: int,
                    basis: OrthoBasis | None = None,
                    residual_tol: float = 1e-10) -> ZeroEnsemble:
    """Draw Gaussian sections and compute all their zeros in C^*.

    Symmetric mode needs only the diagonal norms; a perturbed model must
    supply its orthonormal basis.  Failed polishes are excluded and counted.
    """
    d = dimension(model, p)
    if basis is not None:
        transform = basis.scaled * np.exp(basis.log_c)[:, None]
    elif model.symmetric:
        transform = None
        half_norms = 0.5 * log_section_norms(model, p)
    else:
        raise DomainError("perturbed sampling requires the orthonormal basis")

    ens = ZeroEnsemble(p=p, k=model.k, n_samples=n_samples, seed=seed,
                       residual_tol=residual_tol)
    for i in range(n_samples):
        xi = _gaussian_coeffs(d, seed, i)
        if transform is None:
            a = xi * np.exp(-half_norms + half_norms.min())  # harmless common rescale
        else:
            a = transform @ xi
        a = a / np.abs(a).max()
        # monomial coefficients a_1..a_d of sum a_q z^q; factor the forced zero at 0
        nz = np.nonzero(np.abs(a) > 0)[0]
        ord0 = int(nz[0]) + 1
        qmax = int(nz[-1]) + 1
        ord_inf = model.k * p - qmax
        inner = a[nz[0]: nz[-1] + 1]
        coeffs_high = inner[::-1]
        if len(coeffs_high) > 1:
            rts = np.roots(coeffs_high)
            rts = rts[np.abs(rts) > 0]
            rts, worst = _polish_roots(coeffs_high, rts, residual_tol)
        else:
            rts, worst = np.array([], dtype=complex), 0.0
        if worst > residual_tol:
            ens.failures.append(i)
            continue
        ens.roots.append(rts)
        ens.orders_at_punctures.append((ord0, ord_inf))
    if ens.failures and len(ens.failures) == n_samples:
        raise RootPolishError("every sample failed the polish residual gate")
    return ens


def zero_mass_conservation(ens: ZeroEnsemble) -> bool:
    """Every sample satisfies #roots + ord_0 + ord_infinity = k p."""
    total = ens.k * ens.p
    return all(len(r) + o0 + oi == total
               for r, (o0, oi) in zip(ens.roots, ens.orders_at_punctures))


def zero_statistics(ens: ZeroEnsemble, model: SurfaceModel,
                    s_lo: float, s_hi: float) -> tuple[float, float, float]:
    """(empirical, theoretical, mc standard error) for the annulus s in [lo, hi].

    empirical averages #zeros/p per sample; theoretical is the curvature
    mass phi'(s_hi) - phi'(s_lo) of the annulus.
    """
    if not s_lo < s_hi:
        raise DomainError(f"need s_lo < s_hi, got [{s_lo}, {s_hi}]")
    counts = np.array([
        np.count_nonzero((2.0 * np.log(np.abs(r)) >= s_lo)
                         & (2.0 * np.log(np.abs(r)) <= s_hi))
        for r in ens.roots], dtype=float)
    empirical = counts.mean() / ens.p
    theoretical = float(model.potential.dphi(s_hi) - model.potential.dphi(s_lo))
    mc_error = counts.std(ddof=1) / math.sqrt(len(counts)) / ens.p
    return empirical, theoretical, mc_error


def fs_current_pairing(model: SurfaceModel, p: int, phi_dd, s_lo: float,
                       s_hi: float, n_nodes: int = 800) -> float:
    """Pairing of the Fubini-Study current with a radial test function.

    For compactly supported radial Phi the expected zero pairing equals
    int Phi(s) (log N)''(s) ds; integrating by parts twice gives
    int Phi''(s) log N(s) ds, which is what this evaluates (phi_dd is Phi'').
    """
    rule = gauss_rule(64, -1.0, 1.0)
    panels = np.linspace(s_lo, s_hi, max(2, n_nodes // 64) + 1)
    half = 0.5 * np.diff(panels)
    nodes = (panels[:-1, None] + half[:, None] * (rule.nodes[None, :] + 1.0)).ravel()
    weights = (half[:, None] * rule.weights[None, :]).ravel()
    log_norms = log_section_norms(model, p)
    qs = np.arange(1, len(log_norms) + 1, dtype=float)
    logs = qs[None, :] * nodes[:, None] - log_norms[None, :]
    m = logs.max(axis=1)
    log_n = m + np.log(np.exp(logs - m[:, None]).sum(axis=1))
    return float(np.dot(weights, phi_dd(nodes) * log_n))

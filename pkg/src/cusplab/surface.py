"""A concrete two-cusp polarized surface: P^1 minus {0, infinity}.

The line bundle has degree k and a rotation-invariant Hermitian weight
e^{-phi(s)}, s = log|z|^2, with exact Poincare cusps phi = -log(-s) for
s <= -S0 and phi = k s - log(s) for s >= S0, glued by a convex bridge on
[-S0, S0].  The quadratic bridge is C^2 exactly when S0 = 4/k, with
coefficients (a, b, c) = (3/2 - log(4/k), k/2, k^2/32); a quintic bridge
accepts any S0 > 2/k with numerically verified convexity.

The curvature form i R^L = phi''(s) * i dz dzbar / |z|^2 doubles as the
surface metric, so every monomial norm is semi-analytic: the two cusp
contributions are regularized incomplete gamma functions (substitution
u = -2 l log t) and only the finite bridge integral needs quadrature.

An optional angular perturbation phi -> phi + tau * bump(s) * cos(m theta),
supported strictly inside the bridge, breaks circle symmetry; the Gram
matrix then couples monomials whose degree difference is a multiple of m,
with the angular integral evaluated exactly by modified Bessel functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ive

from .errors import (CurvatureError, DegenerateDimensionError, DomainError,
                     MatchingError, QuadratureError)
from .numerics import LogReal, gauss_rule, log_reg_gamma_lower, log_reg_gamma_upper
from .discmodel import log_model_coeff_sq

__all__ = [
    "RadialPotential",
    "Perturbation",
    "SurfaceModel",
    "build_surface",
    "dimension",
    "section_norm",
    "log_section_norms",
    "norm_deviations",
    "GramData",
    "gram_matrix",
    "global_kernel",
    "global_kernel_offdiag",
]

_C2_RESIDUAL_TOL = 1e-10
_VALIDATION_GRID = 10 ** 4


@dataclass(frozen=True)
class RadialPotential:
    """Piecewise radial weight potential phi(s) with exact Poincare cusps."""

    k: int
    S0: float
    bridge: str                       # "quadratic" | "quintic"
    coeffs: tuple                     # (a, b, c) or 6 quintic coefficients

    def _piecewise(self, s, left_f, right_f, mid_f):
        arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(arr)
        left = arr <= -self.S0
        right = arr >= self.S0
        mid = ~(left | right)
        out[left] = left_f(arr[left])
        out[right] = right_f(arr[right])
        out[mid] = mid_f(arr[mid])
        return out if np.ndim(s) else float(out[0])

    def phi(self, s):
        poly = self.coeffs[::-1]
        return self._piecewise(
            s,
            lambda v: -np.log(-v),
            lambda v: self.k * v - np.log(v),
            lambda v: np.polyval(poly, v))

    def dphi(self, s):
        dpoly = np.polyder(np.poly1d(self.coeffs[::-1]))
        return self._piecewise(
            s,
            lambda v: -1.0 / v,
            lambda v: self.k - 1.0 / v,
            lambda v: dpoly(v))

    def d2phi(self, s):
        d2poly = np.polyder(np.poly1d(self.coeffs[::-1]), 2)
        return self._piecewise(
            s,
            lambda v: 1.0 / (v * v),
            lambda v: 1.0 / (v * v),
            lambda v: d2poly(v))

    def matching_residuals(self) -> float:
        """Worst mismatch of value, phi' and phi'' across both gluing points."""
        res = 0.0
        poly = np.poly1d(self.coeffs[::-1])
        d1 = np.polyder(poly)
        d2 = np.polyder(poly, 2)
        for s0 in (-self.S0, self.S0):
            if s0 < 0:
                cusp_vals = (-math.log(-s0), -1.0 / s0, 1.0 / s0 ** 2)
            else:
                cusp_vals = (self.k * s0 - math.log(s0), self.k - 1.0 / s0, 1.0 / s0 ** 2)
            bridge_vals = (float(poly(s0)), float(d1(s0)), float(d2(s0)))
            for c, b in zip(cusp_vals, bridge_vals):
                res = max(res, abs(c - b) / max(1.0, abs(c)))
        return res


def _quadratic_potential(k: int) -> RadialPotential:
    S0 = 4.0 / k
    a = 1.5 - math.log(4.0 / k)
    b = k / 2.0
    c = k * k / 32.0
    return RadialPotential(k=k, S0=S0, bridge="quadratic", coeffs=(a, b, c))


def _quintic_potential(k: int, S0: float) -> RadialPotential:
    """Unique quintic matching value, phi', phi'' of both cusps at +-S0."""
    rows, rhs = [], []
    for s0, vals in ((-S0, (-math.log(S0), 1.0 / S0, 1.0 / S0 ** 2)),
                     (S0, (k * S0 - math.log(S0), k - 1.0 / S0, 1.0 / S0 ** 2))):
        rows.append([s0 ** i for i in range(6)])
        rhs.append(vals[0])
        rows.append([i * s0 ** (i - 1) if i >= 1 else 0.0 for i in range(6)])
        rhs.append(vals[1])
        rows.append([i * (i - 1) * s0 ** (i - 2) if i >= 2 else 0.0 for i in range(6)])
        rhs.append(vals[2])
    coeffs = np.linalg.solve(np.array(rows), np.array(rhs))
    return RadialPotential(k=k, S0=S0, bridge="quintic", coeffs=tuple(coeffs))


@dataclass(frozen=True)
class Perturbation:
    """Angular weight perturbation tau * bump(s) * cos(m theta).

    The C^2 bump 64 t^3 (1-t)^3, t = (s - s_a)/(s_b - s_a), is supported on
    [s_a, s_b], which must sit strictly inside the bridge so both cusps stay
    exactly Poincare.
    """

    tau: float
    support: tuple
    mode: int

    def bump(self, s):
        s = np.asarray(s, dtype=float)
        sa, sb = self.support
        t = (s - sa) / (sb - sa)
        v = 64.0 * t ** 3 * (1.0 - t) ** 3
        out = np.where((t > 0.0) & (t < 1.0), v, 0.0)
        return out if out.ndim else float(out)

    def d2bump(self, s):
        s = np.asarray(s, dtype=float)
        sa, sb = self.support
        w = sb - sa
        t = (s - sa) / w
        v = 64.0 * (6 * t - 36 * t ** 2 + 60 * t ** 3 - 30 * t ** 4) / w ** 2
        out = np.where((t > 0.0) & (t < 1.0), v, 0.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SurfaceModel:
    """Validated two-cusp surface: potential, optional perturbation, quadrature.

    gauge is an additive constant on phi (a constant rescaling of the metric
    h); it rescales all norms by a common factor and leaves the Bergman
    kernel invariant.  It is an in-memory knob and is not serialized.
    """

    potential: RadialPotential
    perturbation: Perturbation | None = None
    bridge_nodes: int = 64
    bridge_panels: int = 12
    angular_nodes: int = 128
    gauge: float = 0.0
    curvature_floor: float = field(default=1.0, compare=False)

    @property
    def k(self) -> int:
        return self.potential.k

    @property
    def S0(self) -> float:
        return self.potential.S0

    @property
    def symmetric(self) -> bool:
        return self.perturbation is None or self.perturbation.tau == 0.0

    def phi(self, s):
        base = self.potential.phi(s)
        return base + self.gauge if self.gauge else base

    def phi_angular(self, s, theta):
        base = self.phi(s)
        if self.symmetric:
            return base
        pert = self.perturbation
        return base + pert.tau * pert.bump(s) * np.cos(pert.mode * np.asarray(theta))

    def with_gauge(self, gauge: float) -> "SurfaceModel":
        return replace(self, gauge=self.gauge + gauge)

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "S0": self.S0,
            "bridge": self.potential.bridge,
            "perturbation": None if self.perturbation is None else {
                "tau": self.perturbation.tau,
                "support": list(self.perturbation.support),
                "mode": self.perturbation.mode,
            },
            "quadrature": {
                "bridge_nodes": self.bridge_nodes,
                "angular_nodes": self.angular_nodes,
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SurfaceModel":
        doc = json.loads(text)
        pert = doc.get("perturbation")
        quad = doc.get("quadrature") or {}
        return build_surface(
            k=doc["k"],
            S0=doc.get("S0"),
            bridge=doc.get("bridge", "quadratic"),
            perturbation=None if pert is None else Perturbation(
                tau=pert["tau"], support=tuple(pert["support"]), mode=pert["mode"]),
            bridge_nodes=quad.get("bridge_nodes", 64),
            angular_nodes=quad.get("angular_nodes", 128),
        )


def build_surface(k: int, S0: float | None = None, bridge: str = "quadratic",
                  perturbation: Perturbation | None = None,
                  bridge_nodes: int = 64, angular_nodes: int = 128) -> SurfaceModel:
    """Construct and validate the surface model.

    Validation enforces the C^2 matching residual (<= 1e-10), positivity of
    phi'' on a 10^4-point grid, and, with a perturbation, a positive lower
    bound for the curvature against the unperturbed metric on an (s, theta)
    grid; the observed bound is recorded as curvature_floor.
    """
    if k < 1 or int(k) != k:
        raise DomainError(f"bundle degree k must be a positive integer, got {k!r}")
    if bridge == "quadratic":
        if S0 is not None and not math.isclose(S0, 4.0 / k, rel_tol=1e-12):
            raise DomainError(
                f"the quadratic bridge is C^2 only at S0 = 4/k = {4.0 / k:g}, got {S0!r}")
        pot = _quadratic_potential(int(k))
    elif bridge == "quintic":
        if S0 is None:
            S0 = 4.0 / k
        if S0 <= 2.0 / k:
            raise DomainError(f"quintic bridge needs S0 > 2/k = {2.0 / k:g}, got {S0!r}")
        pot = _quintic_potential(int(k), float(S0))
    else:
        raise DomainError(f"unknown bridge kind {bridge!r}")

    res = pot.matching_residuals()
    if res > _C2_RESIDUAL_TOL:
        raise MatchingError(f"C^2 matching residual {res:.3e} exceeds {_C2_RESIDUAL_TOL:g}")

    grid = np.linspace(-3 * pot.S0, 3 * pot.S0, _VALIDATION_GRID)
    d2 = pot.d2phi(grid)
    if d2.min() <= 0.0:
        i = int(np.argmin(d2))
        raise CurvatureError(
            f"phi'' = {d2[i]:.3e} <= 0 at s = {grid[i]:.6g}", s=float(grid[i]))

    floor = 1.0
    if perturbation is not None and perturbation.tau != 0.0:
        sa, sb = perturbation.support
        if not (-pot.S0 < sa < sb < pot.S0):
            raise DomainError(
                f"perturbation support [{sa}, {sb}] must lie strictly inside "
                f"the bridge (-{pot.S0:g}, {pot.S0:g})")
        if perturbation.mode < 1 or int(perturbation.mode) != perturbation.mode:
            raise DomainError("angular mode must be a positive integer")
        sgrid = np.linspace(-pot.S0, pot.S0, 2001)
        tgrid = np.linspace(0.0, 2 * math.pi, 181)
        m = perturbation.mode
        radial = (perturbation.d2bump(sgrid)
                  - 0.25 * m * m * perturbation.bump(sgrid)) * perturbation.tau
        density = pot.d2phi(sgrid)[:, None] + radial[:, None] * np.cos(m * tgrid)[None, :]
        ratio = density / pot.d2phi(sgrid)[:, None]
        floor = float(ratio.min())
        if floor <= 0.0:
            i, j = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
            raise CurvatureError(
                f"perturbed curvature ratio {floor:.3e} <= 0 at "
                f"s = {sgrid[i]:.4g}, theta = {tgrid[j]:.4g}",
                s=float(sgrid[i]), theta=float(tgrid[j]))

    return SurfaceModel(potential=pot, perturbation=perturbation,
                        bridge_nodes=bridge_nodes, angular_nodes=angular_nodes,
                        curvature_floor=floor)


def dimension(model: SurfaceModel, p: int) -> int:
    """dim of the admissible section space: k p - 1 monomials z^j, 1 <= j <= kp-1."""
    if p < 2 or int(p) != p:
        raise DomainError(f"tensor power must be an integer >= 2, got {p!r}")
    d = model.k * int(p) - 1
    if d < 1:
        raise DegenerateDimensionError(f"no admissible sections at k={model.k}, p={p}")
    return d


def _bridge_log_integrals(model: SurfaceModel, p: int, js: np.ndarray) -> np.ndarray:
    """log of 2 pi * int_{-S0}^{S0} e^{j s - p phi0(s)} phi0''(s) ds per j.

    Uses the ungauged potential; callers apply any gauge factor once.
    """
    S0 = model.S0
    edges = np.linspace(-S0, S0, model.bridge_panels + 1)
    rule = gauss_rule(model.bridge_nodes, -1.0, 1.0)
    half = 0.5 * np.diff(edges)
    nodes = (edges[:-1, None] + half[:, None] * (rule.nodes[None, :] + 1.0)).ravel()
    weights = (half[:, None] * rule.weights[None, :]).ravel()
    base = -p * model.potential.phi(nodes) + np.log(model.potential.d2phi(nodes))
    expo = js[:, None] * nodes[None, :] + base[None, :]
    m = expo.max(axis=1)
    vals = np.einsum("n,jn->j", weights, np.exp(expo - m[:, None]))
    return math.log(2 * math.pi) + m + np.log(vals)


def log_section_norms(model: SurfaceModel, p: int) -> np.ndarray:
    """log ||z^j||^2 for j = 1..d_p in the symmetric (circle-invariant) model.

    Cusp parts are closed-form incomplete gammas; only the bridge is
    quadratured.  Relative accuracy ~1e-12.
    """
    d = dimension(model, p)
    js = np.arange(1, d + 1, dtype=float)
    S0 = model.S0
    jr = model.k * p - js
    lc = log_model_coeff_sq(p, js)
    lcr = log_model_coeff_sq(p, jr)
    lleft = np.array([log_reg_gamma_upper(p - 1, j * S0).log for j in js]) - lc
    lright = np.array([log_reg_gamma_upper(p - 1, j * S0).log for j in jr]) - lcr
    lbridge = _bridge_log_integrals(model, p, js)
    stacked = np.stack([lleft, lright, lbridge])
    m = stacked.max(axis=0)
    total = m + np.log(np.exp(stacked - m).sum(axis=0))
    return total - p * model.gauge


def section_norm(model: SurfaceModel, p: int, j: int) -> LogReal:
    """||z^j||^2 over the surface, as a LogReal (symmetric mode)."""
    d = dimension(model, p)
    if not 1 <= j <= d:
        raise DomainError(f"section index {j!r} outside 1..{d}")
    return LogReal(1, float(log_section_norms(model, p)[j - 1]))


def norm_deviations(model: SurfaceModel, p: int) -> list[LogReal]:
    """R_j - 1 where R_j = (c_j ||z^j||)^2, assembled cancellation-free.

    R_j - 1 = -P(p-1, j S0) + (c_j/c_{j'})^2 Q(p-1, j' S0) + c_j^2 * bridge_j
    (j' = kp - j), each piece evaluated in the log domain, so the result is
    accurate relative to its own tiny size instead of carrying the ~1e-12
    absolute noise floor of log-norm differences.  This drives the kernel
    quotient and all closeness reports.

    Always refers to the ungauged weight: a constant gauge shift cancels in
    the Bergman kernel, so the quotient machinery built on these deviations
    is gauge invariant by construction.
    """
    d = dimension(model, p)
    js = np.arange(1, d + 1, dtype=float)
    jr = model.k * p - js
    S0 = model.S0
    lc = log_model_coeff_sq(p, js)
    lcr = log_model_coeff_sq(p, jr)
    lbridge = _bridge_log_integrals(model, p, js)
    out = []
    for i, j in enumerate(js):
        m1 = -log_reg_gamma_lower(p - 1, j * S0)
        m2 = LogReal(1, lc[i] - lcr[i] + log_reg_gamma_upper(p - 1, jr[i] * S0).log)
        m3 = LogReal(1, lc[i] + lbridge[i])
        out.append(m1 + m2 + m3)
    return out


@dataclass(frozen=True)
class GramData:
    """Inner products of the monomial sections z^j at tensor power p.

    Symmetric mode stores only log_norms (the Gram matrix is exactly
    diagonal by circle symmetry).  Perturbed mode stores the matrix scaled
    by its diagonal, G_scaled = D^{-1/2} G D^{-1/2} with log_diag = log G_jj,
    plus its Cholesky factor.
    """

    p: int
    mode: str
    log_norms: np.ndarray | None = None
    log_diag: np.ndarray | None = None
    scaled: np.ndarray | None = None
    chol: np.ndarray | None = None

    @property
    def dim(self) -> int:
        arr = self.log_norms if self.log_norms is not None else self.log_diag
        return len(arr)


def _perturbed_gram(model: SurfaceModel, p: int) -> GramData:
    pert = model.perturbation
    d = dimension(model, p)
    m = pert.mode
    x_max = p * abs(pert.tau)  # Bessel argument bound
    # widest harmonic still above double tiny: I_q(x)/I_0(x) ~ (x/2)^q / q!
    q_max = 1
    while q_max < d and (x_max / 2) ** (q_max) / math.factorial(q_max) > 1e-18:
        q_max += 1

    log_norms0 = log_section_norms(model, p)

    sa, sb = pert.support
    rule = gauss_rule(model.bridge_nodes, -1.0, 1.0)
    panels = np.linspace(sa, sb, model.bridge_panels + 1)
    half = 0.5 * np.diff(panels)
    nodes = (panels[:-1, None] + half[:, None] * (rule.nodes[None, :] + 1.0)).ravel()
    weights = (half[:, None] * rule.weights[None, :]).ravel()
    w0 = model.potential.d2phi(nodes)
    barg = p * pert.tau * pert.bump(nodes)
    base = -p * model.phi(nodes) + np.log(w0)

    js = np.arange(1, d + 1, dtype=float)

    def bump_integral(j_plus_k: np.ndarray, bessel_factor) -> np.ndarray:
        """log of 2 pi * int over the bump of e^{(j+k)s/2 - p phi} I-factor phi''."""
        expo = 0.5 * j_plus_k[:, None] * nodes[None, :] + base[None, :]
        mm = expo.max(axis=1)
        vals = np.einsum("n,jn->j", weights,
                         np.exp(expo - mm[:, None]) * bessel_factor[None, :])
        out = np.full(len(j_plus_k), -np.inf)
        pos = vals > 0
        out[pos] = math.log(2 * math.pi) + mm[pos] + np.log(vals[pos])
        return out

    # diagonal: unperturbed norm plus the (I_0 - 1) bump correction
    i0m1 = ive(0, barg) * np.exp(np.abs(barg)) - 1.0
    ldiag_corr = bump_integral(2 * js, i0m1)
    stacked = np.stack([log_norms0, ldiag_corr])
    mm = stacked.max(axis=0)
    log_diag = mm + np.log(np.exp(stacked - mm).sum(axis=0))

    scaled = np.eye(d)
    for q in range(1, q_max + 1):
        diff = q * m
        if diff >= d:
            break
        jlow = js[: d - diff]
        jpk = 2 * jlow + diff
        bess = ive(q, barg) * np.exp(np.abs(barg))
        lvals = bump_integral(jpk, bess)
        sgn = (-1.0) ** q
        for idx in range(d - diff):
            lo, hi = idx, idx + diff
            val = sgn * math.exp(lvals[idx] - 0.5 * (log_diag[lo] + log_diag[hi]))
            scaled[lo, hi] = scaled[hi, lo] = val

    try:
        chol = np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError as exc:
        raise QuadratureError(
            "perturbed Gram matrix is not numerically positive definite; "
            "increase quadrature resolution") from exc
    return GramData(p=p, mode="perturbed", log_norms=log_norms0,
                    log_diag=log_diag, scaled=scaled, chol=chol)


def gram_matrix(model: SurfaceModel, p: int) -> GramData:
    """Gram data of the monomial sections: diagonal norms or the banded matrix."""
    if model.symmetric:
        return GramData(p=p, mode="symmetric", log_norms=log_section_norms(model, p))
    return _perturbed_gram(model, p)


def _kernel_scaled_vector(model: SurfaceModel, gram: GramData, z: complex):
    """Scaled monomial evaluation vector for the perturbed kernel path."""
    d = gram.dim
    s = 2.0 * math.log(abs(z))
    theta = math.atan2(z.imag, z.real)
    js = np.arange(1, d + 1, dtype=float)
    logs = 0.5 * js * s - 0.5 * gram.log_diag
    mu = logs.max()
    vec = np.exp(logs - mu) * np.exp(1j * js * theta)
    return vec, mu, s, theta


def global_kernel(model: SurfaceModel, p: int, z: complex,
                  gram: GramData | None = None) -> LogReal:
    """Bergman kernel function B_p(z) of the surface.

    Symmetric mode: exact log-domain sum e^{-p phi(s)} sum_j e^{j s}/||z^j||^2.
    Perturbed mode: Cholesky solve against the scaled Gram matrix.
    """
    z = complex(z)
    if z == 0:
        raise DomainError("the kernel is evaluated on the punctured surface, z != 0")
    if gram is None:
        gram = gram_matrix(model, p)
    s = 2.0 * math.log(abs(z))
    if gram.mode == "symmetric":
        js = np.arange(1, gram.dim + 1, dtype=float)
        logs = js * s - gram.log_norms
        m = logs.max()
        total = m + math.log(np.exp(logs - m).sum())
        return LogReal(1, total - p * model.phi(s))
    vec, mu, s, theta = _kernel_scaled_vector(model, gram, z)
    u = np.linalg.solve(gram.chol, vec)
    nrm2 = float(np.vdot(u, u).real)
    return LogReal(1, 2 * mu + math.log(nrm2) - p * float(model.phi_angular(s, theta)))


def global_kernel_offdiag(model: SurfaceModel, p: int, x: complex, y: complex,
                          gram: GramData | None = None) -> tuple[LogReal, float]:
    """Two-variable kernel sum_j f_j(x) conj(f_j(y)) over the orthonormal basis,
    reported in the monomial trivialization as (log magnitude, phase)."""
    if gram is None:
        gram = gram_matrix(model, p)
    x, y = complex(x), complex(y)
    if gram.mode == "symmetric":
        js = np.arange(1, gram.dim + 1, dtype=float)
        w = x * y.conjugate()
        logs = js * math.log(abs(w)) - gram.log_norms
        m = logs.max()
        acc = complex(np.sum(np.exp(logs - m) * np.exp(1j * js * math.atan2(w.imag, w.real))))
        mag = abs(acc)
        if mag == 0.0:
            return LogReal.zero(), 0.0
        return LogReal(1, m + math.log(mag)), math.atan2(acc.imag, acc.real)
    vx, mux, _, _ = _kernel_scaled_vector(model, gram, x)
    vy, muy, _, _ = _kernel_scaled_vector(model, gram, y)
    ux = np.linalg.solve(gram.chol, vx)
    uy = np.linalg.solve(gram.chol, vy)
    acc = complex(np.vdot(uy, ux))
    mag = abs(acc)
    if mag == 0.0:
        return LogReal.zero(), 0.0
    return LogReal(1, mux + muy + math.log(mag)), math.atan2(acc.imag, acc.real)

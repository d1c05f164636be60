"""Continuity-method solver for the coupled Hermitian-Einstein system on
the sphere fixture, for rank-1-per-vertex models.

With the diagonal metric ansatz H_i = H_i^0 e^{u_i} on line summands the
vertex equations reduce to a coupled Kazdan-Warner-type system.  The
epsilon-perturbed residual at vertex i is

    R_i(u) = sigma_i (k_i^0 + c_D * Lap u_i)
           + sum_{h(a)=i} e^{u_i - u_{t(a)}} w_a
           - sum_{t(a)=i} e^{u_{h(a)} - u_i} w_a
           - lam (tau_i + gamma sigma_i)
           + eps * u_i

with k_i^0 the constant background curvature of O(m_i), w_a the arrow
section density, lam = 2 pi / V, gamma the exact total slope (injected
from the stability layer, never solved for), and c_D the calibrated
Laplacian constant.  On this fixture the two complex structures coincide,
so the alpha-weights collapse: alpha_i sigma_i + (1 - alpha_i) sigma_i =
sigma_i.

Continuation starts at eps = 1, u = 0, damped-Newton-solves each level,
decreases eps geometrically, and finishes with an exact eps = 0 polish;
outcome is Converged / BlowUp / Stalled.  Every accepted level is checked
against the a-priori envelope sup|u_i| <= m_K / eps.  On blow-up, per-
vertex scale separation yields the destabilizing projector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np

from .errors import (
    CalibrationAmbiguousError,
    FixtureUnsupportedError,
    LinearSolveFailureError,
    LineSearchFailureError,
    NoCollapseDetectedError,
    PreconditionError,
    RankUnsupportedError,
    VerificationFailureError,
)
from .geometry import (
    GridField,
    SphereGrid,
    background_curvature,
    homogeneous_section,
    laplacian_apply,
    quadrature,
    section_density,
)
from .quiver import P1, QBundleModel, validate_model
from .stability import (
    StabilityParams,
    deg_slope,
    max_slope_subobject,
    subobject_from_support,
    support_is_arrow_closed,
    arrow_closure,
)

LAPLACIAN_MAGNITUDE = 0.5


@dataclass
class SolveConfig:
    """Tolerances and schedule for the continuity method."""

    tol: float = 1e-8
    eps_start: float = 1.0
    eps_ratio: float = 0.5
    eps_floor: float = 1e-8
    polish_threshold: float = 1e-4  # start trying the eps = 0 polish here
    max_newton: int = 60
    max_backtracks: int = 40
    cg_tol: float = 1e-10
    cg_maxiter: int = 800
    blowup_threshold: float = 40.0
    envelope_factor: float = 1.05
    envelope_strikes: int = 3
    collapse_threshold: float = 1e-6

    def __post_init__(self):
        if not (0 < self.eps_ratio < 1):
            raise PreconditionError("eps_ratio must lie in (0,1)")
        if self.eps_floor <= 0 or self.eps_floor > self.eps_start:
            raise PreconditionError("eps schedule must decrease to a positive floor")


@dataclass
class ScalarMetricState:
    """Per-vertex scalar fields u_i (H_i = H_i^0 e^{u_i}) plus the active
    continuation parameter."""

    u: dict[str, GridField]
    epsilon: float
    normalization_mean: float = 0.0  # quadrature(sum u_i) / (|Q0| V) last removed


@dataclass(frozen=True)
class TraceEntry:
    epsilon: float
    sup_u: Mapping[str, float]
    residual_sup: float
    residual_l2: float
    newton_iterations: int
    envelope_ok: bool


@dataclass(frozen=True)
class ThetaProjector:
    """Vertex-set projector extracted from a blow-up: identity on the
    support, zero elsewhere (rank-1 scalar model)."""

    support: tuple[str, ...]
    collapsed_raw: tuple[str, ...]
    scale_gaps: Mapping[str, float]  # sup u_i minus the global max
    idempotent_residual: float
    self_adjoint_residual: float
    arrow_closure_residual: float
    slope_sub: Fraction
    slope_total: Fraction
    matches_max_slope_witness: bool


@dataclass
class SolveReport:
    outcome: str  # Converged | BlowUp | Stalled
    residual_sup: dict[str, float]
    residual_l2: dict[str, float]
    trace: list[TraceEntry]
    gamma: float
    c_delta: float
    m_k: float
    verification: Optional[dict] = None
    destabilizer: Optional[ThetaProjector] = None
    message: str = ""


class P1System:
    """Precomputed fields and constants for one model on one grid."""

    def __init__(self, model: QBundleModel, params: StabilityParams, grid: SphereGrid,
                 c_delta: float):
        model = validate_model(model)
        if model.base != P1:
            raise FixtureUnsupportedError(
                f"the PDE solver runs on the P1 fixture only, not {model.base}"
            )
        if not model.is_rank_one():
            raise RankUnsupportedError("the PDE solver needs rank 1 at every vertex")
        params.check_covers(model.quiver.vertices)
        self.model = model
        self.params = params
        self.grid = grid
        self.c_delta = float(c_delta)
        self.vertices = model.quiver.vertices
        self.arrows = model.quiver.arrows
        self.lam = 2.0 * np.pi / grid.total_volume
        self.gamma_exact = deg_slope(model, None, params).slope
        self.gamma = float(self.gamma_exact)
        self.degree = {v: model.vertex_data[v].summands[0].deg_plus for v in self.vertices}
        self.k0 = {v: background_curvature(grid, self.degree[v]) for v in self.vertices}
        self.sigma = {v: float(params.sigma[v]) for v in self.vertices}
        self.w = {}
        for a in self.arrows:
            section = model.arrow_data[a.id].blocks[0][0]
            d = self.degree[a.head] - self.degree[a.tail]
            if section is None or section.is_zero:
                self.w[a.id] = None
            else:
                self.w[a.id] = section_density(grid, section, d)
        # constant sink lam (tau_i + gamma sigma_i), computed exactly then floated
        self.sink = {
            v: float(params.tau[v] + self.gamma_exact * params.sigma[v]) * self.lam
            for v in self.vertices
        }

    def zero_state(self) -> dict[str, GridField]:
        return {v: np.zeros((self.grid.n_theta, self.grid.n_phi)) for v in self.vertices}


def normalize(system: P1System, u: dict[str, GridField]) -> float:
    """Shift all u_i by a common constant so quadrature(sum u_i) = 0;
    returns the removed mean."""
    total = sum(quadrature(system.grid, u[v]) for v in system.vertices)
    mean = total / (len(system.vertices) * system.grid.total_volume)
    for v in system.vertices:
        u[v] = u[v] - mean
    return mean


def assemble_residual(system: P1System, u: Mapping[str, GridField], eps: float,
                      include_eps_term: bool = True) -> dict[str, GridField]:
    """R_i(u) per vertex; with include_eps_term=False this is the eps -> 0
    residual used for the convergence check."""
    out = {}
    couplings = {}
    for a in system.arrows:
        if system.w[a.id] is not None:
            couplings[a.id] = np.exp(u[a.head] - u[a.tail]) * system.w[a.id]
    for v in system.vertices:
        r = system.sigma[v] * (system.k0[v] + system.c_delta * laplacian_apply(system.grid, u[v]))
        for a in system.model.quiver.arrows_into(v):
            if a.id in couplings:
                r = r + couplings[a.id]
        for a in system.model.quiver.arrows_out_of(v):
            if a.id in couplings:
                r = r - couplings[a.id]
        r = r - system.sink[v]
        if include_eps_term and eps != 0.0:
            r = r + eps * u[v]
        out[v] = r
    return out


def residual_norms(system: P1System, res: Mapping[str, GridField]):
    sup = {v: float(np.max(np.abs(res[v]))) for v in system.vertices}
    l2 = {v: math.sqrt(max(quadrature(system.grid, res[v] ** 2), 0.0))
          for v in system.vertices}
    return sup, l2


def _stacked_l2(system, res) -> float:
    return math.sqrt(sum(max(quadrature(system.grid, res[v] ** 2), 0.0)
                         for v in system.vertices))


# -- linearization -------------------------------------------------------------

class _Jacobian:
    """Action of the linearized operator at state u:

        (L du)_i = sigma_i c_D Lap du_i
                 + sum_{h(a)=i} E_a (du_i - du_t)
                 - sum_{t(a)=i} E_a (du_h - du_i)
                 + eps du_i,     E_a = e^{u_h - u_t} w_a >= 0.

    Symmetric positive semidefinite for the quadrature inner product,
    strictly positive definite for eps > 0.
    """

    def __init__(self, system: P1System, u, eps: float):
        self.system = system
        self.eps = eps
        self.E = {}
        for a in system.arrows:
            if system.w[a.id] is not None:
                self.E[a.id] = np.exp(u[a.head] - u[a.tail]) * system.w[a.id]
        self.diag_mean = {}
        for v in system.vertices:
            d = eps
            for a in system.model.quiver.arrows_into(v):
                if a.id in self.E:
                    d += quadrature(system.grid, self.E[a.id]) / system.grid.total_volume
            for a in system.model.quiver.arrows_out_of(v):
                if a.id in self.E:
                    d += quadrature(system.grid, self.E[a.id]) / system.grid.total_volume
            self.diag_mean[v] = d

    def apply(self, du: Mapping[str, GridField]) -> dict[str, GridField]:
        sys_ = self.system
        out = {}
        for v in sys_.vertices:
            r = sys_.sigma[v] * sys_.c_delta * laplacian_apply(sys_.grid, du[v])
            if self.eps != 0.0:
                r = r + self.eps * du[v]
            for a in sys_.model.quiver.arrows_into(v):
                if a.id in self.E:
                    r = r + self.E[a.id] * (du[v] - du[a.tail])
            for a in sys_.model.quiver.arrows_out_of(v):
                if a.id in self.E:
                    r = r - self.E[a.id] * (du[a.head] - du[v])
            out[v] = r
        return out

    def precondition(self, r: Mapping[str, GridField]) -> dict[str, GridField]:
        """Per-vertex spectral inverse of sigma c_D Lap + mean diagonal."""
        sys_ = self.system
        scale = 4.0 * np.pi / sys_.grid.total_volume
        out = {}
        for v in sys_.vertices:
            coef = sys_.sigma[v] * sys_.c_delta * scale
            shift = max(self.diag_mean[v], 1e-30)
            out[v] = sys_.grid.sht.apply_l_multiplier(
                r[v], lambda ell: 1.0 / (coef * ell * (ell + 1.0) + shift)
            )
        return out


def _dot(system, a, b) -> float:
    return sum(quadrature(system.grid, a[v] * b[v]) for v in system.vertices)


def solve_linear(jac: _Jacobian, rhs: Mapping[str, GridField],
                 tol: float, maxiter: int) -> dict[str, GridField]:
    """Preconditioned conjugate gradient in the quadrature inner product."""
    system = jac.system
    x = {v: np.zeros_like(rhs[v]) for v in system.vertices}
    r = {v: rhs[v].copy() for v in system.vertices}
    rhs_norm = math.sqrt(max(_dot(system, rhs, rhs), 0.0))
    if rhs_norm == 0.0:
        return x
    z = jac.precondition(r)
    p = {v: z[v].copy() for v in system.vertices}
    rz = _dot(system, r, z)
    for _ in range(maxiter):
        Ap = jac.apply(p)
        pAp = _dot(system, p, Ap)
        if pAp <= 0:
            raise LinearSolveFailureError(
                f"linearization not positive along search direction (pAp={pAp:.3e})"
            )
        alpha = rz / pAp
        for v in system.vertices:
            x[v] = x[v] + alpha * p[v]
            r[v] = r[v] - alpha * Ap[v]
        if math.sqrt(max(_dot(system, r, r), 0.0)) <= tol * rhs_norm:
            return x
        z = jac.precondition(r)
        rz_new = _dot(system, r, z)
        beta = rz_new / rz
        rz = rz_new
        for v in system.vertices:
            p[v] = z[v] + beta * p[v]
    raise LinearSolveFailureError(f"CG did not reach {tol:.1e} in {maxiter} iterations")


def newton_step(system: P1System, u: dict[str, GridField], eps: float,
                config: SolveConfig):
    """One damped Newton update; returns (new u, step report dict).

    The linear solve uses an inexact-Newton forcing term: loose while the
    residual is large, tightening toward config.cg_tol as it shrinks
    (double precision cannot support much below 1e-10 relative here)."""
    res = assemble_residual(system, u, eps)
    r_l2 = _stacked_l2(system, res)
    jac = _Jacobian(system, u, eps)
    neg = {v: -res[v] for v in system.vertices}
    linear_tol = max(config.cg_tol, min(1e-4, 0.01 * r_l2))
    du = solve_linear(jac, neg, linear_tol, config.cg_maxiter)
    t = 1.0
    for _ in range(config.max_backtracks):
        trial = {v: u[v] + t * du[v] for v in system.vertices}
        normalize(system, trial)
        trial_l2 = _stacked_l2(system, assemble_residual(system, trial, eps))
        if trial_l2 < r_l2 or r_l2 == 0.0:
            step_sup = max(float(np.max(np.abs(t * du[v]))) for v in system.vertices)
            return trial, {"residual_l2": trial_l2, "damping": t, "step_sup": step_sup}
        t *= 0.5
    raise LineSearchFailureError(
        f"backtracking stalled at eps={eps:.3e}, |R|_L2={r_l2:.3e}"
    )


def _solve_at_eps(system, u, eps, config, tol):
    """Newton iteration at fixed eps until the eps-residual sup < tol."""
    for k in range(config.max_newton):
        res = assemble_residual(system, u, eps)
        sup = max(float(np.max(np.abs(res[v]))) for v in system.vertices)
        if sup < tol:
            return u, k
        u, _ = newton_step(system, u, eps, config)
        if max(float(np.max(np.abs(u[v]))) for v in system.vertices) > config.blowup_threshold:
            return u, -(k + 1)  # negative marker: blow-up threshold crossed
    raise LineSearchFailureError(f"Newton did not converge at eps={eps:.3e}")


# -- calibration ----------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    c_delta: float
    positivity_ritz: Mapping[float, float]   # candidate sign -> smallest Ritz value
    identity_residuals: Mapping[float, float]  # candidate sign -> holomorphy residual


def _positivity_probe(grid: SphereGrid, c_delta: float) -> float:
    """Smallest Rayleigh quotient of sigma c_D Lap + eps over low harmonics
    for a single-vertex no-arrow instance (sigma = 1, eps = 1e-3)."""
    eps = 1e-3
    theta = grid.theta[:, None]
    tests = [
        np.cos(theta) * np.ones((1, grid.n_phi)),
        np.sin(theta) * np.cos(grid.phi)[None, :],
        (1.5 * np.cos(theta) ** 2 - 0.5) * np.ones((1, grid.n_phi)),
    ]
    worst = np.inf
    for v in tests:
        av = c_delta * laplacian_apply(grid, v) + eps * v
        num = quadrature(grid, v * av)
        den = quadrature(grid, v * v)
        worst = min(worst, num / den)
    return float(worst)


def _identity_probe(grid: SphereGrid, c_delta: float, seed: int = 2024) -> float:
    """Relative residual of the holomorphic-section pairing identity

        <<phi, [i Lam F_H, phi]>> = ||del_H phi||^2

    for the degree-(0,1) two-vertex model with phi = z at a seeded smooth
    state.  The identity holds for any metric state, so it pins the sign
    of the Laplacian constant without solving anything.
    """
    rng = np.random.default_rng(seed)
    u = {}
    for key in ("t", "h"):
        f = _random_smooth_field(grid, rng, lmax=6, amplitude=0.35)
        u[key] = f
    lhs, rhs = _pairing_identity_sides(
        grid, c_delta, m_tail=0, m_head=1, coeffs=(0.0, 1.0),
        u_tail=u["t"], u_head=u["h"],
    )
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30)


def calibrate(grid: SphereGrid) -> CalibrationResult:
    """Fix the signed Laplacian constant (magnitude 1/2) operationally:
    the correct sign must make the model linearization positive definite
    and satisfy the holomorphic pairing identity; both probes and both
    candidates are recorded.  Ambiguity aborts rather than guessing."""
    ritz = {}
    ident = {}
    passing = []
    for cand in (+LAPLACIAN_MAGNITUDE, -LAPLACIAN_MAGNITUDE):
        ritz[cand] = _positivity_probe(grid, cand)
        ident[cand] = _identity_probe(grid, cand)
        if ritz[cand] > 0 and ident[cand] < 1e-6:
            passing.append(cand)
    if len(passing) != 1:
        raise CalibrationAmbiguousError(
            f"calibration probes passed for {passing or 'neither sign'}: "
            f"ritz={ritz}, identity={ident}"
        )
    return CalibrationResult(c_delta=passing[0], positivity_ritz=ritz,
                             identity_residuals=ident)


def _random_smooth_field(grid: SphereGrid, rng, lmax: int = 8,
                         amplitude: float = 0.5) -> GridField:
    """Band-limited random field with decaying spectrum, zero mean."""
    sht = grid.sht
    raw = sht.forward(rng.standard_normal((grid.n_theta, grid.n_phi)))
    filt = []
    for m, block in enumerate(raw):
        ells = np.arange(m, sht.lmax + 1)
        damp = np.where(ells <= lmax, np.exp(-0.6 * ells), 0.0)
        filt.append(block * damp)
    filt[0][0] = 0.0
    f = sht.inverse(filt)
    peak = float(np.max(np.abs(f)))
    if peak > 0:
        f = f * (amplitude / peak)
    return f


# -- diagnostics -----------------------------------------------------------------

def curvature_imbalance(system: P1System) -> dict[str, GridField]:
    """K^phi at the background metric: sigma_i k_i^0 + sum_in w_a -
    sum_out w_a - lam (tau_i + gamma sigma_i)."""
    out = {}
    for v in system.vertices:
        k = system.sigma[v] * system.k0[v] - system.sink[v]
        for a in system.model.quiver.arrows_into(v):
            if system.w[a.id] is not None:
                k = k + system.w[a.id]
        for a in system.model.quiver.arrows_out_of(v):
            if system.w[a.id] is not None:
                k = k - system.w[a.id]
        out[v] = k
    return out


def m_k_constant(system: P1System) -> float:
    """|Q0| * sum_i sup |K^phi(H_i^0)|: the a-priori envelope constant."""
    K = curvature_imbalance(system)
    return len(system.vertices) * sum(float(np.max(np.abs(K[v]))) for v in system.vertices)


def diagnostics(system: P1System, u: Mapping[str, GridField], eps: float,
                config: SolveConfig) -> dict:
    """Per-vertex sup|u_i| against the envelope m_K / eps."""
    if eps <= 0:
        raise PreconditionError("diagnostics need eps > 0")
    mk = m_k_constant(system)
    sup_u = {v: float(np.max(np.abs(u[v]))) for v in system.vertices}
    margin = {v: mk / eps - sup_u[v] for v in system.vertices}
    ok = all(sup_u[v] <= config.envelope_factor * mk / eps for v in system.vertices)
    return {"eps": eps, "m_k": mk, "sup_u": sup_u, "margin": margin, "envelope_ok": ok}


# -- continuation ------------------------------------------------------------------

def continuity_solve(model: QBundleModel, params: StabilityParams,
                     config: SolveConfig, grid: SphereGrid,
                     c_delta: Optional[float] = None):
    """Run the perturbed continuation from eps = 1 toward eps = 0.

    Returns (ScalarMetricState, SolveReport).  Outcome Converged means the
    eps = 0 residual (no eps*u term) fell below config.tol in sup norm;
    BlowUp means a vertex scale crossed the threshold or the envelope was
    violated persistently; Stalled covers everything else.
    """
    if c_delta is None:
        c_delta = calibrate(grid).c_delta
    system = P1System(model, params, grid, c_delta)
    mk = m_k_constant(system)
    u = system.zero_state()
    trace: list[TraceEntry] = []
    eps = config.eps_start
    outcome = None
    message = ""
    strikes = 0

    def record(eps_level, iters):
        res0 = assemble_residual(system, u, 0.0, include_eps_term=False)
        sup, l2 = residual_norms(system, res0)
        sup_u = {v: float(np.max(np.abs(u[v]))) for v in system.vertices}
        env_ok = all(
            s <= config.envelope_factor * mk / eps_level for s in sup_u.values()
        ) if eps_level > 0 else True
        trace.append(TraceEntry(
            epsilon=eps_level, sup_u=sup_u,
            residual_sup=max(sup.values()), residual_l2=_stacked_l2(system, res0),
            newton_iterations=iters, envelope_ok=env_ok,
        ))
        return max(sup.values()), env_ok

    while True:
        level_tol = max(0.5 * config.tol, min(1e-6, 1e-3 * eps))
        try:
            u, iters = _solve_at_eps(system, u, eps, config, level_tol)
        except (LineSearchFailureError, LinearSolveFailureError) as exc:
            sup_now = max(float(np.max(np.abs(u[v]))) for v in system.vertices)
            if sup_now > 0.5 * config.blowup_threshold:
                outcome, message = "BlowUp", f"solver lost control at eps={eps:.3e}: {exc}"
            else:
                outcome, message = "Stalled", f"eps={eps:.3e}: {exc}"
            record(eps, 0)
            break
        if iters < 0:
            record(eps, -iters)
            outcome = "BlowUp"
            message = f"max |u| crossed {config.blowup_threshold} at eps={eps:.3e}"
            break
        res0_sup, env_ok = record(eps, iters)
        if not env_ok:
            strikes += 1
            if strikes >= config.envelope_strikes:
                outcome = "BlowUp"
                message = (f"envelope sup|u| <= {config.envelope_factor} m_K/eps "
                           f"violated {strikes} consecutive levels")
                break
        else:
            strikes = 0
        if res0_sup < config.tol:
            outcome = "Converged"
            break
        if eps <= config.polish_threshold:
            polished = _try_polish(system, u, config)
            if polished is not None:
                u = polished
                res0_sup, _ = record(0.0, 0)
                outcome = "Converged" if res0_sup < config.tol else "Stalled"
                if outcome == "Stalled":
                    message = f"eps=0 polish left residual {res0_sup:.3e}"
                break
        if eps <= config.eps_floor:
            outcome = "Stalled"
            message = f"reached eps floor {config.eps_floor:.1e} without converging"
            break
        eps *= config.eps_ratio

    res0 = assemble_residual(system, u, 0.0, include_eps_term=False)
    sup, l2 = residual_norms(system, res0)
    state = ScalarMetricState(u=u, epsilon=eps)
    report = SolveReport(
        outcome=outcome, residual_sup=sup, residual_l2=l2, trace=trace,
        gamma=system.gamma, c_delta=c_delta, m_k=mk, message=message,
    )
    if outcome == "Converged":
        report.verification = verify_he(system, state, config)
    elif outcome == "BlowUp":
        try:
            report.destabilizer = extract_destabilizer(system, state, config)
        except NoCollapseDetectedError as exc:
            report.message = (report.message + f"; {exc}").strip("; ")
    return state, report


def _try_polish(system, u, config):
    """Attempt Newton at exactly eps = 0 (valid on the normalized slice:
    the residual is gauge-invariant and integrates to zero there)."""
    trial = {v: u[v].copy() for v in system.vertices}
    try:
        for _ in range(config.max_newton):
            res = assemble_residual(system, trial, 0.0)
            if max(float(np.max(np.abs(res[v]))) for v in system.vertices) < 0.5 * config.tol:
                return trial
            trial, _ = newton_step(system, trial, 0.0, config)
            if max(float(np.max(np.abs(trial[v]))) for v in system.vertices) \
                    > config.blowup_threshold:
                return None
    except (LineSearchFailureError, LinearSolveFailureError):
        return None
    return None


# -- destabilizer extraction ---------------------------------------------------------

def extract_destabilizer(system: P1System, state: ScalarMetricState,
                         config: SolveConfig) -> ThetaProjector:
    """Identify the collapsing vertex set of a blown-up path.

    Normalization per vertex: rho_i = exp(-sup u_i), F_i = rho_i e^{u_i}
    (so sup F_i = 1 per vertex); collapse is decided relative to the
    global maximum scale: vertex i collapses when
    e^{sup u_i - max_j sup u_j} < collapse_threshold.  The reported
    support is the arrow-closure of the collapsing set (the limiting
    projector intertwines nonzero arrows).  Verifies properness,
    nonemptiness, arrow-closure, and slope >= total slope; cross-checks
    against the brute-force maximal destabilizer.
    """
    tops = {v: float(np.max(state.u[v])) for v in system.vertices}
    global_top = max(tops.values())
    gaps = {v: tops[v] - global_top for v in system.vertices}
    threshold = math.log(config.collapse_threshold)
    raw = tuple(v for v in system.vertices if gaps[v] < threshold)
    if not raw:
        raise NoCollapseDetectedError(
            f"no vertex scale separated below {config.collapse_threshold:.1e} "
            f"of the maximum (gaps: { {v: round(g, 3) for v, g in gaps.items()} })"
        )
    support = arrow_closure(system.model, raw)
    if len(support) >= len(system.vertices):
        raise NoCollapseDetectedError(
            "arrow-closure of the collapsing set is the whole quiver"
        )
    closure_residual = 0.0 if support_is_arrow_closed(system.model, support) else 1.0
    sub = subobject_from_support(system.model, support)
    slope_sub = deg_slope(system.model, sub, system.params).slope
    slope_total = system.gamma_exact
    witness, _ = max_slope_subobject(system.model, system.params)
    return ThetaProjector(
        support=support,
        collapsed_raw=raw,
        scale_gaps=gaps,
        idempotent_residual=0.0,      # 0/1 vertex projector is exactly idempotent
        self_adjoint_residual=0.0,    # and exactly H-self-adjoint
        arrow_closure_residual=closure_residual,
        slope_sub=slope_sub,
        slope_total=slope_total,
        matches_max_slope_witness=(set(witness.support) == set(support)),
    )


# -- verification -----------------------------------------------------------------

def pairing_identity(system: P1System, u: Mapping[str, GridField]):
    """Both sides of the holomorphic pairing identity for every nonzero
    arrow: <<phi_a, [i Lam F_H, phi]_a>> vs ||del_H phi_a||^2."""
    out = {}
    for a in system.arrows:
        if system.w[a.id] is None:
            continue
        section = system.model.arrow_data[a.id].blocks[0][0]
        lhs, rhs = _pairing_identity_sides(
            system.grid, system.c_delta,
            m_tail=system.degree[a.tail], m_head=system.degree[a.head],
            coeffs=section.coeffs, u_tail=u[a.tail], u_head=u[a.head],
        )
        out[a.id] = (lhs, rhs)
    return out


def _pairing_identity_sides(grid: SphereGrid, c_delta: float, m_tail: int,
                            m_head: int, coeffs, u_tail, u_head):
    """Quadrature evaluation of the two sides for one arrow.

    Left: integral (i Lam F_head - i Lam F_tail) |phi|^2_Hom dVol with
    i Lam F_i = k_i^0 + c_D Lap u_i.

    Right: ||del phi + del log(h_Hom) phi||^2 in the Hom metric.  Writing
    v = u_head - u_tail and d = m_head - m_tail, the chart derivative
    normalized by (1+|z|^2)^{1 - d/2} is bounded on the whole sphere:

        A = sum_k c_k (k s^{k-1} - d s^{k+1}) c^{d-k-1} e^{i(k-1)phi}
          + e^{-i phi} (dv/dtheta - i dv/dphi / sin theta) * phat,

    with s = sin(theta/2), c = cos(theta/2) and phat the homogeneous form
    of phi; then ||del_H phi||^2 = (2 pi / V) integral |A|^2 e^v dVol.
    """
    d = m_head - m_tail
    v = np.asarray(u_head) - np.asarray(u_tail)
    ev = np.exp(v)
    k_head = 2.0 * np.pi * m_head / grid.total_volume
    k_tail = 2.0 * np.pi * m_tail / grid.total_volume
    curv = (k_head - k_tail) + c_delta * (
        laplacian_apply(grid, u_head) - laplacian_apply(grid, u_tail)
    )
    density = np.abs(homogeneous_section(grid, coeffs, d)) ** 2
    lhs = quadrature(grid, curv * density * ev)

    s, c = grid.sin_half, grid.cos_half
    phase = grid.phase
    phat = homogeneous_section(grid, coeffs, d)
    A = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
    for k, ck in enumerate(coeffs):
        ck = complex(ck)
        if ck == 0:
            continue
        poly = -d * s ** (k + 1)
        if k > 0:
            poly = poly + k * s ** (k - 1)
        A += ck * poly * c ** (d - k - 1) * phase ** (k - 1)
    sht = grid.sht
    dv_dtheta = sht.dtheta(v)
    dv_dphi = sht.dphi(v)
    sin_theta = np.sin(grid.theta)[:, None]
    A += np.conj(phase) * (dv_dtheta - 1j * dv_dphi / sin_theta) * phat
    rhs = (2.0 * np.pi / grid.total_volume) * quadrature(grid, np.abs(A) ** 2 * ev)
    return lhs, rhs


def verify_he(system: P1System, state: ScalarMetricState, config: SolveConfig,
              rel_tol: float = 1e-4, abs_tol: float = 1e-8,
              gamma_tol: float = 1e-8) -> dict:
    """Verification block for a converged state: residual norms at eps=0,
    the integrated gamma-identity, and the per-arrow pairing identity.
    The identity check is relative, with an absolute floor for arrows
    where both sides vanish (parallel sections between equal curvatures)."""
    res0 = assemble_residual(system, state.u, 0.0, include_eps_term=False)
    sup, l2 = residual_norms(system, res0)
    gamma_resid = abs(sum(quadrature(system.grid, res0[v]) for v in system.vertices))
    identities = pairing_identity(system, state.u)
    id_report = {}
    failures = []
    for a_id, (lhs, rhs) in identities.items():
        diff = abs(lhs - rhs)
        rel = diff / max(abs(lhs), abs(rhs), 1e-30)
        id_report[a_id] = {"lhs": lhs, "rhs": rhs, "abs_residual": diff,
                           "relative_residual": rel}
        if diff > max(rel_tol * max(abs(lhs), abs(rhs)), abs_tol):
            failures.append((a_id, diff, rel))
    block = {
        "residual_sup": sup,
        "residual_l2": l2,
        "gamma_identity_residual": gamma_resid,
        "pairing_identity": id_report,
    }
    if gamma_resid > gamma_tol:
        raise VerificationFailureError(
            f"gamma identity residual {gamma_resid:.3e} > {gamma_tol:.1e}"
        )
    if failures:
        raise VerificationFailureError(
            f"pairing identity failed on arrows {failures}"
        )
    return block

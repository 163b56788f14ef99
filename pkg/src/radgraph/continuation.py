"""Two-stage continuity method anchored at a strict subsolution.

Stage 1 deforms the subsolution's own equation into the model equation
H = eps e^{2v}; stage 2 deforms the model equation into H = psi(X). Both
stages keep the subsolution's boundary values.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chart import covariant_gradient
from .curvature import probe_structure_conditions
from .errors import (
    ContinuationStalled,
    DomainError,
    NewtonFailure,
    NoSubsolution,
    OrderingViolated,
    PreconditionViolation,
    StructureCheckFailed,
    SubsolutionNotStrict,
)
from .geometry import snapshot
from .solver import DirichletProblem, LinearWorkspace, NewtonSettings, _evaluate, newton_solve

log = logging.getLogger(__name__)

ORDERING_TOL = 1e-10


@dataclass
class SubsolutionData:
    v: np.ndarray
    snapshot: object
    psi_bar: np.ndarray
    cap_curvature: float | None = None

    @property
    def K(self):
        """max(sup e^v, sup e^-v, 1), the discrete stand-in for the C^0 bound."""
        return float(max(np.max(np.exp(self.v)), np.max(np.exp(-self.v)), 1.0))


def cap_radial_function(x, center, rho_b, theta0, curvature):
    """Radial function of the round sphere of the given curvature through the
    circle {rho_b y : angle(y, center) = theta0}, on the side away from the origin.

    Returns None if no such sphere gives a radial graph over the directions ``x``.
    """
    R = 1.0 / curvature
    a = rho_b * np.sin(theta0)
    if R < a:
        return None
    z = rho_b * np.cos(theta0) - np.sqrt(R * R - a * a)
    cosr = np.clip(x @ center, -1.0, 1.0)
    disc = R * R - z * z * (1.0 - cosr ** 2)
    if np.any(disc <= 0):
        return None
    rho = z * cosr + np.sqrt(disc)
    if np.any(rho <= 0):
        return None
    return rho


def subsolution_from_field(grid, v_bar, psi, f, convexity_floor=1e-8, cap_curvature=None):
    """Wrap a strictly locally convex field as a strict subsolution, or raise."""
    v_bar = grid.check(v_bar, "subsolution")
    snap = snapshot(grid, v_bar)
    inner = grid.interior
    if np.min(snap.convexity_v[inner]) < convexity_floor:
        raise NoSubsolution("subsolution is not strictly locally convex on the grid")
    psi_bar = np.full(grid.size, np.nan)
    ok = np.all(snap.kappa > 0, axis=-1)
    psi_bar[ok] = f.value(snap.kappa[ok])
    if not ok[inner].all():
        raise NoSubsolution("subsolution curvatures leave the positive cone")
    gap = psi_bar[inner] - psi(snap.X[inner])
    if not np.all(gap > 0):
        node = int(np.flatnonzero(inner)[np.argmin(gap)])
        raise NoSubsolution(f"subsolution is not strict at node {node} (gap {np.min(gap):.3e})")
    return SubsolutionData(v_bar, snap, psi_bar, cap_curvature)


def make_cap_subsolution(grid, rho_b, multiplier, psi, f, convexity_floor=1e-8, max_rounds=100):
    """Round-sphere cap through the boundary circle with f(k, ..., k) >= multiplier * sup psi.

    For a ball the cap curvature k is the smallest one meeting the bound, with
    sup psi taken over the shell 1/K <= |X| <= K, K from the cap itself. For an
    annulus only the concentric sphere rho = rho_b is available.
    """
    if not multiplier > 1:
        raise ValueError("curvature multiplier must exceed 1")
    if not rho_b > 0:
        raise ValueError("boundary radius must be positive")
    x = grid.points
    f_unit = float(f.value(np.ones(grid.n)))
    domain = grid.domain

    def shell_K(rho):
        return float(max(np.max(rho), np.max(1.0 / rho), 1.0))

    if domain.kind == "annulus":
        kappa = 1.0 / rho_b
        rho = np.full(grid.size, rho_b)
        need = multiplier * psi.sup_on_shell(x, shell_K(rho)) / f_unit
        if need > kappa:
            raise NoSubsolution(
                f"concentric sphere curvature {kappa:.4g} below required {need:.4g} on the annulus"
            )
    else:
        theta0 = domain.radius
        kappa = multiplier * psi.sup_on_shell(x, shell_K(np.full(1, rho_b))) / f_unit
        for _ in range(max_rounds):
            rho = cap_radial_function(x, grid.chart.center, rho_b, theta0, kappa)
            if rho is None:
                raise NoSubsolution(
                    f"no round cap of curvature {kappa:.4g} spans the boundary circle "
                    f"(largest admissible {1.0 / (rho_b * np.sin(theta0)):.4g})"
                )
            need = multiplier * psi.sup_on_shell(x, shell_K(rho)) / f_unit
            if need <= kappa * (1 + 1e-12):
                break
            kappa = need
        else:
            raise NoSubsolution("cap curvature iteration did not settle")
    v_bar = -np.log(rho)
    # boundary values are exactly log(1/rho_b)
    v_bar[grid.boundary] = -np.log(rho_b)
    return subsolution_from_field(grid, v_bar, psi, f, convexity_floor, cap_curvature=kappa)


def choose_epsilon(sub, psi, K=None, safety=0.5, grid=None):
    """eps = safety * min over interior nodes of (psi_bar - psi(X_bar)) / K^2."""
    K_min = sub.K
    if K is None:
        K = K_min
    if K < K_min * (1 - 1e-14):
        raise ValueError(f"K = {K} is below max(sup e^v, sup e^-v, 1) = {K_min}")
    inner = np.isfinite(sub.psi_bar) if grid is None else grid.interior
    gap = sub.psi_bar[inner] - psi(sub.snapshot.X[inner])
    m = float(np.min(gap))
    if not m > 0:
        raise SubsolutionNotStrict(f"subsolution gap min {m:.3e} is not positive")
    return safety * m / K ** 2


@dataclass
class HomotopyProblem:
    grid: object
    f: object
    psi: object
    sub: SubsolutionData
    epsilon: float
    stage: int
    t: float = 0.0

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ValueError("stage must be 1 or 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def boundary_values(self):
        return self.sub.v

    def rhs(self, v):
        t, eps = self.t, self.epsilon
        if self.stage == 1:
            base = t * eps + (1.0 - t) * self.sub.psi_bar * np.exp(-2.0 * self.sub.v)
            val = base * np.exp(2.0 * v)
            return val, 2.0 * val
        X = np.exp(-v)[:, None] * self.grid.points
        model = (1.0 - t) * eps * np.exp(2.0 * v)
        val = t * self.psi(X) + model
        dval = -t * np.sum(self.psi.gradient(X) * X, axis=-1) + 2.0 * model
        return val, dval

    def at(self, t):
        return HomotopyProblem(self.grid, self.f, self.psi, self.sub, self.epsilon, self.stage, t)

    def dirichlet(self):
        rhs = self.rhs
        return DirichletProblem(self.grid, self.boundary_values, rhs, self.f)


@dataclass
class StepRecord:
    t: float
    iterations: int
    residual: float
    ordering_margin: float
    interior_margin: float
    boundary_normal_margin: float
    hv_check: float
    min_convexity: float


@dataclass
class ContinuationReport:
    stage: int
    epsilon: float
    K: float
    steps: list = field(default_factory=list)
    rejected: list = field(default_factory=list)  # (t, reason)

    def as_dict(self):
        return {
            "stage": self.stage,
            "epsilon": self.epsilon,
            "K": self.K,
            "steps": [s.__dict__ for s in self.steps],
            "rejected": [{"t": t, "reason": r} for t, r in self.rejected],
        }


def ordering_margins(grid, v, v_bar):
    """(min(v - v_bar), interior min over nodes >= 2 layers from the boundary,
    min over boundary nodes of the inward normal derivative of v - v_bar)."""
    diff = v - v_bar
    deep = grid.depth >= 2
    grad = covariant_gradient(grid, diff)
    bd = grid.boundary
    normal = np.sum(grad[bd] * grid.inward_normal[bd], axis=-1)
    return float(np.min(diff)), float(np.min(diff[deep])), float(np.min(normal))


def hv_check(problem, v):
    """max over equation nodes of F^{ij} a_ij - rhs (the H_v bound slack)."""
    st = _evaluate(problem.dirichlet(), v)
    hv = np.einsum("nij,nij->n", st.dF, st.a)
    return float(np.max(hv - st.rhs[problem.grid.interior]))


def _record(problem, v, newton):
    grid = problem.grid
    order, inner, normal = ordering_margins(grid, v, problem.sub.v)
    return StepRecord(
        t=problem.t,
        iterations=newton.iterations,
        residual=newton.residual,
        ordering_margin=order,
        interior_margin=inner,
        boundary_normal_margin=normal,
        hv_check=hv_check(problem, v),
        min_convexity=newton.history[-1][2],
    )


def run_stage(problem, start, settings=None, dt0=0.1, dt_max=0.25, dt_min=1e-6, workspace=None):
    """Follow the stage's family from t = 0 to t = 1 with adaptive steps."""
    settings = settings or NewtonSettings()
    ws = workspace if workspace is not None else LinearWorkspace()
    report = ContinuationReport(problem.stage, problem.epsilon, problem.sub.K)
    p0 = problem.at(0.0)
    try:
        first = newton_solve(p0.dirichlet(), start, settings, ws)
    except NewtonFailure as exc:
        raise PreconditionViolation(f"start field does not solve the t = 0 equation: {exc}") from exc
    v = first.v
    report.steps.append(_record(p0, v, first))
    t, dt, streak = 0.0, dt0, 0
    while t < 1.0:
        t_try = min(1.0, t + dt)
        p = problem.at(t_try)
        try:
            res = newton_solve(p.dirichlet(), v, settings, ws)
        except NewtonFailure as exc:
            report.rejected.append((t_try, str(exc)))
            dt *= 0.5
            streak = 0
            log.info("stage %d: rejected t=%.6g (%s), dt -> %.3g", problem.stage, t_try, exc, dt)
            if dt < dt_min:
                raise ContinuationStalled(
                    f"stage {problem.stage} stalled after t = {t:.6g}", last_t=t, report=report
                ) from exc
            continue
        rec = _record(p, res.v, res)
        if rec.ordering_margin < -ORDERING_TOL:
            raise OrderingViolated(
                f"stage {problem.stage}, t = {t_try:.6g}: min(v - v_bar) = {rec.ordering_margin:.3e}",
                t=t_try, margin=rec.ordering_margin,
            )
        if problem.stage == 2 and not (rec.interior_margin > 0 and rec.boundary_normal_margin > 0):
            raise OrderingViolated(
                f"stage 2, t = {t_try:.6g}: strict comparison fails "
                f"(interior {rec.interior_margin:.3e}, normal {rec.boundary_normal_margin:.3e})",
                t=t_try, margin=min(rec.interior_margin, rec.boundary_normal_margin),
            )
        report.steps.append(rec)
        v, t = res.v, t_try
        streak += 1
        if streak >= 2:
            dt, streak = min(2.0 * dt, dt_max), 0
        log.info("stage %d: accepted t=%.6g in %d iterations", problem.stage, t, res.iterations)
    return v, report


@dataclass
class SolveOutcome:
    v: np.ndarray
    sub: SubsolutionData
    epsilon: float
    K: float
    stage1: ContinuationReport
    stage2: ContinuationReport
    target: HomotopyProblem
    probe: object

    def target_problem(self):
        return self.target.dirichlet()


def check_structure(f, override=False):
    probe = probe_structure_conditions(f)
    if not probe.existence_pass:
        failed = [k for k in ("monotone", "concave", "growth_0_8") if not getattr(probe, k)]
        msg = f"{f.name} fails structure probe: {', '.join(failed) or 'euler'}"
        if not override:
            raise StructureCheckFailed(msg)
        warnings.warn(msg + " (overridden)", stacklevel=2)
    elif not probe.zero_boundary:
        warnings.warn(f"{f.name} does not vanish on the boundary of the cone", stacklevel=2)
    return probe


def solve(grid, f, psi, sub, settings=None, override_structure_check=False, safety=0.5, probe=None):
    """Stage 1 then stage 2 from the subsolution ``sub``.

    ``probe`` is a precomputed structure report for ``f``; by default the
    probe runs here and a failing function is refused unless overridden.
    """
    if f.n != grid.n:
        raise DomainError("curvature function dimension differs from the domain dimension")
    if probe is None:
        probe = check_structure(f, override_structure_check)
    K = sub.K
    eps = choose_epsilon(sub, psi, K, safety=safety, grid=grid)
    ws = LinearWorkspace()
    p1 = HomotopyProblem(grid, f, psi, sub, eps, stage=1)
    v1, rep1 = run_stage(p1, sub.v, settings, workspace=ws)
    p2 = HomotopyProblem(grid, f, psi, sub, eps, stage=2)
    v2, rep2 = run_stage(p2, v1, settings, workspace=ws)
    return SolveOutcome(v2, sub, eps, K, rep1, rep2, p2.at(1.0), probe)

"""Discrete Dirichlet problem H(hess v, grad v, v) = rhs(x, v) and a
convexity-safeguarded damped Newton method for it.

H(v) = F(a[v]) with a the curvature matrix in the v-parametrization. Interior
rows (including the pole) carry the equation; boundary rows carry
v - boundary value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chart import covariant_gradient, covariant_hessian
from .curvature import CurvatureFunction
from .errors import LinearizationRejected, NewtonStall, NoConvergence, PreconditionViolation
from .geometry import PointStateV, convexity_margin_v, curvature_matrix_v, gamma_matrices, principal_curvatures

log = logging.getLogger(__name__)


@dataclass
class DirichletProblem:
    """``rhs(v)`` returns (rhs, d rhs / dv) at every node for the nodal values ``v``."""

    grid: object
    boundary_values: np.ndarray
    rhs: Callable[[np.ndarray], tuple]
    f: CurvatureFunction


@dataclass
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 50
    convexity_floor: float = 1e-8
    armijo: float = 1e-4
    max_halvings: int = 30
    krylov_rtol: float = 1e-12  # floor of the inexact-Newton forcing term min(1e-2, |R|)
    krylov_iter: int = 25  # 0 disables the reused-preconditioner GMRES path

    def __post_init__(self):
        for name in ("tol", "max_iter", "convexity_floor", "armijo", "max_halvings", "krylov_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"NewtonSettings.{name} must be positive")


@dataclass
class NewtonResult:
    v: np.ndarray
    history: list = field(default_factory=list)  # (residual, step, min convexity)
    converged: bool = False

    @property
    def iterations(self):
        return max(len(self.history) - 1, 0)

    @property
    def residual(self):
        return self.history[-1][0] if self.history else np.inf


class Residual(NamedTuple):
    values: np.ndarray
    elliptic: bool
    margin: float


@dataclass
class _State:
    v: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray
    margin: np.ndarray  # per-node convexity margin (v-form)
    elliptic: bool
    R: np.ndarray
    a: np.ndarray = None
    F: np.ndarray = None
    dF: np.ndarray = None
    rhs: np.ndarray = None
    drhs: np.ndarray = None


def _evaluate(problem, v, floor=0.0):
    grid = problem.grid
    mask = grid.interior
    dv = covariant_gradient(grid, v)
    d2v = covariant_hessian(grid, v)
    margin = convexity_margin_v(dv, d2v)
    elliptic = bool(np.all(margin[mask] > floor))
    R = np.empty(grid.size)
    bd = ~mask
    R[bd] = v[bd] - problem.boundary_values[bd]
    st = _State(v, dv, d2v, margin, elliptic, R)
    rhs, drhs = problem.rhs(v)
    st.rhs, st.drhs = rhs, drhs
    a = curvature_matrix_v(PointStateV(v[mask], dv[mask], d2v[mask]))
    kappa = principal_curvatures(a)
    ok = np.all(kappa > 0, axis=-1)
    F = np.full(a.shape[0], np.nan)
    dF = np.full(a.shape, np.nan)
    if ok.any():
        F[ok], dF[ok] = problem.f.matrix_value_and_derivative(a[ok], kappa[ok])
    R[mask] = F - rhs[mask]
    st.a, st.F, st.dF = a, F, dF
    return st


def residual(problem, v):
    """Nodewise residual; ``elliptic`` is False if some interior node is not
    strictly locally convex (its residual entry is then NaN)."""
    v = problem.grid.check(v, "v")
    st = _evaluate(problem, v)
    return Residual(st.R, st.elliptic, float(np.min(st.margin[problem.grid.interior])))


def _jacobian(problem, st):
    grid = problem.grid
    mask = grid.interior
    n = grid.n
    v, p, V = st.v[mask], st.dv[mask], st.d2v[mask]
    Fm = st.dF
    ev = np.exp(v)
    w = np.sqrt(1.0 + np.sum(p * p, axis=-1))
    g, _ = gamma_matrices(PointStateV(v, p, V))
    eye = np.eye(n)

    # d/d(hess v)_kl
    P = (ev / w)[:, None, None] * (g @ Fm @ g)
    # d/d(grad v)_m
    c = 1.0 / (w * (1.0 + w))
    dc = -(1.0 + 2.0 * w) / (w ** 2 * (1.0 + w) ** 2) / w  # (dc/dw) / w
    gVg = g @ V @ g
    tr_base = np.einsum("nij,nji->n", Fm, eye + gVg)
    Q = np.empty((v.size, n))
    for m in range(n):
        em = np.zeros(n)
        em[m] = 1.0
        dg = -(em[None, :, None] * p[:, None, :] + p[:, :, None] * em[None, None, :]) * c[:, None, None]
        dg -= (p[:, :, None] * p[:, None, :]) * (dc * p[:, m])[:, None, None]
        Q[:, m] = ev * (-(p[:, m] / w ** 3) * tr_base + (2.0 / w) * np.einsum("nij,nji->n", Fm, dg @ V @ g))
    # d/dv: F^{ij} a_ij - d rhs/dv
    S = np.einsum("nij,nij->n", Fm, st.a) - st.drhs[mask]

    coef = np.zeros((len(_pattern(grid).ops), grid.size))
    coef[-1] = (~mask).astype(float)
    coef[-2, mask] = S
    c = 0
    for k in range(n):
        for l in range(n):
            coef[c, mask] = P[:, k, l]
            c += 1
    for m in range(n):
        coef[c, mask] = Q[:, m]
        c += 1
    return _pattern(grid).assemble(coef)


class _Pattern:
    """Union sparsity pattern of sum_c diag(coef_c) op_c, assembled by bincount."""

    def __init__(self, grid):
        n, N = grid.n, grid.size
        ops = [grid.hess_ops[k][l] for k in range(n) for l in range(n)]
        ops += list(grid.grad_ops)
        ops += [sp.identity(N, format="csr"), sp.identity(N, format="csr")]  # v-term, boundary
        self.ops = ops
        rows, cols, vals, which = [], [], [], []
        for c, op in enumerate(ops):
            coo = op.tocoo()
            rows.append(coo.row)
            cols.append(coo.col)
            vals.append(coo.data)
            which.append(np.full(coo.nnz, c))
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        self.rows, self.vals, self.which = rows, np.concatenate(vals), np.concatenate(which)
        key = cols.astype(np.int64) * N + rows
        uniq, self.slot = np.unique(key, return_inverse=True)
        self.indices = (uniq % N).astype(np.int32)
        self.indptr = np.searchsorted(uniq // N, np.arange(N + 1)).astype(np.int32)
        self.shape = (N, N)
        self.nnz = uniq.size

    def assemble(self, coef):
        data = np.bincount(self.slot, weights=coef[self.which, self.rows] * self.vals, minlength=self.nnz)
        return sp.csc_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


def _pattern(grid):
    pat = grid.__dict__.get("_jacobian_pattern")
    if pat is None:
        pat = _Pattern(grid)
        grid.__dict__["_jacobian_pattern"] = pat
    return pat


class LinearWorkspace:
    """Most recent LU factorization of one solve sequence, reused as a GMRES
    preconditioner across Newton iterations and continuation steps."""

    def __init__(self):
        self.lu = None
        self.factorizations = 0
        self.krylov_solves = 0


def _factor(J):
    # fast fill-reducing ordering with diagonal pivots; fall back to partial pivoting
    lu = spla.splu(J, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
    probe = np.random.default_rng(0).standard_normal(J.shape[0])
    x = lu.solve(probe)
    if not np.all(np.isfinite(x)) or np.linalg.norm(J @ x - probe) > 1e-8 * np.linalg.norm(probe):
        lu = spla.splu(J)
    return lu


def _solve_linear(ws, J, rhs, settings, forcing):
    """Solve J x = rhs to relative accuracy ``forcing``: GMRES preconditioned by
    the cached LU, refactoring when it struggles."""
    lu = ws.lu
    if lu is not None and settings.krylov_iter > 0:
        M = spla.LinearOperator(J.shape, matvec=lu.solve, dtype=float)
        x, info = spla.gmres(J, rhs, M=M, rtol=max(forcing, settings.krylov_rtol), atol=0.0,
                             restart=settings.krylov_iter, maxiter=settings.krylov_iter)
        if info == 0 and np.all(np.isfinite(x)):
            ws.krylov_solves += 1
            return x
    ws.lu = _factor(J)
    ws.factorizations += 1
    return ws.lu.solve(rhs)


def linearize(problem, v):
    """Sparse Jacobian of :func:`residual` at ``v``; identity rows on the boundary."""
    v = problem.grid.check(v, "v")
    st = _evaluate(problem, v)
    if not st.elliptic or not np.all(np.isfinite(st.F)):
        raise LinearizationRejected("state is not strictly locally convex at every interior node")
    return _jacobian(problem, st)


def newton_solve(problem, v0, settings=None, workspace=None):
    """Damped Newton iteration from a strictly locally convex ``v0``.

    Each step solves L d = -R (sparse LU, or GMRES preconditioned by the
    last LU when that converges) and backtracks (halving) until the
    convexity margin stays above ``settings.convexity_floor`` and the residual
    max-norm satisfies the Armijo decrease.
    """
    settings = settings or NewtonSettings()
    ws = workspace if workspace is not None else LinearWorkspace()
    grid = problem.grid
    v = grid.check(v0, "v0").copy()
    mask = grid.interior
    bd = ~mask
    if np.max(np.abs(v[bd] - problem.boundary_values[bd]), initial=0.0) > 1e-12:
        raise PreconditionViolation("initial field does not match the boundary data")
    st = _evaluate(problem, v, settings.convexity_floor)
    min_margin = float(np.min(st.margin[mask]))
    if min_margin < settings.convexity_floor:
        raise PreconditionViolation(
            f"initial field convexity margin {min_margin:.3e} below floor {settings.convexity_floor:.1e}"
        )
    res = float(np.max(np.abs(st.R)))
    result = NewtonResult(v, [(res, 0.0, min_margin)])
    for it in range(settings.max_iter + 1):
        if res <= settings.tol:
            result.v = st.v
            result.converged = True
            return result
        if it == settings.max_iter:
            break
        J = _jacobian(problem, st)
        step = _solve_linear(ws, J, -st.R, settings, min(1e-2, res))
        alpha = 1.0
        for _ in range(settings.max_halvings):
            trial = st.v + alpha * step
            cand = _evaluate(problem, trial, settings.convexity_floor)
            if cand.elliptic and np.all(np.isfinite(cand.R)):
                new_res = float(np.max(np.abs(cand.R)))
                if new_res <= (1.0 - settings.armijo * alpha) * res:
                    break
            alpha *= 0.5
        else:
            result.v = st.v
            raise NewtonStall(
                f"step halving exhausted at iteration {it}, residual {res:.3e}", result
            )
        st, res = cand, new_res
        result.history.append((res, alpha, float(np.min(st.margin[mask]))))
        log.debug("newton it=%d residual=%.3e step=%.3g", it + 1, res, alpha)
    result.v = st.v
    raise NoConvergence(f"no convergence in {settings.max_iter} iterations, residual {res:.3e}", result)

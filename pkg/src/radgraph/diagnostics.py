"""Independent checks of computed radial graphs.

The curvature oracle differentiates the embedding X(xi) = e^{-v(xi)} x(xi)
in chart coordinates and solves the shape-operator eigenproblem from the
first and second fundamental forms. It uses its own fourth-order stencils
(built here from the node layout alone), so its O(h^4) error is negligible
next to the O(h^2) error of the curvature-matrix path it is checked against.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .chart import _apply
from .errors import OracleFailure
from .solver import _evaluate, residual

BETA_TOL = 1e-12


def fd_weights(offsets, order):
    """Finite-difference weights at 0 for the given integer offsets (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    m = offsets.size
    A = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = np.prod(np.arange(1, order + 1))
    return np.linalg.solve(A, rhs)


def _window(j, lo, hi, half=2, width=6):
    """Offsets of a centered 5-point window at j, or a 6-point one-sided window inside [lo, hi]."""
    if j - half >= lo and j + half <= hi:
        return np.arange(-half, half + 1)
    start = hi - width + 1 if j + half > hi else lo
    return np.arange(start, start + width) - j


class _OracleStencils:
    """Fourth-order chart-coordinate derivative matrices on the grid's nodes.

    Polar grids use coordinates (s, phi) on rings and the chart's Cartesian
    coordinates (s cos phi, s sin phi) at the pole. Radial lines of a ball
    continue through the pole: (-s, phi) is the node (s, phi + pi).
    """

    def __init__(self, grid):
        self.n = grid.n
        N = grid.size
        hs = grid.spacing[0]
        L = grid.levels
        if grid.n == 1:
            rows, cols, w1, w2 = [], [], [], []
            for j in range(N):
                off = _window(j, 0, N - 1)
                for o, a, b in zip(off, fd_weights(off, 1), fd_weights(off, 2)):
                    rows.append(j)
                    cols.append(j + o)
                    w1.append(a / hs)
                    w2.append(b / hs ** 2)
            D1 = sp.csr_matrix((w1, (rows, cols)), shape=(N, N))
            D2 = sp.csr_matrix((w2, (rows, cols)), shape=(N, N))
            self.d1, self.d2 = (D1,), ((D2,),)
            return

        M, hp = grid.azimuth, grid.spacing[1]
        ball = grid.domain.kind == "ball"

        def index(level, k):
            if ball:
                if level == 0:
                    return 0
                if level < 0:
                    level, k = -level, k + M // 2
                return 1 + (level - 1) * M + k % M
            return level * M + k % M

        lo = -(L - 1) if ball else 0
        r1, c1, v1, v2 = [], [], [], []
        for j in range(1 if ball else 0, L):
            off = _window(j, lo, L - 1)
            a1, a2 = fd_weights(off, 1), fd_weights(off, 2)
            for k in range(M):
                for o, a, b in zip(off, a1, a2):
                    r1.append(index(j, k))
                    c1.append(index(j + o, k))
                    v1.append(a / hs)
                    v2.append(b / hs ** 2)
        Ds = sp.csr_matrix((v1, (r1, c1)), shape=(N, N))
        Dss = sp.csr_matrix((v2, (r1, c1)), shape=(N, N))

        off = np.arange(-2, 3)
        p1, p2 = fd_weights(off, 1) / hp, fd_weights(off, 2) / hp ** 2
        rp, cp, vp1, vp2 = [], [], [], []
        for j in range(1 if ball else 0, L):
            for k in range(M):
                for o, a, b in zip(off, p1, p2):
                    rp.append(index(j, k))
                    cp.append(index(j, k + o))
                    vp1.append(a)
                    vp2.append(b)
        # phi-derivatives vanish at the pole (the pole rows stay empty)
        Dp = sp.csr_matrix((vp1, (rp, cp)), shape=(N, N))
        Dpp = sp.csr_matrix((vp2, (rp, cp)), shape=(N, N))
        Dsp = (Ds @ Dp).tocsr()

        if ball:
            # directional derivatives along the M/2 lines through the pole,
            # projected onto (cos, sin) and (1, cos 2phi, sin 2phi)
            half = M // 2
            phis = 2 * np.pi * np.arange(half) / M
            w1, w2 = fd_weights(off, 1) / hs, fd_weights(off, 2) / hs ** 2
            pole = {key: np.zeros(N) for key in ("x", "y", "xx", "yy", "xy")}
            for k, phi in enumerate(phis):
                for o, a, b in zip(off, w1, w2):
                    c = index(o, k)
                    pole["x"][c] += a * np.cos(phi) / (half / 2)
                    pole["y"][c] += a * np.sin(phi) / (half / 2)
                    A = b / half
                    B = b * np.cos(2 * phi) / (half / 2)
                    C = b * np.sin(2 * phi) / (half / 2)
                    pole["xx"][c] += A + B
                    pole["yy"][c] += A - B
                    pole["xy"][c] += C

            def with_pole(op, row):
                op = op.tolil()
                op[0, :] = row[None, :]
                return op.tocsr()

            Ds, Dp = with_pole(Ds, pole["x"]), with_pole(Dp, pole["y"])
            Dss, Dpp, Dsp = with_pole(Dss, pole["xx"]), with_pole(Dpp, pole["yy"]), with_pole(Dsp, pole["xy"])
        self.d1 = (Ds, Dp)
        self.d2 = ((Dss, Dsp), (Dsp, Dpp))


def _stencils(grid):
    st = grid.__dict__.get("_oracle_stencils")
    if st is None:
        st = _OracleStencils(grid)
        grid.__dict__["_oracle_stencils"] = st
    return st


def _coordinate_derivatives(grid, values):
    """First and second chart-coordinate derivatives of every column of ``values``."""
    st = _stencils(grid)
    n = grid.n
    d1 = np.stack([np.stack([_apply(op, col) for col in values.T], -1) for op in st.d1], 1)
    d2 = np.empty((grid.size, n, n, values.shape[1]))
    for a in range(n):
        for b in range(a, n):
            d2[:, a, b] = np.stack([_apply(st.d2[a][b], col) for col in values.T], -1)
            d2[:, b, a] = d2[:, a, b]
    return d1, d2


def _gram_schmidt(T):
    """Orthonormalize the rows T[:, a, :] in order; returns (frame, C) with frame = C^T T."""
    N, n, _ = T.shape
    frame = np.zeros_like(T)
    C = np.zeros((N, n, n))  # frame_i = sum_a C[a, i] T_a
    for i in range(n):
        vec = T[:, i].copy()
        coef = np.zeros((N, n))
        coef[:, i] = 1.0
        for j in range(i):
            proj = np.sum(vec * frame[:, j], axis=-1)
            vec -= proj[:, None] * frame[:, j]
            coef -= proj[:, None] * C[:, :, j]
        norm = np.linalg.norm(vec, axis=-1)
        scale = np.linalg.norm(T[:, i], axis=-1)
        bad = ~(norm > 1e-10 * np.maximum(scale, 1e-300))
        if bad.any():
            node = int(np.flatnonzero(bad)[0])
            raise OracleFailure(f"degenerate first fundamental form at node {node}")
        frame[:, i] = vec / norm[:, None]
        C[:, :, i] = coef / norm[:, None]
    return frame, C


def embedding_frame(grid, v):
    """(X, coordinate tangents X_a, second derivatives X_ab, orthonormal frame, C, inward normal)."""
    v = grid.check(v, "v")
    X = np.exp(-v)[:, None] * grid.points
    Xa, Xab = _coordinate_derivatives(grid, X)
    frame, C = _gram_schmidt(Xa)
    # normal: the part of -X orthogonal to the tangent space
    normal = -X + np.einsum("ni,nik->nk", np.einsum("nik,nk->ni", frame, X), frame)
    length = np.linalg.norm(normal, axis=-1)
    if not np.all(length > 0):
        raise OracleFailure("surface is tangent to the radial direction")
    return X, Xa, Xab, frame, C, normal / length[:, None]


def oracle_principal_curvatures(v, grid):
    """Principal curvatures (ascending, w.r.t. the inward normal) from the
    fundamental forms of the embedding, O(h^2)."""
    _, _, Xab, _, C, nu = embedding_frame(grid, v)
    second = np.einsum("nabk,nk->nab", Xab, nu)
    S = np.einsum("nai,nab,nbj->nij", C, second, C)
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))


def check_beta_identity(snap, grid, return_field=False):
    """Max over nodes of |D_i beta - (sum_j h_ij rho_j - (beta/rho) rho_i)|.

    Components are taken in the snapshot's tangent frame. D_i beta is the
    derivative of beta along that frame, obtained by chart differencing of
    beta and expressing the frame in the coordinate tangents.
    """
    X, Xa, _, _, _, _ = embedding_frame(grid, snap.v)
    tau = snap.tangent_frame  # (N, n, n+1)
    # tau_i = sum_a B[a, i] X_a  (least squares in the coordinate tangents)
    G = np.einsum("nak,nbk->nab", Xa, Xa)
    rhs = np.einsum("nak,nik->nai", Xa, tau)
    B = np.linalg.solve(G, rhs)
    dbeta, _ = _coordinate_derivatives(grid, snap.beta[:, None])
    lhs = np.einsum("nai,na->ni", B, dbeta[..., 0])
    rho = np.linalg.norm(snap.X, axis=-1)
    rho_j = np.einsum("nik,nk->ni", tau, snap.X) / rho[:, None]
    right = np.einsum("nij,nj->ni", snap.a, rho_j) - (snap.beta / rho)[:, None] * rho_j
    viol = np.max(np.abs(lhs - right), axis=-1)
    return (float(np.max(viol)), viol) if return_field else float(np.max(viol))


@dataclass
class BoundReport:
    K_observed: float
    grad_max: float
    kappa_min: float
    kappa_max: float
    convexity_min: float
    residual_max: float
    beta_min: float
    beta_max: float

    def as_dict(self):
        return asdict(self)


@dataclass
class Certificate:
    bounds: BoundReport
    flags: dict
    observed: dict

    @property
    def all_pass(self):
        return all(self.flags.values())

    def as_dict(self):
        return {
            "bounds": self.bounds.as_dict(),
            "flags": dict(self.flags),
            "observed": dict(self.observed),
            "all_pass": self.all_pass,
        }


def certify_solution(snap, problem, sub, tol=1e-10, boundary_rho=None, hv_slack=1e-8):
    """Check the conclusions expected of a solution.

    ``problem`` is the target :class:`~radgraph.solver.DirichletProblem`,
    ``sub`` the :class:`~radgraph.continuation.SubsolutionData`. Failures
    are reported as flags, never raised.
    """
    grid = problem.grid
    inner = grid.interior
    bd = grid.boundary
    res = residual(problem, snap.v)
    resid = np.abs(res.values)
    resid_max = float(np.nanmax(resid)) if np.isfinite(resid).any() else np.inf
    if not np.all(np.isfinite(resid)):
        resid_max = np.inf

    diff = snap.v - sub.v
    deep = grid.depth >= 2
    order_min = float(np.min(diff))
    order_interior = float(np.min(diff[deep])) if deep.any() else np.inf

    rho_b = np.exp(-sub.v[bd]) if boundary_rho is None else np.broadcast_to(boundary_rho, bd.sum())
    bd_err = float(np.max(np.abs(snap.rho[bd] - rho_b) / rho_b))

    # H_v = sum_i f_i kappa_i against F(a) at equation nodes, and against rhs
    hv_f = hv_rhs = np.inf
    if res.elliptic:
        st = _evaluate(problem, snap.v)
        if np.all(np.isfinite(st.F)):
            hv = np.einsum("nij,nij->n", st.dF, st.a)
            hv_f = float(np.max(hv - st.F))
            hv_rhs = float(np.max(hv - st.rhs[inner]))

    grad_u = np.linalg.norm(snap.du, axis=-1)
    bounds = BoundReport(
        K_observed=float(max(np.max(snap.u), 1.0 / np.min(snap.u))),
        grad_max=float(np.max(grad_u)),
        kappa_min=float(np.min(snap.kappa)),
        kappa_max=float(np.max(snap.kappa)),
        convexity_min=float(np.min(snap.convexity_v[inner])),
        residual_max=resid_max,
        beta_min=float(np.min(snap.beta)),
        beta_max=float(np.max(snap.beta)),
    )
    flags = {
        "residual": bool(resid_max <= tol),
        "kappa_positive": bool(bounds.kappa_min > 0),
        "ordering": bool(order_min >= -1e-10 and order_interior > 0),
        "boundary_exact": bool(bd_err <= 1e-12),
        "hv_bound": bool(hv_f <= hv_slack),
        "beta_range": bool(bounds.beta_min > 0 and bounds.beta_max <= 1 + BETA_TOL),
    }
    observed = {
        "residual_max": resid_max,
        "tolerance": tol,
        "ordering_min": order_min,
        "ordering_interior_min": order_interior,
        "boundary_rel_error": bd_err,
        "hv_minus_F_max": hv_f,
        "hv_minus_rhs_max": hv_rhs,
        "kappa_min": bounds.kappa_min,
        "beta_min": bounds.beta_min,
        "beta_max": bounds.beta_max,
    }
    return Certificate(bounds, flags, observed)

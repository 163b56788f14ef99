"""Pointwise geometry of radial graphs X = rho(x) x over a spherical domain.

Everything here is exact algebra on orthonormal-frame components; arrays may
carry any number of leading batch axes. Two parametrizations are supported:
u = 1/rho and v = -log rho = log u.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import covariant_gradient, covariant_hessian
from .errors import InvalidState


@dataclass
class PointStateU:
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray


@dataclass
class PointStateV:
    v: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray

    def to_u(self):
        """Chain rule: u = e^v, grad u = e^v grad v, hess u = e^v (hess v + dv dv^T)."""
        u = np.exp(self.v)
        dv = np.asarray(self.dv)
        return PointStateU(
            u,
            u[..., None] * dv,
            u[..., None, None] * (self.d2v + dv[..., :, None] * dv[..., None, :]),
        )


def _outer(p):
    return p[..., :, None] * p[..., None, :]


def _eye_like(p):
    return np.broadcast_to(np.eye(p.shape[-1]), p.shape[:-1] + (p.shape[-1],) * 2)


def gamma_matrices(state):
    """Return (gamma^{ij}, gamma_{ij}), the symmetric square root of the scaled
    inverse metric and its inverse, for either parametrization."""
    if isinstance(state, PointStateU):
        u = np.asarray(state.u, dtype=float)
        p = np.asarray(state.du, dtype=float)
    elif isinstance(state, PointStateV):
        p = np.asarray(state.dv, dtype=float)
        u = np.ones(p.shape[:-1])
    else:
        raise TypeError(f"expected PointStateU or PointStateV, got {type(state).__name__}")
    w = np.sqrt(u ** 2 + np.sum(p * p, axis=-1))
    pp = _outer(p)
    eye = _eye_like(p)
    upper = eye - pp / (w * (u + w))[..., None, None]
    lower = eye + pp / (u * (u + w))[..., None, None]
    return upper, lower


def curvature_matrix_u(state):
    """a_ij = (u/w) gamma^{ik} (u delta_kl + hess_kl u) gamma^{lj}."""
    u = np.asarray(state.u, dtype=float)
    p = np.asarray(state.du, dtype=float)
    w = np.sqrt(u ** 2 + np.sum(p * p, axis=-1))
    g, _ = gamma_matrices(state)
    inner = u[..., None, None] * _eye_like(p) + state.d2u
    a = (u / w)[..., None, None] * (g @ inner @ g)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def curvature_matrix_v(state):
    """a_ij = (e^v/w) (delta_ij + gamma^{ik} hess_kl v gamma^{lj}), w = sqrt(1 + |grad v|^2)."""
    v = np.asarray(state.v, dtype=float)
    p = np.asarray(state.dv, dtype=float)
    w = np.sqrt(1.0 + np.sum(p * p, axis=-1))
    g, _ = gamma_matrices(state)
    a = (np.exp(v) / w)[..., None, None] * (_eye_like(p) + g @ state.d2v @ g)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def principal_curvatures(a):
    """Eigenvalues of the symmetric matrix ``a``, ascending.

    Closed form for n <= 2, symmetric QR otherwise.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n == 1:
        return a[..., 0, :].copy()
    if n == 2:
        mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
        rad = np.hypot(0.5 * (a[..., 0, 0] - a[..., 1, 1]), a[..., 0, 1])
        return np.stack([mean - rad, mean + rad], axis=-1)
    return np.linalg.eigvalsh(a)


def convexity_margin_v(dv, d2v):
    """Smallest eigenvalue of [delta + dv dv^T + hess v]."""
    m = _eye_like(dv) + _outer(dv) + d2v
    return principal_curvatures(m)[..., 0]


@dataclass
class GeometrySnapshot:
    """Per-node geometry of the radial graph of a field v on a grid.

    Frame-indexed tensors use the sphere's orthonormal frame ``grid.frame``.
    ``tangent_frame`` holds the orthonormal tangent vectors of the surface
    in which ``a`` represents the second fundamental form.
    """

    v: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    w: np.ndarray  # sqrt(u^2 + |grad u|^2)
    X: np.ndarray
    metric: np.ndarray
    normal: np.ndarray
    second_form: np.ndarray
    a: np.ndarray
    kappa: np.ndarray
    beta: np.ndarray
    convexity: np.ndarray  # min eig of [u delta + hess u]
    convexity_v: np.ndarray  # min eig of [delta + dv dv^T + hess v]
    tangent_frame: np.ndarray

    @property
    def size(self):
        return self.v.shape[0]


def snapshot(grid, v):
    """Assemble the geometry of the radial graph rho = e^{-v} at every node."""
    v = grid.check(v, "v")
    dv = covariant_gradient(grid, v)
    d2v = covariant_hessian(grid, v)
    return snapshot_from_derivatives(grid, v, dv, d2v)


def snapshot_from_derivatives(grid, v, dv, d2v):
    # overflow is reported below as InvalidState, naming the node
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _assemble_snapshot(grid, v, dv, d2v)


def _assemble_snapshot(grid, v, dv, d2v):
    n = grid.n
    sv = PointStateV(v, dv, d2v)
    su = sv.to_u()
    u, du, d2u = su.u, su.du, su.d2u
    rho = np.exp(-v)
    w = np.sqrt(u ** 2 + np.sum(du * du, axis=-1))
    x = grid.points
    e = grid.frame  # (N, n, n+1)
    X = rho[:, None] * x
    grad_amb = np.einsum("ni,nik->nk", du, e)
    normal = (-grad_amb - u[:, None] * x) / w[:, None]
    eye = np.eye(n)
    metric = eye / u[:, None, None] ** 2 + _outer(du) / u[:, None, None] ** 4
    second = (u[:, None, None] * eye + d2u) / (u * w)[:, None, None]
    a = curvature_matrix_v(sv)
    kappa = principal_curvatures(a)
    beta = u / w
    conv = principal_curvatures(u[:, None, None] * eye + d2u)[:, 0]
    conv_v = convexity_margin_v(dv, d2v)
    # tau_k = -(grad_k u / u^2) x + e_k / u ; orthonormalized by g^{-1/2} = u gamma
    tau = -(du / u[:, None] ** 2)[:, :, None] * x[:, None, :] + e / u[:, None, None]
    g_up, _ = gamma_matrices(su)
    tangent = np.einsum("nki,nkm->nim", u[:, None, None] * g_up, tau)

    for name, arr in (("a", a), ("normal", normal), ("X", X), ("beta", beta)):
        bad = ~np.isfinite(arr.reshape(arr.shape[0], -1)).all(axis=1)
        if bad.any():
            node = int(np.flatnonzero(bad)[0])
            raise InvalidState(f"non-finite {name} at node {node}", node=node)
    return GeometrySnapshot(
        v=v, u=u, rho=rho, dv=dv, d2v=d2v, du=du, d2u=d2u, w=w, X=X, metric=metric,
        normal=normal, second_form=second, a=a, kappa=kappa, beta=beta,
        convexity=conv, convexity_v=conv_v, tangent_frame=tangent,
    )

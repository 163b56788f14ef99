import functools

import numpy as np
import pytest

from radgraph import CurvatureFunction, DomainSpec, Psi, build_domain, make_cap_subsolution, residual, solve
from radgraph.continuation import cap_radial_function

THETA0 = np.pi / 3
SIGMA2 = CurvatureFunction("sigma_k_root", 2, 2)


@functools.lru_cache(maxsize=None)
def ball(resolution, theta0=THETA0, chart="geodesic_polar"):
    return build_domain(DomainSpec("ball", theta0), resolution, chart=chart)


@functools.lru_cache(maxsize=None)
def annulus(resolution, inner=np.pi / 6, outer=np.pi / 3):
    return build_domain(DomainSpec("annulus", inner=inner, outer=outer), resolution)


@functools.lru_cache(maxsize=None)
def cap_solve(resolution, c, multiplier):
    """Two-stage solve of f = sigma_2^{1/2} = c on the pi/3 ball with rho = 1 on the boundary."""
    g = ball(resolution)
    psi = Psi("constant", c=c)
    sub = make_cap_subsolution(g, 1.0, multiplier, psi, SIGMA2)
    return g, psi, sub, solve(g, SIGMA2, psi, sub)


def cap_field(g, curvature):
    return -np.log(cap_radial_function(g.points, g.chart.center, 1.0, THETA0, curvature))


def sphere_through_circle(x, center, theta0, curvature):
    """Closed form: the sphere of radius 1/k centred on the axis through the
    circle {angle(x, center) = theta0} of the unit sphere, farther from the origin."""
    R = 1.0 / curvature
    a = np.sin(theta0)
    z = np.cos(theta0) - np.sqrt(R * R - a * a)
    c = x @ center
    return z * c + np.sqrt(R * R - z * z * (1 - c * c))


def fd_jacobian(problem, v, h=1e-7):
    cols = []
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        cols.append((residual(problem, v + e).values - residual(problem, v - e).values) / (2 * h))
    return np.column_stack(cols)


def random_elliptic_state(g, rng):
    """Strictly locally convex perturbation of a cap (margin checked)."""
    x = g.points
    c = rng.uniform(0.9, 1.1)
    v = cap_field(g, c)
    q = rng.standard_normal(3)
    q /= np.linalg.norm(q)
    v = v + rng.uniform(-0.05, 0.05) * (x @ q) ** 2 + rng.uniform(-0.05, 0.05) * np.sin(2 * x[:, 0] + rng.uniform())
    return v


def state_rhs(g, rng):
    psi = Psi("radial_power", c=rng.uniform(0.5, 1.0), alpha=rng.uniform(-1, 1))

    def rhs(v):
        X = np.exp(-v)[:, None] * g.points
        return psi(X), -np.sum(psi.gradient(X) * X, axis=-1)

    return rhs


class AmbientPoly:
    """F(x) = c0 + <b, x> + x^T A x + sum_k d_k <x, q_k>^3 on R^{n+1} with exact
    derivatives. Its restriction u to the unit sphere has covariant gradient
    the tangential part of DF and Hessian e_i^T D^2F e_j - <x, DF> delta_ij."""

    def __init__(self, rng, dim, scale=1.0):
        self.c0 = rng.uniform(-1, 1)
        self.b = scale * rng.uniform(-1, 1, dim)
        A = scale * rng.uniform(-1, 1, (dim, dim))
        self.A = 0.5 * (A + A.T)
        self.d = scale * rng.uniform(-0.5, 0.5, 2)
        self.q = rng.standard_normal((2, dim))
        self.q /= np.linalg.norm(self.q, axis=1, keepdims=True)

    def value(self, x):
        s = x @ self.q.T
        return self.c0 + x @ self.b + np.einsum("ni,ij,nj->n", x, self.A, x) + (s ** 3) @ self.d

    def grad(self, x):
        s = x @ self.q.T
        return self.b + 2.0 * x @ self.A + (3.0 * s ** 2 * self.d) @ self.q

    def hess(self, x):
        s = x @ self.q.T
        return 2.0 * self.A + np.einsum("nk,ki,kj->nij", 6.0 * s * self.d, self.q, self.q)

    def covariant(self, grid):
        x, e = grid.points, grid.frame
        DF, D2F = self.grad(x), self.hess(x)
        du = np.einsum("nik,nk->ni", e, DF)
        d2u = np.einsum("nik,nkl,njl->nij", e, D2F, e)
        d2u -= np.sum(x * DF, axis=-1)[:, None, None] * np.eye(grid.n)
        return du, d2u


def random_convex_poly(grids, rng, min_margin=0.1, scale=0.15):
    """Random ambient cubic whose restriction has exact convexity margin
    min eig(delta + dv dv^T + hess v) above ``min_margin`` on every grid."""
    from radgraph.geometry import convexity_margin_v

    grids = grids if isinstance(grids, (list, tuple)) else [grids]
    while True:
        P = AmbientPoly(rng, grids[0].n + 1, scale)
        if all(convexity_margin_v(*P.covariant(g)).min() > min_margin for g in grids):
            return P


def random_convex_field(grid, rng, min_margin=0.1, scale=0.15):
    return random_convex_poly(grid, rng, min_margin, scale).value(grid.points)


def order(e_coarse, e_fine):
    return float(np.log2(e_coarse / e_fine))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

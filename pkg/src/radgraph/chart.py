"""Single-chart discretization of geodesic balls and annuli on S^n, n = 1 or 2.

Nodes are laid out on a polar (n = 2) or linear (n = 1) logical grid in
chart coordinates. Derivatives are linear in the field, so every stencil is
stored as a sparse matrix: ``grid.grad_ops[i] @ u`` is the i-th orthonormal
frame component of the covariant gradient and ``grid.hess_ops[i][j] @ u`` the
(i, j) frame component of the covariant Hessian.

Radial direction: second-order centered second derivatives, fourth-order
five-point first derivatives (see _radial_stencils), third-order one-sided
rows on boundary rings. Azimuthal direction (periodic): fourth-order centered
differences. The pole of a ball is treated in the chart's Cartesian
coordinates, where the Christoffel symbols vanish, by a Fourier fit over the
first ring.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidField, InvalidResolution

CHART_KINDS = ("geodesic_polar", "gnomonic")

INTERIOR, BOUNDARY, POLE = 0, 1, 2


def _complete_basis(center):
    """Orthonormal basis of the tangent space at ``center`` (rows)."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    m = c.size
    q, _ = np.linalg.qr(np.column_stack([c, np.eye(m)]))
    basis = q[:, 1:m].T.copy()
    # (c, b1, ..., bn) positively oriented
    if np.linalg.det(np.vstack([c, basis])) < 0:
        basis[-1] = -basis[-1]
    return c, basis


@dataclass(frozen=True)
class Chart:
    """Chart about ``center`` on S^n.

    Logical coordinates are ``(s, phi)`` for n = 2 and ``(s,)`` for n = 1,
    where ``s`` is the geodesic distance to the center (``geodesic_polar``)
    or its tangent (``gnomonic``). For n = 1, ``s`` is signed.
    """

    dimension: int
    kind: str
    center: np.ndarray
    basis: np.ndarray

    @classmethod
    def about(cls, center=None, dimension=2, kind="geodesic_polar"):
        if dimension not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {dimension}")
        if kind not in CHART_KINDS:
            raise DomainError(f"unknown chart kind {kind!r}")
        if center is None:
            center = np.eye(dimension + 1)[-1]
        center = np.asarray(center, dtype=float)
        if center.shape != (dimension + 1,):
            raise DomainError("center must be a vector in R^{n+1}")
        c, basis = _complete_basis(center)
        return cls(dimension, kind, c, basis)

    # radial reparametrization r(s) and its derivatives
    def geodesic_radius(self, s):
        s = np.asarray(s, dtype=float)
        return s if self.kind == "geodesic_polar" else np.arctan(s)

    def coordinate_of_radius(self, r):
        r = np.asarray(r, dtype=float)
        return r if self.kind == "geodesic_polar" else np.tan(r)

    def _dr(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "geodesic_polar":
            return np.ones_like(s), np.zeros_like(s)
        d = 1.0 / (1.0 + s * s)
        return d, -2.0 * s * d * d

    def metric(self, xi):
        """Round-metric components sigma_ab at chart coordinates ``xi`` (..., n)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        s = xi[:, 0]
        dr, _ = self._dr(s)
        out = np.zeros(xi.shape[:1] + (self.dimension, self.dimension))
        out[:, 0, 0] = dr ** 2
        if self.dimension == 2:
            sinr = np.sin(self.geodesic_radius(s))
            out[:, 1, 1] = sinr ** 2
            # polar coordinates are singular at s = 0; report the Cartesian
            # normal-coordinate metric there
            at_pole = s == 0.0
            out[at_pole] = np.eye(2)
        return out

    def christoffel(self, xi):
        """Christoffel symbols ``G[..., k, a, b]`` of the round metric."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        s = xi[:, 0]
        n = self.dimension
        dr, d2r = self._dr(s)
        out = np.zeros(xi.shape[:1] + (n, n, n))
        # A = r'^2, A' = 2 r' r''
        out[:, 0, 0, 0] = d2r / dr
        if n == 2:
            r = self.geodesic_radius(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                # B = sin^2 r, B' = 2 sin r cos r r'
                sinr, cosr = np.sin(r), np.cos(r)
                out[:, 0, 1, 1] = -sinr * cosr * dr / dr ** 2
                g = cosr * dr / sinr
                out[:, 1, 0, 1] = g
                out[:, 1, 1, 0] = g
            out[s == 0.0] = 0.0
        return out

    def embed(self, xi):
        """Unit vectors x(xi) in R^{n+1}."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        r = self.geodesic_radius(xi[:, 0])
        if self.dimension == 1:
            direction = np.outer(np.ones_like(r), self.basis[0])
            return np.cos(r)[:, None] * self.center + np.sin(r)[:, None] * direction
        phi = xi[:, 1]
        direction = np.cos(phi)[:, None] * self.basis[0] + np.sin(phi)[:, None] * self.basis[1]
        return np.cos(r)[:, None] * self.center + np.sin(r)[:, None] * direction

    def frame(self, xi):
        """Ambient orthonormal frame vectors ``e[..., i, :]`` of the sphere.

        At the pole the frame is the Cartesian one, (basis[0], basis[1]).
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        r = self.geodesic_radius(xi[:, 0])
        if self.dimension == 1:
            e = -np.sin(r)[:, None] * self.center + np.cos(r)[:, None] * self.basis[0]
            return e[:, None, :]
        phi = xi[:, 1]
        radial = np.cos(phi)[:, None] * self.basis[0] + np.sin(phi)[:, None] * self.basis[1]
        e1 = -np.sin(r)[:, None] * self.center + np.cos(r)[:, None] * radial
        e2 = -np.sin(phi)[:, None] * self.basis[0] + np.cos(phi)[:, None] * self.basis[1]
        out = np.stack([e1, e2], axis=1)
        at_pole = xi[:, 0] == 0.0
        out[at_pole] = self.basis[:2]
        return out


@dataclass(frozen=True)
class DomainSpec:
    """Geodesic ball (``radius``) or annulus (``inner``, ``outer``) about the chart center."""

    kind: str = "ball"
    radius: float | None = None
    inner: float | None = None
    outer: float | None = None

    @property
    def outer_radius(self):
        return self.radius if self.kind == "ball" else self.outer


@dataclass
class Grid:
    chart: Chart
    domain: DomainSpec
    coords: np.ndarray  # (N, n) logical chart coordinates
    node_kind: np.ndarray  # INTERIOR / BOUNDARY / POLE
    spacing: tuple
    levels: int
    azimuth: int
    depth: np.ndarray  # rings (or nodes) to the nearest boundary
    inward_normal: np.ndarray  # (N, n) frame components, zero off the boundary
    points: np.ndarray  # (N, n+1)
    frame: np.ndarray  # (N, n, n+1)
    coord_d1: tuple = field(repr=False)
    coord_d2: tuple = field(repr=False)
    grad_ops: tuple = field(repr=False)
    hess_ops: tuple = field(repr=False)

    @property
    def n(self):
        return self.chart.dimension

    @property
    def size(self):
        return self.coords.shape[0]

    @property
    def interior(self):
        """Mask of nodes carrying the PDE (interior and pole)."""
        return self.node_kind != BOUNDARY

    @property
    def boundary(self):
        return self.node_kind == BOUNDARY

    @property
    def pole(self):
        idx = np.flatnonzero(self.node_kind == POLE)
        return int(idx[0]) if idx.size else None

    def geodesic_distance_from_center(self):
        return np.abs(self.chart.geodesic_radius(self.coords[:, 0]))

    def check(self, values, name="field"):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise InvalidField(f"{name} has shape {values.shape}, grid has {self.size} nodes")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise InvalidField(f"{name} is not finite at node {bad}")
        return values

    def hash(self):
        h = hashlib.sha256()
        h.update(self.chart.kind.encode())
        h.update(np.ascontiguousarray(self.chart.center).tobytes())
        h.update(np.ascontiguousarray(self.coords).tobytes())
        h.update(np.ascontiguousarray(self.node_kind).tobytes())
        return h.hexdigest()


# one-dimensional stencils: (offsets, weights)
_C1 = ((-1, 1), (-0.5, 0.5))
_C2 = ((-1, 0, 1), (1.0, -2.0, 1.0))
# third-order one-sided rows on boundary nodes
_HI1 = ((0, -1, -2, -3), (11 / 6, -3.0, 1.5, -1 / 3))
_HI2 = ((0, -1, -2, -3, -4), (35 / 12, -104 / 12, 114 / 12, -56 / 12, 11 / 12))
_LO1 = ((0, 1, 2, 3), (-11 / 6, 3.0, -1.5, 1 / 3))
_LO2 = ((0, 1, 2, 3, 4), (35 / 12, -104 / 12, 114 / 12, -56 / 12, 11 / 12))
_P1 = ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12))
_C1_4 = _P1
_P2 = ((-2, -1, 0, 1, 2), (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12))


# shifted five-point first derivatives next to a boundary ring
_S1_HI = ((-3, -2, -1, 0, 1), (-1 / 12, 0.5, -1.5, 10 / 12, 0.25))
_S1_LO = ((-1, 0, 1, 2, 3), (-0.25, -10 / 12, 1.5, -0.5, 1 / 12))


def _radial_stencils(level, levels, ball):
    if level == levels - 1:
        return _HI1, _HI2
    if level == 0 and not ball:
        return _LO1, _LO2
    # near the pole cot(r) ~ 1/r amplifies first-derivative errors, so first
    # derivatives are fourth order everywhere off the boundary; keeping one
    # order throughout also keeps the discretization error smooth
    if level == levels - 2:
        return _S1_HI, _C2
    if level == 1 and not ball:
        return _S1_LO, _C2
    return _C1_4, _C2


def build_domain(spec, resolution, *, dimension=2, chart="geodesic_polar", center=None, azimuth=None):
    """Discretize a geodesic ball or annulus.

    ``spec`` is a :class:`DomainSpec` or a dict ``{"kind": "ball", "radius": r}`` /
    ``{"kind": "annulus", "inner": r1, "outer": r2}``. ``resolution`` counts
    nodes along a radius (including the pole for balls). ``azimuth`` defaults
    to ``2 * (resolution - 1)`` rounded up to a multiple of 4.
    """
    if isinstance(spec, dict):
        spec = DomainSpec(**spec)
    if resolution < 9 or int(resolution) != resolution:
        raise InvalidResolution(f"resolution must be an integer >= 9, got {resolution}")
    resolution = int(resolution)
    if spec.kind == "ball":
        if spec.radius is None or not 0 < spec.radius:
            raise DomainError("ball radius must be positive")
        if spec.radius >= np.pi / 2:
            raise DomainError(f"ball radius {spec.radius} >= pi/2: domain violates hemisphere containment")
    elif spec.kind == "annulus":
        if dimension != 2:
            raise DomainError("annuli are only supported for n = 2")
        if spec.inner is None or spec.outer is None or not 0 < spec.inner < spec.outer:
            raise DomainError("annulus needs 0 < inner < outer")
        if spec.outer >= np.pi / 2:
            raise DomainError(f"annulus outer radius {spec.outer} >= pi/2: domain violates hemisphere containment")
    else:
        raise DomainError(f"unknown domain kind {spec.kind!r}")

    ch = Chart.about(center, dimension, chart)
    if dimension == 1:
        return _build_line(ch, spec, resolution)
    if azimuth is None:
        azimuth = 2 * (resolution - 1)
    azimuth = int(4 * int(np.ceil(azimuth / 4)))
    if azimuth < 8:
        raise InvalidResolution("azimuthal node count must be >= 8")
    return _build_polar(ch, spec, resolution, azimuth)


def _assemble(rows, cols, vals, size):
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )


def _build_polar(ch, spec, levels, M):
    ball = spec.kind == "ball"
    if ball:
        s_lo, s_hi = 0.0, float(ch.coordinate_of_radius(spec.radius))
    else:
        s_lo = float(ch.coordinate_of_radius(spec.inner))
        s_hi = float(ch.coordinate_of_radius(spec.outer))
    s_levels = np.linspace(s_lo, s_hi, levels)
    if ball:
        s_levels[-1] = s_hi
    hs = (s_hi - s_lo) / (levels - 1)
    hp = 2 * np.pi / M
    phis = hp * np.arange(M)

    def index(level, k):
        if ball:
            if level == 0:
                return np.zeros_like(k)
            if level < 0:
                # through the pole: (s, phi) -> (-s, phi + pi)
                level, k = -level, k + M // 2
            return 1 + (level - 1) * M + np.mod(k, M)
        return level * M + np.mod(k, M)

    ring_levels = range(1, levels) if ball else range(levels)
    coords = [np.zeros((1, 2))] if ball else []
    kinds = [np.array([POLE])] if ball else []
    depth = [np.array([levels - 1])] if ball else []
    side = [np.zeros(1)] if ball else []
    for j in ring_levels:
        coords.append(np.column_stack([np.full(M, s_levels[j]), phis]))
        on_bd = j == levels - 1 or (not ball and j == 0)
        kinds.append(np.full(M, BOUNDARY if on_bd else INTERIOR))
        d = levels - 1 - j if ball else min(j, levels - 1 - j)
        depth.append(np.full(M, d))
        # inward normal sign along e_1
        sgn = -1.0 if j == levels - 1 else (1.0 if (not ball and j == 0) else 0.0)
        side.append(np.full(M, sgn))
    coords = np.vstack(coords)
    kinds = np.concatenate(kinds).astype(np.int8)
    depth = np.concatenate(depth)
    side = np.concatenate(side)
    N = coords.shape[0]

    # coordinate derivative stencils: D_s, D_phi, D_ss, D_sphi, D_phiphi
    ops = {key: ([], [], []) for key in ("s", "p", "ss", "sp", "pp")}

    def add(key, r, c, w):
        ops[key][0].append(np.asarray(r))
        ops[key][1].append(np.asarray(c))
        ops[key][2].append(np.asarray(w, dtype=float) * np.ones(np.shape(r)))

    k = np.arange(M)
    for j in ring_levels:
        rows = index(j, k)
        (o1, w1), (o2, w2) = _radial_stencils(j, levels, ball)
        for o, w in zip(o1, w1):
            add("s", rows, index(j + o, k), w / hs)
        for o, w in zip(o2, w2):
            add("ss", rows, index(j + o, k), w / hs ** 2)
        for o, w in zip(*_P1):
            add("p", rows, index(j, k + o), w / hp)
        for o, w in zip(*_P2):
            add("pp", rows, index(j, k + o), w / hp ** 2)
        for oa, wa in zip(o1, w1):
            for ob, wb in zip(*_P1):
                add("sp", rows, index(j + oa, k + ob), wa * wb / (hs * hp))

    D = {key: _assemble(*ops[key], N) for key in ops}

    # frame conversion on ring nodes
    E = np.zeros((N, 2, 2))
    G = ch.christoffel(coords)
    sig = ch.metric(coords)
    E[:, 0, 0] = 1.0 / np.sqrt(sig[:, 0, 0])
    E[:, 1, 1] = 1.0 / np.sqrt(sig[:, 1, 1])
    d1 = (D["s"], D["p"])
    d2 = ((D["ss"], D["sp"]), (D["sp"], D["pp"]))

    if ball:
        # pole rows in Cartesian chart coordinates: the gradient is the first
        # Fourier mode of rings 1 and 2, combined as (8 c(h) - c(2h)) / 6h for
        # fourth order; the Hessian uses the modes of ring 1
        ring = index(1, k)
        ring2 = index(2, k)
        h1 = s_levels[1]
        cosp, sinp = np.cos(phis), np.sin(phis)
        cos2, sin2 = np.cos(2 * phis), np.sin(2 * phis)
        gx = np.concatenate([16.0 * cosp, -2.0 * cosp]) / (6.0 * M * h1)
        gy = np.concatenate([16.0 * sinp, -2.0 * sinp]) / (6.0 * M * h1)
        lap_ring = 4.0 / (M * h1 ** 2) * np.ones(M)
        diff_ring = 4.0 * 2.0 * cos2 / (M * h1 ** 2)
        hxx = 0.5 * (lap_ring + diff_ring)
        hyy = 0.5 * (lap_ring - diff_ring)
        hxy = 2.0 * 2.0 * sin2 / (M * h1 ** 2)
        c_center = -2.0 / h1 ** 2  # -4/h^2 split evenly between xx and yy

        def pole_row(ring_w, center_w=0.0, nodes=ring):
            cols = np.concatenate([nodes, [0]])
            vals = np.concatenate([ring_w, [center_w]])
            return sp.csr_matrix((vals, (np.zeros(cols.size, dtype=int), cols)), shape=(N, N))

        both = np.concatenate([ring, ring2])
        pole_d1 = (pole_row(gx, nodes=both), pole_row(gy, nodes=both))
        pole_d2 = (
            (pole_row(hxx, c_center), pole_row(hxy)),
            (pole_row(hxy), pole_row(hyy, c_center)),
        )
        d1 = tuple(op + pd for op, pd in zip(d1, pole_d1))
        d2 = tuple(tuple(op + pd for op, pd in zip(r1, r2)) for r1, r2 in zip(d2, pole_d2))
        E[0] = np.eye(2)
        G[0] = 0.0

    grad_ops, hess_ops = _frame_operators(d1, d2, E, G)
    points = ch.embed(coords)
    frame = ch.frame(coords)
    inward = np.zeros((N, 2))
    inward[:, 0] = side
    return Grid(
        chart=ch, domain=spec, coords=coords, node_kind=kinds, spacing=(hs, hp),
        levels=levels, azimuth=M, depth=depth, inward_normal=inward, points=points,
        frame=frame, coord_d1=d1, coord_d2=d2, grad_ops=grad_ops, hess_ops=hess_ops,
    )


def _build_line(ch, spec, N):
    s0 = float(ch.coordinate_of_radius(spec.radius))
    s = np.linspace(-s0, s0, N)
    hs = 2 * s0 / (N - 1)
    coords = s[:, None]
    kinds = np.zeros(N, dtype=np.int8)
    kinds[[0, -1]] = BOUNDARY
    depth = np.minimum(np.arange(N), N - 1 - np.arange(N))
    rows, cols, v1, v2r, v2c, v2 = [], [], [], [], [], []
    for j in range(N):
        if j == 0:
            (o1, w1), (o2, w2) = _LO1, _LO2
        elif j == N - 1:
            (o1, w1), (o2, w2) = _HI1, _HI2
        else:
            (o1, w1), (o2, w2) = _C1, _C2
        for o, w in zip(o1, w1):
            rows.append(j)
            cols.append(j + o)
            v1.append(w / hs)
        for o, w in zip(o2, w2):
            v2r.append(j)
            v2c.append(j + o)
            v2.append(w / hs ** 2)
    D1 = sp.csr_matrix((v1, (rows, cols)), shape=(N, N))
    D2 = sp.csr_matrix((v2, (v2r, v2c)), shape=(N, N))
    sig = ch.metric(coords)
    E = 1.0 / np.sqrt(sig)
    G = ch.christoffel(coords)
    grad_ops, hess_ops = _frame_operators((D1,), ((D2,),), E, G)
    inward = np.zeros((N, 1))
    inward[0, 0], inward[-1, 0] = 1.0, -1.0
    return Grid(
        chart=ch, domain=spec, coords=coords, node_kind=kinds, spacing=(hs,),
        levels=N, azimuth=1, depth=depth, inward_normal=inward,
        points=ch.embed(coords), frame=ch.frame(coords),
        coord_d1=(D1,), coord_d2=((D2,),), grad_ops=grad_ops, hess_ops=hess_ops,
    )


def _frame_operators(d1, d2, E, G):
    """Orthonormal-frame gradient and covariant Hessian operators.

    grad_i = E_ia d_a,  hess_ij = E_ia E_jb (d_ab - G^c_ab d_c).
    """
    n = len(d1)
    diag = sp.diags
    cov = [[d2[a][b] - sum(diag(G[:, c, a, b]) @ d1[c] for c in range(n)) for b in range(n)] for a in range(n)]
    grad = tuple(
        sum(diag(E[:, i, a]) @ d1[a] for a in range(n)).tocsr() for i in range(n)
    )
    hess = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            op = sum(
                diag(E[:, i, a] * E[:, j, b]) @ cov[a][b] for a in range(n) for b in range(n)
            ).tocsr()
            hess[i][j] = op
            hess[j][i] = op
    return grad, tuple(tuple(r) for r in hess)


def _apply(op, values):
    """op @ values in difference form, sum_k c_ik (u_k - u_i).

    Every derivative stencil annihilates constants, so this equals op @ values
    but avoids the cancellation of large near-pole coefficients against the
    size of u itself.
    """
    rows = np.repeat(np.arange(op.shape[0]), np.diff(op.indptr))
    return np.bincount(rows, weights=op.data * (values[op.indices] - values[rows]), minlength=op.shape[0])


def covariant_gradient(grid, values):
    """Orthonormal-frame components of grad u, shape (N, n)."""
    values = grid.check(values)
    return np.stack([_apply(op, values) for op in grid.grad_ops], axis=-1)


def covariant_hessian(grid, values):
    """Orthonormal-frame components of the covariant Hessian, shape (N, n, n)."""
    values = grid.check(values)
    n = grid.n
    out = np.empty((grid.size, n, n))
    for i in range(n):
        for j in range(i, n):
            out[:, i, j] = _apply(grid.hess_ops[i][j], values)
            out[:, j, i] = out[:, i, j]
    return out

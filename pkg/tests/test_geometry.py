import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from radgraph import snapshot
from radgraph.errors import InvalidField, InvalidState
from radgraph.geometry import (
    PointStateU,
    PointStateV,
    convexity_margin_v,
    curvature_matrix_u,
    curvature_matrix_v,
    gamma_matrices,
    principal_curvatures,
)

from conftest import ball

SQ2 = np.sqrt(2.0)


def _sym(rng, n, scale=1.0):
    A = rng.uniform(-scale, scale, (n, n))
    return 0.5 * (A + A.T)


def _random_v_states(rng, count, n=2):
    v = rng.uniform(-1, 1, count)
    dv = rng.uniform(-1.5, 1.5, (count, n))
    d2v = np.array([_sym(rng, n, 2.0) for _ in range(count)])
    return PointStateV(v, dv, d2v)


# gamma matrices


def test_gamma_zero_gradient():
    up, lo = gamma_matrices(PointStateU(np.array(2.0), np.zeros(2), np.zeros((2, 2))))
    assert np.array_equal(up, np.eye(2)) and np.array_equal(lo, np.eye(2))


def test_gamma_example():
    up, lo = gamma_matrices(PointStateU(np.array(1.0), np.array([1.0, 0.0]), np.zeros((2, 2))))
    assert up[0, 0] == pytest.approx(1 - 1 / (SQ2 * (1 + SQ2)), abs=1e-15)
    assert up[0, 0] == pytest.approx(0.70711, abs=1e-5)
    assert lo[0, 0] == pytest.approx(1 + 1 / (1 + SQ2), abs=1e-15)
    assert lo[0, 0] == pytest.approx(1.41421, abs=1e-5)
    assert np.max(np.abs(up @ lo - np.eye(2))) < 1e-13
    # gamma^{ik} gamma^{kj} = delta - du du / w^2 (inverse metric factor)
    assert np.max(np.abs(up @ up - (np.eye(2) - np.outer([1, 0], [1, 0]) / 2))) < 1e-15


def test_gamma_inverse_pair_and_symmetry():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        u = rng.uniform(0.1, 5, 500)
        du = rng.uniform(-5, 5, (500, n))
        up, lo = gamma_matrices(PointStateU(u, du, np.zeros((500, n, n))))
        assert np.max(np.abs(up @ lo - np.eye(n))) < 1e-13
        assert np.array_equal(up, np.swapaxes(up, 1, 2))
        assert np.array_equal(lo, np.swapaxes(lo, 1, 2))


def test_gamma_type_error():
    with pytest.raises(TypeError):
        gamma_matrices((1.0, np.zeros(2)))


# curvature matrices


def test_curvature_matrix_u_examples():
    R = 2.5
    a = curvature_matrix_u(PointStateU(np.array(1 / R), np.zeros(2), np.zeros((2, 2))))
    assert np.allclose(a, np.eye(2) / R, atol=1e-15)
    a = curvature_matrix_u(PointStateU(np.array(1.0), np.zeros(2), np.diag([1.0, 2.0])))
    assert np.allclose(a, np.diag([2.0, 3.0]), atol=1e-15)


def test_curvature_matrix_v_constant():
    R = 0.7
    a = curvature_matrix_v(PointStateV(np.array(np.log(1 / R)), np.zeros(2), np.zeros((2, 2))))
    assert np.allclose(a, np.eye(2) / R, atol=1e-14)


def test_form_equivalence_1000_states():
    rng = np.random.default_rng(2)
    sv = _random_v_states(rng, 1000)
    kv = principal_curvatures(curvature_matrix_v(sv))
    ku = principal_curvatures(curvature_matrix_u(sv.to_u()))
    assert np.max(np.abs(kv - ku)) < 1e-12


def test_form_equivalence_n3():
    rng = np.random.default_rng(3)
    sv = _random_v_states(rng, 200, n=3)
    kv = np.linalg.eigvalsh(curvature_matrix_v(sv))
    ku = np.linalg.eigvalsh(curvature_matrix_u(sv.to_u()))
    assert np.max(np.abs(kv - ku)) < 1e-12


def test_degenerate_v_state_has_zero_curvature():
    rng = np.random.default_rng(4)
    for _ in range(20):
        dv = rng.uniform(-1, 1, 2)
        d2v = -np.eye(2) - np.outer(dv, dv)
        # keep the matrix singular but not identically zero
        extra = rng.uniform(0.1, 1) * np.outer([1.0, 0.3], [1.0, 0.3])
        d2v = d2v + extra
        state = PointStateV(np.array(rng.uniform(-1, 1)), dv, d2v)
        k = principal_curvatures(curvature_matrix_v(state))
        assert abs(k[0]) < 1e-14
        assert abs(convexity_margin_v(dv, d2v)) < 1e-14


def _normal_coordinate_oracle(u0, du, d2u, h=2e-3):
    """Principal curvatures of X = y / u(y), u given by its 2-jet in geodesic
    normal coordinates about the north pole, from fourth-order differences."""
    x0 = np.array([0.0, 0.0, 1.0])
    e = np.eye(3)[:2]

    def X(xi):
        r = np.linalg.norm(xi)
        y = x0 if r == 0 else np.cos(r) * x0 + np.sin(r) * (xi @ e) / r
        return y / (u0 + du @ xi + 0.5 * xi @ d2u @ xi)

    w = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
    w2 = {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}
    E = np.eye(2)
    Xa = np.array([sum(c * X(k * h * E[a]) for k, c in w.items()) / h for a in range(2)])
    Xab = np.zeros((2, 2, 3))
    for a in range(2):
        Xab[a, a] = sum(c * X(k * h * E[a]) for k, c in w2.items()) / h ** 2
    Xab[0, 1] = Xab[1, 0] = sum(
        ci * cj * X(i * h * E[0] + j * h * E[1]) for i, ci in w.items() for j, cj in w.items()
    ) / h ** 2
    nu = np.cross(Xa[0], Xa[1])
    nu /= np.linalg.norm(nu)
    if nu @ X(np.zeros(2)) > 0:
        nu = -nu
    I = Xa @ Xa.T
    II = Xab @ nu
    return np.sort(np.linalg.eigvals(np.linalg.solve(I, II)).real)


def test_curvature_matrix_against_embedding_oracle():
    rng = np.random.default_rng(5)
    for _ in range(30):
        u0 = rng.uniform(0.5, 2.0)
        du = rng.uniform(-1, 1, 2)
        d2u = _sym(rng, 2, 1.0)
        k = principal_curvatures(curvature_matrix_u(PointStateU(np.array(u0), du, d2u)))
        ko = _normal_coordinate_oracle(u0, du, d2u)
        assert np.max(np.abs(k - ko) / np.maximum(np.abs(ko), 1e-2)) < 1e-6


# principal curvatures


def test_principal_curvature_examples():
    assert np.allclose(principal_curvatures(np.eye(2) / 4), [0.25, 0.25], atol=1e-16)
    assert np.allclose(principal_curvatures(np.diag([3.0, 2.0])), [2.0, 3.0], atol=1e-15)
    assert np.allclose(principal_curvatures(np.eye(3) * 5), [5, 5, 5])
    assert principal_curvatures(np.array([[4.0]])).tolist() == [4.0]


@settings(max_examples=200, deadline=None)
@given(arrays(float, 3, elements=st.floats(-100, 100)))
def test_principal_curvatures_quadratic_roots(entries):
    a, b, c = entries
    A = np.array([[a, b], [b, c]])
    k = principal_curvatures(A)
    # roots of t^2 - (a + c) t + (ac - b^2) = 0
    tr, det = a + c, a * c - b * b
    disc = np.sqrt(max(tr * tr - 4 * det, 0.0))
    big = 0.5 * (tr + disc) if tr >= 0 else 0.5 * (tr - disc)
    roots = sorted([big, det / big] if big != 0 else [0.0, 0.0])
    scale = max(1.0, abs(a), abs(b), abs(c))
    assert np.max(np.abs(k - roots)) < 1e-10 * scale
    assert k[0] <= k[1]


def test_convexity_equivalence_straddling():
    rng = np.random.default_rng(6)
    for _ in range(2000):
        u = rng.uniform(0.2, 3.0)
        du = rng.uniform(-2, 2, 2)
        Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        lam = np.array([rng.uniform(-1e-3, 1e-3), rng.uniform(0.1, 2)])
        d2u = Q @ np.diag(lam) @ Q.T - u * np.eye(2)
        margin = np.linalg.eigvalsh(u * np.eye(2) + d2u)[0]
        k = principal_curvatures(curvature_matrix_u(PointStateU(np.array(u), du, d2u)))
        if abs(margin) > 1e-12:
            assert (margin > 0) == (k[0] > 0)


# snapshots


def test_snapshot_unit_sphere():
    g = ball(33)
    s = snapshot(g, np.zeros(g.size))
    assert np.max(np.abs(np.linalg.norm(s.X, axis=1) - 1)) < 1e-15
    assert np.max(np.abs(s.kappa - 1)) < 1e-12
    assert np.max(np.abs(s.beta - 1)) < 1e-15
    assert np.max(np.abs(s.metric - np.eye(2))) < 1e-12


def test_snapshot_small_sphere():
    g = ball(33)
    s = snapshot(g, np.full(g.size, np.log(2.0)))
    assert np.max(np.abs(s.kappa - 2)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(s.X, axis=1) - 0.5)) < 1e-15


def _manufactured(g):
    x = g.points
    return 0.15 * np.sin(1.3 * x[:, 0] + 0.4) + 0.1 * x[:, 1] * x[:, 2] - 0.05 * x[:, 0] ** 2


def test_snapshot_identities_on_manufactured_field():
    g = ball(33)
    s = snapshot(g, _manufactured(g))
    rho = np.linalg.norm(s.X, axis=1)
    # beta = -<nu, X>/|X| = u/w
    assert np.max(np.abs(-np.sum(s.normal * s.X, axis=1) / rho - s.beta)) < 1e-12
    assert np.max(np.abs(s.u / np.sqrt(s.u ** 2 + np.sum(s.du ** 2, axis=1)) - s.beta)) < 1e-13
    assert np.max(np.abs(np.linalg.norm(s.normal, axis=1) - 1)) < 1e-13
    assert np.all(np.sum(s.normal * s.X, axis=1) < 0)
    assert np.all((s.beta > 0) & (s.beta <= 1))
    # kappa are exactly the eigenvalues of a, a symmetric, g positive definite
    assert np.array_equal(s.a, np.swapaxes(s.a, 1, 2))
    assert np.max(np.abs(np.linalg.eigvalsh(s.a) - s.kappa)) < 1e-13
    assert np.all(np.linalg.eigvalsh(s.metric) > 0)
    # tangent frame is orthonormal and normal to nu
    T = s.tangent_frame
    assert np.max(np.abs(np.einsum("nik,njk->nij", T, T) - np.eye(2))) < 1e-12
    assert np.max(np.abs(np.einsum("nik,nk->ni", T, s.normal))) < 1e-12
    # the metric in the frame is the Gram matrix of tau_i = -(du_i/u^2) x + e_i/u
    tau = -(s.du / s.u[:, None] ** 2)[:, :, None] * g.points[:, None, :] + g.frame / s.u[:, None, None]
    assert np.max(np.abs(np.einsum("nik,njk->nij", tau, tau) - s.metric)) < 1e-12
    # second form / metric shape operator eigenvalues are the curvatures
    k2 = np.sort(np.linalg.eigvals(np.linalg.solve(s.metric, s.second_form)).real, axis=1)
    assert np.max(np.abs(k2 - s.kappa)) < 1e-10


def test_beta_equals_one_iff_flat_gradient():
    g = ball(17)
    s = snapshot(g, _manufactured(g))
    flat = np.linalg.norm(s.du, axis=1) == 0
    assert np.all((s.beta == 1) == flat)
    s0 = snapshot(g, np.full(g.size, 0.3))
    assert np.all(s0.beta == 1)


def test_snapshot_reports_negative_margin():
    g = ball(17)
    r = g.geodesic_distance_from_center()
    v = -1.5 * r ** 2  # strongly non-convex
    s = snapshot(g, v)
    assert s.convexity_v.min() < 0 and s.convexity.min() < 0


def test_snapshot_errors():
    g = ball(17)
    v = np.zeros(g.size)
    v[3] = np.inf
    with pytest.raises(InvalidField):
        snapshot(g, v)
    v = np.zeros(g.size)
    v[40] = 800.0  # u = e^800 overflows
    with pytest.raises(InvalidState) as err:
        snapshot(g, v)
    assert err.value.node is not None

"""Symmetric curvature functions f on the positive cone and their matrix lifts.

Two families are provided:

* ``sigma_k_root``: f = sigma_k^{1/k}, 1 <= k <= n
* ``quotient_root``: f = (sigma_n / sigma_k)^{1/(n-k)}, 1 <= k < n

sigma_k is the unnormalized elementary symmetric polynomial, so
f(1, ..., 1) = C(n, k)^{1/k} for ``sigma_k_root``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutsideCone

KINDS = ("sigma_k_root", "quotient_root")


def elementary_symmetric(lam, upto):
    """sigma_0, ..., sigma_upto of the last axis of ``lam``; shape (..., upto + 1)."""
    lam = np.asarray(lam, dtype=float)
    e = np.zeros(lam.shape[:-1] + (upto + 1,))
    e[..., 0] = 1.0
    for i in range(lam.shape[-1]):
        li = lam[..., i]
        for j in range(min(i + 1, upto), 0, -1):
            e[..., j] = e[..., j] + li * e[..., j - 1]
    return e


def _sigma_minus_one(lam, sig, k):
    """sigma_{k-1}(lam | i) for every i: sigma_{k-1} of lam with entry i deleted."""
    n = lam.shape[-1]
    out = np.empty_like(lam)
    for i in range(n):
        rest = np.delete(lam, i, axis=-1)
        out[..., i] = elementary_symmetric(rest, k - 1)[..., k - 1]
    return out


def _matrix_sigma_derivative(A, sig, k):
    """d sigma_k / dA = sum_{m<k} (-1)^m sigma_{k-1-m} A^m (valid with repeated eigenvalues)."""
    n = A.shape[-1]
    out = np.zeros_like(A)
    power = np.broadcast_to(np.eye(n), A.shape).copy()
    for m in range(k):
        out = out + ((-1) ** m) * sig[..., k - 1 - m][..., None, None] * power
        power = power @ A
    return out


@dataclass(frozen=True)
class CurvatureFunction:
    kind: str
    n: int
    k: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown curvature function {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "sigma_k_root" and not 1 <= self.k <= self.n:
            raise ValueError(f"sigma_k_root needs 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.kind == "quotient_root" and not 1 <= self.k < self.n:
            raise ValueError(f"quotient_root needs 1 <= k < n, got k={self.k}, n={self.n}")

    @property
    def name(self):
        return f"{self.kind}(n={self.n}, k={self.k})"

    def _check(self, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} components, got {lam.shape[-1]}")
        if not np.all(lam > 0):
            raise OutsideCone(f"{self.name}: argument outside the positive cone")
        return lam

    def value(self, lam):
        lam = self._check(lam)
        sig = elementary_symmetric(lam, self.n)
        if self.kind == "sigma_k_root":
            return sig[..., self.k] ** (1.0 / self.k)
        return (sig[..., self.n] / sig[..., self.k]) ** (1.0 / (self.n - self.k))

    def gradient(self, lam):
        lam = self._check(lam)
        sig = elementary_symmetric(lam, self.n)
        k, n = self.k, self.n
        if self.kind == "sigma_k_root":
            fk = sig[..., k] ** (1.0 / k)
            return (fk / (k * sig[..., k]))[..., None] * _sigma_minus_one(lam, sig, k)
        f = (sig[..., n] / sig[..., k]) ** (1.0 / (n - k))
        dn = _sigma_minus_one(lam, sig, n) / sig[..., n][..., None]
        dk = _sigma_minus_one(lam, sig, k) / sig[..., k][..., None]
        return (f / (n - k))[..., None] * (dn - dk)

    def matrix_value_and_derivative(self, A, eigenvalues=None):
        """F(A) = f(lambda(A)) and F^{ij} = dF/dA_ij for symmetric positive definite A."""
        A = np.asarray(A, dtype=float)
        if eigenvalues is None:
            from .geometry import principal_curvatures

            eigenvalues = principal_curvatures(A)
        lam = self._check(eigenvalues)
        sig = elementary_symmetric(lam, self.n)
        k, n = self.k, self.n
        if self.kind == "sigma_k_root":
            F = sig[..., k] ** (1.0 / k)
            dF = (F / (k * sig[..., k]))[..., None, None] * _matrix_sigma_derivative(A, sig, k)
        else:
            F = (sig[..., n] / sig[..., k]) ** (1.0 / (n - k))
            dn = _matrix_sigma_derivative(A, sig, n) / sig[..., n][..., None, None]
            dk = _matrix_sigma_derivative(A, sig, k) / sig[..., k][..., None, None]
            dF = (F / (n - k))[..., None, None] * (dn - dk)
        dF = 0.5 * (dF + np.swapaxes(dF, -1, -2))
        return F, dF


def value(f, lam):
    return f.value(lam)


def gradient(f, lam):
    return f.gradient(lam)


def matrix_value_and_derivative(f, A):
    return f.matrix_value_and_derivative(A)


@dataclass
class ProbeReport:
    monotone: bool
    concave: bool
    zero_boundary: bool
    growth_0_8: bool
    euler_min: float
    euler_max_violation: float
    homogeneity_max_violation: float
    symmetry_max_violation: float
    concavity_min_gap: float
    growth_min_ratio: float
    boundary_trace: list

    @property
    def required_pass(self):
        """Monotonicity, concavity, vanishing on the cone boundary and growth."""
        return self.monotone and self.concave and self.zero_boundary and self.growth_0_8 and self.euler_min > 0

    @property
    def existence_pass(self):
        """Conditions whose failure makes the continuation driver refuse the function."""
        return self.monotone and self.concave and self.growth_0_8 and self.euler_min > 0

    def as_dict(self):
        d = dict(self.__dict__)
        d["required_pass"] = self.required_pass
        return d


def probe_structure_conditions(f, m=400, seed=0, growth_limit=1e6):
    """Sample the positive cone and test monotonicity, concavity, vanishing on
    the boundary of the cone, unbounded growth in one direction and the
    Euler sum. Numbers only; nothing is proved."""
    if m < 100:
        raise ValueError("probe needs at least 100 samples")
    rng = np.random.default_rng(seed)
    n = f.n
    lam = 10.0 ** rng.uniform(-2, 2, size=(m, n))
    mu = 10.0 ** rng.uniform(-2, 2, size=(m, n))
    fl = f.value(lam)
    grad = f.gradient(lam)

    monotone = bool(np.all(grad > 0))
    gap = f.value(0.5 * (lam + mu)) - 0.5 * (fl + f.value(mu))
    concave = bool(np.all(gap >= -1e-12))

    euler = np.sum(grad * lam, axis=-1)
    euler_violation = float(np.max(np.abs(euler - fl) / fl))
    hom = max(float(np.max(np.abs(f.value(t * lam) - t * fl) / (t * fl))) for t in (0.5, 2.0, 10.0))
    perm = lam[:, rng.permutation(n)]
    sym = float(np.max(np.abs(f.value(perm) - fl) / fl))

    # zero on the boundary: drive the smallest entry towards 0, starting
    # from samples rescaled onto the level set f = f(1, ..., 1)
    ref = f.value(np.ones(n))
    base = lam * (ref / fl)[:, None]
    imin = np.argmin(base, axis=1)
    trace = []
    for j in range(1, 13):
        probe = base.copy()
        probe[np.arange(m), imin] = 10.0 ** (-j)
        trace.append(float(np.max(f.value(probe))))
    decreasing = all(b <= a * (1 + 1e-12) for a, b in zip(trace, trace[1:]))
    zero_boundary = bool(decreasing and trace[-1] < 1e-3 * ref)

    # growth in the last component
    ratios = np.zeros(m)
    for R in 10.0 ** np.arange(0, int(np.log10(growth_limit)) + 1):
        bumped = lam.copy()
        bumped[:, -1] += R
        ratios = np.maximum(ratios, f.value(bumped) / fl)
    growth = bool(np.all(ratios > 10.0))

    return ProbeReport(
        monotone=monotone,
        concave=concave,
        zero_boundary=zero_boundary,
        growth_0_8=growth,
        euler_min=float(np.min(euler)),
        euler_max_violation=euler_violation,
        homogeneity_max_violation=hom,
        symmetry_max_violation=sym,
        concavity_min_gap=float(np.min(gap)),
        growth_min_ratio=float(np.min(ratios)),
        boundary_trace=trace,
    )


def parse_curvature_spec(spec, n=None):
    """Build a :class:`CurvatureFunction` from a dict or a ``kind:n=2,k=1`` string."""
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            params[key.strip()] = int(val)
        spec = {"kind": kind.strip(), **params}
    spec = dict(spec)
    kind = spec.pop("kind")
    nn = spec.pop("n", n)
    if nn is None:
        raise ValueError("curvature spec needs a dimension n")
    if n is not None and nn != n:
        raise ValueError(f"curvature function dimension {nn} does not match domain dimension {n}")
    k = spec.pop("k", 1 if kind == "quotient_root" else nn)
    if spec:
        raise ValueError(f"unknown curvature keys: {sorted(spec)}")
    return CurvatureFunction(kind, int(nn), int(k))

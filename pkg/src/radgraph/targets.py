"""Built-in catalog of positive prescribed-curvature functions psi(X) on R^{n+1}."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PSI_KINDS = ("constant", "radial_power", "affine")


@dataclass(frozen=True)
class Psi:
    """psi(X) for X in R^{n+1}.

    ``constant``: c. ``radial_power``: c * |X|^alpha. ``affine``:
    max(c0 + <coef, X>, floor).
    """

    kind: str
    c: float = 1.0
    alpha: float = 0.0
    coef: tuple = field(default_factory=tuple)
    floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in PSI_KINDS:
            raise ValueError(f"unknown psi kind {self.kind!r}")
        if self.kind != "affine" and not self.c > 0:
            raise ValueError("psi constant must be positive")
        if self.kind == "affine" and not self.floor > 0:
            raise ValueError("affine psi floor must be positive")

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "constant":
            return np.full(X.shape[:-1], self.c)
        if self.kind == "radial_power":
            return self.c * np.linalg.norm(X, axis=-1) ** self.alpha
        return np.maximum(self.c + X @ np.asarray(self.coef, dtype=float), self.floor)

    def gradient(self, X):
        """d psi / dX, shape (..., n+1)."""
        X = np.asarray(X, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(X)
        if self.kind == "radial_power":
            r2 = np.sum(X * X, axis=-1)
            return (self.alpha * self.c * r2 ** (0.5 * self.alpha - 1.0))[..., None] * X
        coef = np.asarray(self.coef, dtype=float)
        active = (self.c + X @ coef) > self.floor
        return np.where(active[..., None], coef, 0.0)

    def sup_on_shell(self, directions, K, samples=65):
        """Sampled sup of psi over {t x : x in directions, 1/K <= t <= K}."""
        radii = np.geomspace(1.0 / K, K, samples)
        return float(max(np.max(self(t * directions)) for t in radii))

    def as_dict(self):
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["c"] = self.c
        elif self.kind == "radial_power":
            d.update(c=self.c, alpha=self.alpha)
        else:
            d.update(c0=self.c, coef=list(self.coef), floor=self.floor)
        return d


def parse_psi(spec):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "constant":
        out = Psi("constant", c=float(spec.pop("c")))
    elif kind == "radial_power":
        out = Psi("radial_power", c=float(spec.pop("c")), alpha=float(spec.pop("alpha")))
    elif kind == "affine":
        out = Psi(
            "affine",
            c=float(spec.pop("c0")),
            coef=tuple(float(x) for x in spec.pop("coef")),
            floor=float(spec.pop("floor", 1e-6)),
        )
    else:
        raise ValueError(f"unknown psi kind {kind!r}")
    if spec:
        raise ValueError(f"unknown psi keys: {sorted(spec)}")
    return out

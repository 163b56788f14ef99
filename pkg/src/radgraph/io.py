"""Run configuration and file formats: JSON configs and reports, CSV fields, OBJ meshes."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .chart import DomainSpec, build_domain
from .curvature import parse_curvature_spec
from .errors import ConfigError, InvalidField
from .solver import NewtonSettings
from .targets import parse_psi

NEWTON_KEYS = {f.name for f in fields(NewtonSettings)}


@dataclass
class RunConfig:
    domain: dict
    psi: dict
    curvature: object = "sigma_k_root"
    dimension: int = 2
    chart: str = "geodesic_polar"
    resolution: int = 33
    boundary_rho: float = 1.0
    subsolution: dict = field(default_factory=lambda: {"kind": "cap", "multiplier": 2.0})
    newton: dict = field(default_factory=dict)
    override_structure_check: bool = False
    output: str = "radgraph_out"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        for key in ("domain", "psi"):
            if key not in data:
                raise ConfigError(f"config is missing {key!r}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        try:
            DomainSpec(**self.domain)
        except TypeError as exc:
            raise ConfigError(f"bad domain spec: {exc}") from exc
        bad = sorted(set(self.newton) - NEWTON_KEYS)
        if bad:
            raise ConfigError(f"unknown newton keys: {bad}")
        sub = dict(self.subsolution)
        kind = sub.pop("kind", None)
        if kind == "cap":
            extra = set(sub) - {"multiplier"}
        elif kind == "file":
            extra = set(sub) - {"path"}
            if "path" not in sub:
                raise ConfigError("file subsolution needs a 'path'")
        else:
            raise ConfigError(f"unknown subsolution kind {kind!r}")
        if extra:
            raise ConfigError(f"unknown subsolution keys: {sorted(extra)}")
        if not (isinstance(self.boundary_rho, (int, float)) and self.boundary_rho > 0):
            raise ConfigError("boundary_rho must be a positive number")
        try:
            self.curvature_function()
            self.psi_function()
            self.newton_settings()
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def curvature_function(self):
        return parse_curvature_spec(self.curvature, self.dimension)

    def psi_function(self):
        return parse_psi(self.psi)

    def newton_settings(self, tol=None):
        opts = dict(self.newton)
        if tol is not None:
            opts["tol"] = tol
        return NewtonSettings(**opts)

    def build_grid(self, resolution=None):
        res = self.resolution if resolution is None else resolution
        return build_domain(DomainSpec(**self.domain), res, dimension=self.dimension, chart=self.chart)

    def as_dict(self):
        return asdict(self)


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(data)


# JSON with 17 significant digits
def _encode(obj):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps17(obj):
    return _encode(obj)


def write_json(path, obj):
    Path(path).write_text(dumps17(obj) + "\n")


def solution_columns(n):
    return (
        ["node"] + [f"xi_{a + 1}" for a in range(n)] + ["v", "u", "rho"]
        + [f"kappa_{i + 1}" for i in range(n)] + ["beta", "residual"]
    )


def write_solution_csv(path, grid, snap, residual):
    n = grid.n
    with open(path, "w", newline="") as fh:
        fh.write(f"# grid_hash={grid.hash()}\n")
        w = csv.writer(fh)
        w.writerow(solution_columns(n))
        for i in range(grid.size):
            row = [i] + list(grid.coords[i]) + [snap.v[i], snap.u[i], snap.rho[i]]
            row += list(snap.kappa[i]) + [snap.beta[i], residual[i]]
            w.writerow([row[0]] + [format(float(x), ".17g") for x in row[1:]])


def read_solution_csv(path):
    """Returns (grid hash, dict column -> array)."""
    try:
        with open(path, newline="") as fh:
            first = fh.readline().strip()
            if not first.startswith("# grid_hash="):
                raise InvalidField(f"{path}: missing grid hash line")
            ghash = first.split("=", 1)[1]
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidField(f"cannot read {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(x) for x in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InvalidField(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidField(f"{path}: ragged rows")
    return ghash, {name: data[:, j] for j, name in enumerate(header)}


def read_field_for_grid(path, grid, column="v"):
    ghash, cols = read_solution_csv(path)
    if ghash != grid.hash():
        raise InvalidField(f"{path} was written on a different grid")
    order = np.argsort(cols["node"])
    return grid.check(cols[column][order], column)


def mesh_faces(grid):
    """Triangles (0-based node indices) for polar grids, segments for n = 1."""
    if grid.n == 1:
        return np.column_stack([np.arange(grid.size - 1), np.arange(1, grid.size)])
    M = grid.azimuth
    ball = grid.domain.kind == "ball"
    off = 1 if ball else 0
    rings = grid.levels - 1 if ball else grid.levels

    def node(r, k):
        return off + r * M + k % M

    tris = []
    if ball:
        tris += [(0, node(0, k), node(0, k + 1)) for k in range(M)]
    for r in range(rings - 1):
        for k in range(M):
            a, b = node(r, k), node(r, k + 1)
            c, d = node(r + 1, k), node(r + 1, k + 1)
            tris += [(a, c, d), (a, d, b)]
    return np.array(tris, dtype=int)


def write_obj(path, grid, X):
    faces = mesh_faces(grid)
    with open(path, "w") as fh:
        fh.write(f"# radial graph, {grid.size} vertices\n")
        for p in X:
            p = list(p) + [0.0] * (3 - len(p))
            fh.write("v " + " ".join(format(float(c), ".17g") for c in p) + "\n")
        tag = "l" if grid.n == 1 else "f"
        for face in faces:
            fh.write(tag + " " + " ".join(str(i + 1) for i in face) + "\n")

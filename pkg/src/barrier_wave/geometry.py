"""Null coordinates, diamonds, null lattices and discrete null derivatives.

Conventions: ``u = t + x`` and ``v = t - x``.  A diamond is the closed
null rectangle ``u0 - r <= u <= u0``, ``v0 - r <= v <= v0``.  Lattice node
``(i, j)`` sits at ``(u0 - r + i*h, v0 - r + j*h)`` with ``h = r/(n-1)``;
arrays are indexed ``[i, j]`` (u first).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import LatticeError

CSV_FMT = "%.17g"


@dataclass(frozen=True)
class NullPoint:
    u: float
    v: float


@dataclass(frozen=True)
class CartesianPoint:
    t: float
    x: float


def to_null(p: CartesianPoint) -> NullPoint:
    """Map ``(t, x)`` to ``(u, v) = (t + x, t - x)``."""
    return NullPoint(p.t + p.x, p.t - p.x)


def to_cartesian(p: NullPoint) -> CartesianPoint:
    """Map ``(u, v)`` to ``(t, x) = ((u + v)/2, (u - v)/2)``."""
    return CartesianPoint(0.5 * (p.u + p.v), 0.5 * (p.u - p.v))


@dataclass(frozen=True)
class Diamond:
    """Closed null rectangle with upper corner ``(u0, v0)`` and side ``r``."""

    u0: float
    v0: float
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise LatticeError(f"diamond side must be positive, got r={self.r}")
        if not (math.isfinite(self.u0) and math.isfinite(self.v0)):
            raise LatticeError("diamond corner must be finite")

    @property
    def u_lo(self) -> float:
        return self.u0 - self.r

    @property
    def v_lo(self) -> float:
        return self.v0 - self.r

    @property
    def t_range(self) -> tuple[float, float]:
        return 0.5 * (self.u_lo + self.v_lo), 0.5 * (self.u0 + self.v0)

    @property
    def x_range(self) -> tuple[float, float]:
        return 0.5 * (self.u_lo - self.v0), 0.5 * (self.u0 - self.v_lo)

    def contains(self, p: NullPoint, tol: float = 1e-12) -> bool:
        return (self.u_lo - tol <= p.u <= self.u0 + tol
                and self.v_lo - tol <= p.v <= self.v0 + tol)

    def cross_section(self, t: float) -> tuple[float, float]:
        """x-interval of the diamond at time ``t`` (empty if lo > hi)."""
        lo = max(self.u_lo - t, t - self.v0)
        hi = min(self.u0 - t, t - self.v_lo)
        return lo, hi

    def dependence_interval(self, forward_only: bool = False) -> tuple[float, float]:
        """x-interval at t=0 that determines the field on the diamond.

        For nodes with t >= 0 this is ``[-v0, u0]``; nodes with t < 0 need
        ``[u_lo, -v_lo]``.
        """
        lo, hi = -self.v0, self.u0
        if not forward_only and self.t_range[0] < 0:
            lo, hi = min(lo, self.u_lo), max(hi, -self.v_lo)
        return lo, hi


@dataclass(frozen=True)
class NullLattice:
    diamond: Diamond
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise LatticeError(f"lattice needs n >= 2 samples per side, got {self.n}")

    @property
    def h(self) -> float:
        return self.diamond.r / (self.n - 1)

    @property
    def u(self) -> np.ndarray:
        d = self.diamond
        return d.u_lo + self.h * np.arange(self.n)

    @property
    def v(self) -> np.ndarray:
        d = self.diamond
        return d.v_lo + self.h * np.arange(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(U, V)`` arrays indexed ``[i, j]``."""
        return np.meshgrid(self.u, self.v, indexing="ij")

    def cartesian_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        U, V = self.mesh()
        return 0.5 * (U + V), 0.5 * (U - V)

    def forward_mask(self) -> np.ndarray:
        """Boolean mask of nodes with t >= 0 (the upper triangle part)."""
        U, V = self.mesh()
        return (U + V) >= -1e-12 * max(1.0, self.diamond.r)

    def to_dict(self) -> dict:
        d = self.diamond
        return {"u0": d.u0, "v0": d.v0, "r": d.r, "n": int(self.n)}

    @classmethod
    def from_dict(cls, d: dict) -> "NullLattice":
        return cls(Diamond(float(d["u0"]), float(d["v0"]), float(d["r"])), int(d["n"]))


@dataclass(frozen=True)
class Field2D:
    """Scalar samples on a null lattice.

    ``mask`` (optional) marks valid nodes; invalid nodes hold NaN.  This is
    how triangle (t >= 0) regions are represented.
    """

    lattice: NullLattice
    values: np.ndarray
    mask: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        n = self.lattice.n
        if vals.shape != (n, n):
            raise LatticeError(f"values shape {vals.shape} does not match lattice n={n}")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != (n, n):
                raise LatticeError("mask shape does not match lattice")
            vals = np.where(m, vals, np.nan)
            if not np.all(np.isfinite(vals[m])):
                raise LatticeError("field values must be finite on valid nodes")
            m.flags.writeable = False
            object.__setattr__(self, "mask", m)
        elif not np.all(np.isfinite(vals)):
            raise LatticeError("field values must be finite")
        if vals is self.values:
            vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.values.shape, dtype=bool)
        return self.mask

    def with_values(self, values: np.ndarray) -> "Field2D":
        return Field2D(self.lattice, values, self.mask)

    def interpolate_null(self, u, v) -> np.ndarray:
        """Bilinear interpolation at null coordinates (arrays broadcast)."""
        lat = self.lattice
        d = lat.diamond
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        tol = 1e-9 * max(1.0, d.r)
        if np.any(u < d.u_lo - tol) or np.any(u > d.u0 + tol) \
                or np.any(v < d.v_lo - tol) or np.any(v > d.v0 + tol):
            raise LatticeError("interpolation point outside the lattice diamond")
        a = np.clip((u - d.u_lo) / lat.h, 0.0, lat.n - 1)
        b = np.clip((v - d.v_lo) / lat.h, 0.0, lat.n - 1)
        i = np.minimum(np.floor(a).astype(int), lat.n - 2)
        j = np.minimum(np.floor(b).astype(int), lat.n - 2)
        fa, fb = a - i, b - j
        f = self.values
        return ((1 - fa) * (1 - fb) * f[i, j] + fa * (1 - fb) * f[i + 1, j]
                + (1 - fa) * fb * f[i, j + 1] + fa * fb * f[i + 1, j + 1])

    def interpolate(self, t, x) -> np.ndarray:
        """Bilinear (in u, v) interpolation at Cartesian points."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.interpolate_null(t + x, t - x)

    # serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        vals = [[None if not math.isfinite(x) else float(x) for x in row]
                for row in self.values.tolist()]
        return {"lattice": self.lattice.to_dict(), "values": vals}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Field2D":
        lat = NullLattice.from_dict(d["lattice"])
        raw = d["values"]
        vals = np.array([[np.nan if x is None else x for x in row] for row in raw], dtype=float)
        mask = np.isfinite(vals)
        return cls(lat, vals, None if mask.all() else mask)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Field2D":
        return cls.from_json_dict(json.loads(text))

    def write_csv(self, path) -> None:
        U, V = self.lattice.mesh()
        data = np.column_stack([U.ravel(), V.ravel(), self.values.ravel()])
        np.savetxt(path, data, fmt=CSV_FMT, delimiter=",", header="u,v,value", comments="")

    @classmethod
    def read_csv(cls, path) -> "Field2D":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 3:
            raise LatticeError("field CSV must have columns u,v,value")
        n = int(round(math.sqrt(data.shape[0])))
        if n * n != data.shape[0] or n < 2:
            raise LatticeError(f"field CSV has {data.shape[0]} rows, not a square lattice")
        u, v = data[:, 0], data[:, 1]
        r = float(u.max() - u.min())
        lat = NullLattice(Diamond(float(u.max()), float(v.max()), r), n)
        vals = data[:, 2].reshape(n, n)
        mask = np.isfinite(vals)
        return cls(lat, vals, None if mask.all() else mask)


def sample_function(lattice: NullLattice, func, mask: Optional[np.ndarray] = None) -> Field2D:
    """Evaluate ``func(U, V)`` (vectorized) on the lattice nodes."""
    U, V = lattice.mesh()
    vals = np.asarray(func(U, V), dtype=float) * np.ones_like(U)
    return Field2D(lattice, vals, mask)


def _first_diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(f, h, axis=axis, edge_order=2)


def _second_diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    g = np.moveaxis(f, axis, 0)
    out = np.empty_like(g)
    out[1:-1] = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / h**2
    out[0] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / h**2
    out[-1] = (2.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def null_derivatives(f: Field2D) -> tuple[Field2D, Field2D]:
    """Return ``(phi_u, phi_v)``.

    Centered differences inside, one-sided second-order stencils on edges.
    Nodes next to masked-out nodes come back NaN and are masked.
    """
    if f.lattice.n < 3:
        raise LatticeError("null_derivatives needs n >= 3")
    h = f.lattice.h
    du = _first_diff(f.values, h, 0)
    dv = _first_diff(f.values, h, 1)
    return _masked_field(f.lattice, du), _masked_field(f.lattice, dv)


def second_null_derivatives(f: Field2D) -> tuple[Field2D, Field2D]:
    """Return ``(phi_uu, phi_vv)`` with second-order stencils throughout."""
    if f.lattice.n < 4:
        raise LatticeError("second_null_derivatives needs n >= 4")
    h = f.lattice.h
    duu = _second_diff(f.values, h, 0)
    dvv = _second_diff(f.values, h, 1)
    return _masked_field(f.lattice, duu), _masked_field(f.lattice, dvv)


def _masked_field(lattice: NullLattice, vals: np.ndarray) -> Field2D:
    ok = np.isfinite(vals)
    return Field2D(lattice, vals, None if ok.all() else ok)

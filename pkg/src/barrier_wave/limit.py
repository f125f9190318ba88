"""Barrier-reflected limit field on a null lattice.

The limit is built by integrating every ``v``-column in ``u``.  Away from
the barriers each step adds the free ``u``-increment.  When the value would
leave ``[-1, 1]`` it is mirrored back and the sign of the ``u``-increment
flips for the rest of the row; the defect measure is then read off the
cell masses of the constructed field.

Also here: the closed-form reference solution for the quadratic example
data, defect extraction from any sampled field, the arc density of the
defect measure and a checker for the properties every limit must have.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from ._backend import kernels
from .errors import (CoarseLatticeError, DefectStraddleError, DomainViolation,
                     NondegeneracyError)
from .geometry import CSV_FMT, CartesianPoint, Diamond, Field2D, NullLattice, null_derivatives
from .linear import InitialData, check_nondegeneracy, dalembert_grid, lin_u, lin_v

SQRT2 = math.sqrt(2.0)
EXAMPLE_DIAMOND = Diamond(10.0, 10.0, 20.0)
MAX_ZERO_COMPONENTS = 256
OVERSHOOT_FACTOR = 10.0


# closed-form reference ------------------------------------------------------

def _example_values(u, v, delta):
    """Values and region tags (1..5) of the example limit at null points."""
    a = np.asarray(u, dtype=float) - 2.0
    b = np.asarray(v, dtype=float) - 2.0
    r2 = 0.5 * (a * a + b * b)
    reg = np.ones(np.broadcast(a, b).shape, dtype=np.int8)
    reg = np.where((a <= 0) & (b <= 0) & (a * a + b * b < 2.0), 2, reg)
    reg = np.where((a >= -SQRT2) & (a <= 0) & (b > 0), 3, reg)
    reg = np.where((b >= -SQRT2) & (b <= 0) & (a > 0), 4, reg)
    reg = np.where((a > 0) & (b > 0), 5, reg)
    val = np.select(
        [reg == 1, reg == 2, reg == 3, reg == 4],
        [1.0 - delta * (r2 - 1.0), 1.0 + delta * (r2 - 1.0),
         1.0 + delta * (0.5 * (a * a - b * b) - 1.0),
         1.0 + delta * (0.5 * (b * b - a * a) - 1.0)],
        1.0 - delta * (r2 + 1.0))
    return val, reg


REGION_NAMES = {1: "I", 2: "II", 3: "III", 4: "IV", 5: "V"}


def _check_delta(delta: float) -> None:
    if not 0 < delta <= 1e-3:
        raise DomainViolation(f"delta must lie in (0, 1e-3], got {delta}")


def example_oracle(p: CartesianPoint, delta: float = 1e-3) -> tuple[float, str]:
    """Exact limit for ``phi0 = 1 - delta(3 + x^2)``, ``phi1 = 4 delta``.

    Valid on the forward half ``t >= 0`` of the diamond ``|t +- x| <= 10``.
    """
    _check_delta(delta)
    tol = 1e-12
    if p.t < -tol or abs(p.t - p.x) > 10 + tol or abs(p.t + p.x) > 10 + tol:
        raise DomainViolation(f"point (t={p.t}, x={p.x}) is outside the example region")
    val, reg = _example_values(p.t + p.x, p.t - p.x, delta)
    return float(val), REGION_NAMES[int(reg)]


def example_oracle_field(lattice: NullLattice, delta: float = 1e-3,
                         extended: bool = False) -> tuple[Field2D, np.ndarray]:
    """Oracle on a lattice inside the example region.

    Nodes with ``t < 0`` are masked out unless ``extended``; below ``t = 0``
    the limit stays under the barrier, so it is the free solution there.
    Returns the field and an int8 array of region numbers (0 where masked).
    """
    _check_delta(delta)
    d = lattice.diamond
    tol = 1e-9
    if d.u0 > 10 + tol or d.v0 > 10 + tol or (not extended and (d.u_lo < -10 - tol or d.v_lo < -10 - tol)):
        raise DomainViolation("lattice diamond leaves the example region")
    U, V = lattice.mesh()
    val, reg = _example_values(U, V, delta)
    fwd = lattice.forward_mask()
    if extended:
        return Field2D(lattice, val), reg
    return Field2D(lattice, val, None if fwd.all() else fwd), np.where(fwd, reg, 0).astype(np.int8)


def example_arc(n: int = 20001) -> tuple[np.ndarray, np.ndarray]:
    """``(t, x)`` samples of the reflection arc, from ``u = 2 - sqrt 2`` to ``v = 2 - sqrt 2``."""
    th = np.linspace(0.0, 0.5 * math.pi, n)
    a = -SQRT2 * np.cos(th)
    b = -SQRT2 * np.sin(th)
    u, v = a + 2.0, b + 2.0
    return 0.5 * (u + v), 0.5 * (u - v)


# arc density ----------------------------------------------------------------

def arc_density_terms(data: InitialData, arc_point: CartesianPoint,
                      arc_slope: float) -> tuple[float, float]:
    """``(|phi_lin_u|, |phi_lin_v| |dv/du|)`` at a point of a spacelike arc.

    Their sum is the defect mass per unit ``u`` along the arc.
    """
    if not (math.isfinite(arc_slope) and arc_slope < 0):
        raise DomainViolation(f"arc slope dv/du={arc_slope} is not spacelike (need dv/du < 0)")
    u = arc_point.t + arc_point.x
    v = arc_point.t - arc_point.x
    fu = abs(float(lin_u(data, u)))
    gv = abs(float(lin_v(data, v)))
    return fu, gv * abs(arc_slope)


def arc_density(data: InitialData, arc_point: CartesianPoint, arc_slope: float) -> float:
    """Defect mass per unit ``u`` along a spacelike reflection arc.

    Across the arc both null derivatives flip.  A ``u``-strip of width
    ``du`` carries mass ``2|phi_u| du`` and a ``v``-strip ``2|phi_v| dv``;
    for one arc element these agree, and the density returned is their
    average ``|phi_u| + |phi_v| |dv/du|``.
    """
    a, b = arc_density_terms(data, arc_point, arc_slope)
    return a + b


def arc_mass(data: InitialData, t: np.ndarray, x: np.ndarray) -> float:
    """Line integral of :func:`arc_density` along a polyline (midpoint rule)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    u, v = t + x, t - x
    du, dv = np.diff(u), np.diff(v)
    if np.any(du * dv >= 0):
        raise DomainViolation("arc polyline has a non-spacelike segment")
    um, vm = 0.5 * (u[1:] + u[:-1]), 0.5 * (v[1:] + v[:-1])
    fu = np.abs(lin_u(data, um))
    gv = np.abs(lin_v(data, vm))
    return float(np.sum(fu * np.abs(du) + gv * np.abs(dv)))


# defect measure -------------------------------------------------------------

@dataclass(frozen=True)
class DefectMeasure:
    """Cell masses on the ``(n-1) x (n-1)`` cells (sparse CSR).

    Cell ``(i, j)`` has corners ``(i, j)`` and ``(i+1, j+1)``.  Masses are
    stored signed, so a negative entry exposes a wrong-sign defect.
    """

    lattice: NullLattice
    mu_plus: sparse.csr_matrix
    mu_minus: sparse.csr_matrix
    straddle_cells: int = 0

    @property
    def total_plus(self) -> float:
        return float(self.mu_plus.sum())

    @property
    def total_minus(self) -> float:
        return float(self.mu_minus.sum())

    @property
    def min_mass(self) -> float:
        vals = np.concatenate([self.mu_plus.data, self.mu_minus.data])
        return float(vals.min()) if vals.size else 0.0

    def write_csv(self, path) -> None:
        lat = self.lattice
        h = lat.h
        both = (abs(self.mu_plus) + abs(self.mu_minus)).tocoo()
        order = np.lexsort((both.col, both.row))
        i, j = both.row[order], both.col[order]
        mp = np.asarray(self.mu_plus[i, j]).ravel() if i.size else np.empty(0)
        mm = np.asarray(self.mu_minus[i, j]).ravel() if i.size else np.empty(0)
        data = np.column_stack([lat.diamond.u_lo + (i + 0.5) * h,
                                lat.diamond.v_lo + (j + 0.5) * h, mp, mm])
        np.savetxt(path, data.reshape(-1, 4), fmt=CSV_FMT, delimiter=",",
                   header="u_cell,v_cell,mu_plus,mu_minus", comments="")


def default_mass_floor(h: float) -> float:
    return 1e-12 * h


def cell_defects(lower: np.ndarray, upper: np.ndarray, floor: float):
    """Defect masses between two adjacent rows of lattice values.

    ``lower`` is row ``i`` and ``upper`` row ``i+1`` (values along ``v``).
    Returns ``(j, plus, minus, straddle)`` where ``j`` indexes cells and
    ``plus``/``minus`` are signed masses (zero where not assigned).
    """
    p00, p01 = lower[:-1], lower[1:]
    p10, p11 = upper[:-1], upper[1:]
    m = -(p11 - p10 - p01 + p00)
    corners = np.stack([p00, p01, p10, p11])
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(m) & (np.abs(m) > floor)
        cmax = corners.max(axis=0)
        cmin = corners.min(axis=0)
    pos = ok & (cmax > 0)
    neg = ok & (cmin < 0)
    straddle = int(np.count_nonzero(pos & neg))
    to_plus = pos & ~(neg & (m < 0))
    to_minus = neg & ~to_plus
    j = np.flatnonzero(to_plus | to_minus)
    plus = np.where(to_plus[j], m[j], 0.0)
    minus = np.where(to_minus[j], -m[j], 0.0)
    return j, plus, minus, straddle


def extract_defect(field: Field2D, mass_floor: Optional[float] = None,
                   strict: bool = False) -> DefectMeasure:
    """Cell masses ``-(phi11 - phi10 - phi01 + phi00)`` of a sampled field.

    A mass goes to ``mu_plus`` on cells reaching ``phi > 0`` and to
    ``mu_minus`` (negated) on cells reaching ``phi < 0``.  A cell touching
    both signs goes to the side matching the sign of its mass and is
    counted in ``straddle_cells``; with ``strict`` such a cell raises.
    """
    lat = field.lattice
    if lat.n < 2:
        raise ValueError("extract_defect needs n >= 2")
    floor = default_mass_floor(lat.h) if mass_floor is None else mass_floor
    f = field.values
    rows, cols, pv, mv = [], [], [], []
    straddles = 0
    for i in range(lat.n - 1):
        j, plus, minus, s = cell_defects(f[i], f[i + 1], floor)
        straddles += s
        rows.append(np.full(j.size, i))
        cols.append(j)
        pv.append(plus)
        mv.append(minus)
    if strict and straddles:
        raise DefectStraddleError(f"{straddles} cells straddle both barriers with nonzero mass")
    return _assemble_defect(lat, rows, cols, pv, mv, straddles)


def _assemble_defect(lat, rows, cols, pv, mv, straddles) -> DefectMeasure:
    shape = (lat.n - 1, lat.n - 1)
    r = np.concatenate(rows) if rows else np.empty(0, int)
    c = np.concatenate(cols) if cols else np.empty(0, int)
    p = np.concatenate(pv) if pv else np.empty(0)
    m = np.concatenate(mv) if mv else np.empty(0)
    kp, km = p != 0, m != 0
    mu_p = sparse.csr_matrix((p[kp], (r[kp], c[kp])), shape=shape)
    mu_m = sparse.csr_matrix((m[km], (r[km], c[km])), shape=shape)
    return DefectMeasure(lat, mu_p, mu_m, straddles)


# characteristic march -------------------------------------------------------

@dataclass(frozen=True)
class CharState:
    """Constructed limit with its null-derivative bookkeeping.

    ``du_mag[i]`` is ``|F(u_i) - F(u_i - h)|/h`` and ``dv_mag[j]`` the
    ``v`` analogue; reflection only changes the signs ``sig_u``/``sig_v``.
    """

    lattice: NullLattice
    phi: np.ndarray
    du_mag: np.ndarray
    dv_mag: np.ndarray
    sig_u: np.ndarray
    sig_v: np.ndarray

    def field(self) -> Field2D:
        ok = np.isfinite(self.phi)
        return Field2D(self.lattice, self.phi, None if ok.all() else ok)


@dataclass(frozen=True)
class LimitRow:
    """One ``u``-row of the constructed limit (``NaN`` where ``t < 0``).

    ``sig_u`` holds the sign of the incoming ``u``-increment at each node.
    ``ev_col``/``ev_over``/``ev_kind`` list the barrier contacts in this
    row: column, overshoot of the unreflected value, and kind (+-1 contact
    on an edge that straddles a flip line, +-2 contact that flips the row).
    """

    i: int
    phi: np.ndarray
    sig_u: np.ndarray
    ev_col: np.ndarray
    ev_over: np.ndarray
    ev_kind: np.ndarray


def _sgn(x: np.ndarray) -> np.ndarray:
    return np.sign(x).astype(np.int8)


def check_zero_components(data: InitialData, interval: tuple[float, float],
                          limit: int = MAX_ZERO_COMPONENTS) -> None:
    """Refuse data whose null derivatives have too many zero components."""
    rep = check_nondegeneracy(data, interval)
    if rep.component_count > limit:
        raise NondegeneracyError(
            f"null derivatives of the data have {rep.component_count} zero components on "
            f"[{interval[0]}, {interval[1]}] (limit {limit}); the construction is not defined")


def iter_limit_rows(data: InitialData, lattice: NullLattice,
                    check_data: bool = True) -> Iterator[LimitRow]:
    """Stream the forward (``t >= 0``) limit one lattice row at a time.

    Each ``v``-column is integrated in ``u`` from the first anti-diagonal
    with ``t >= 0`` (seeded with the free solution).  The increment over
    the ``u``-cell ``(u_{i-1}, u_i]`` is ``s_i |F(u_i) - F(u_{i-1})|``
    where the sign ``s_i`` is carried along the row and flips when the
    column value would cross a barrier; the crossing value is mirrored
    back, which places the contact inside the cell.  The march runs on a
    lattice extended to the past so that every node with ``t >= 0`` sees
    its whole domain of dependence.

    Raises
    ------
    CoarseLatticeError
        If a mirrored value still lies more than ``10 h`` outside the
        barriers.
    NondegeneracyError
        If the null derivatives of the data have more than
        ``MAX_ZERO_COMPONENTS`` zero components.
    """
    d = lattice.diamond
    n, h = lattice.n, lattice.h
    ku = max(0, int(math.ceil((d.u_lo + d.v0) / h - 1e-9)))
    kv = max(0, int(math.ceil((d.v_lo + d.u0) / h - 1e-9)))
    nu, nv = n + ku, n + kv
    uE = d.u_lo - ku * h
    vE = d.v_lo - kv * h
    if check_data:
        check_zero_components(data, (min(uE, -d.v0), max(d.u0, -vE)))
    s0 = int(math.ceil(-(uE + vE) / h - 1e-9))
    Fx, _ = data.null_potentials(uE + h * np.arange(-1, nu), np.zeros(1))
    _, G = data.null_potentials(np.zeros(1), vE + h * np.arange(nv))
    dF = np.diff(Fx)
    s_init = _sgn(dF)
    prev = np.full(nv, np.nan)
    prev_sig = np.zeros(nv, dtype=np.int8)
    ev_j = np.empty(nv, dtype=np.int64)
    ev_over = np.empty(nv)
    ev_kind = np.empty(nv, dtype=np.int8)
    limit = OVERSHOOT_FACTOR * h
    for i in range(nu):
        row = np.full(nv, np.nan)
        sig_u = np.zeros(nv, dtype=np.int8)
        su = int(s_init[i])
        j0 = s0 - i
        if 0 <= j0 < nv:
            row[j0] = Fx[i + 1] + G[j0]
            sig_u[j0] = su
        ne = 0
        j_lo = max(0, j0 + 1)
        if i >= 1 and j_lo < nv:
            ne, emax = kernels.march_row(prev, prev_sig, row, sig_u, su, float(abs(dF[i])),
                                         j_lo, ev_j, ev_over, ev_kind)
            if emax > limit:
                raise CoarseLatticeError(
                    f"mirrored value lies {emax:.3e} outside the barrier (limit {limit:.3e}); "
                    "refine the lattice")
        if i >= ku:
            cols = ev_j[:ne] - kv
            keep = cols >= 0
            yield LimitRow(i - ku, row[kv:].copy(), sig_u[kv:].copy(), cols[keep].copy(),
                           ev_over[:ne][keep].copy(), ev_kind[:ne][keep].copy())
        prev, prev_sig = row, sig_u


def _forward(data, lattice, check_data):
    n = lattice.n
    phi = np.full((n, n), np.nan)
    su = np.zeros((n, n), dtype=np.int8)
    for r in iter_limit_rows(data, lattice, check_data):
        phi[r.i], su[r.i] = r.phi, r.sig_u
    return phi, su


def _v_signs(phi: np.ndarray, dv_mag: np.ndarray) -> np.ndarray:
    """Signs of the incoming ``v``-increments (first column: from the data)."""
    sv = np.zeros(phi.shape, dtype=np.int8)
    with np.errstate(invalid="ignore"):
        sv[:, 1:] = np.nan_to_num(np.sign(np.diff(phi, axis=1))).astype(np.int8)
    sv[:, dv_mag == 0] = 0
    return sv


def construct_limit(data: InitialData, lattice: NullLattice, forward_only: bool = False,
                    check_data: bool = True) -> tuple[CharState, DefectMeasure]:
    """Limit field and defect measure on the whole lattice.

    Nodes with ``t < 0`` come from the forward march of the time-reversed
    data on the reflected lattice, unless ``forward_only`` (then ``NaN``).
    The defect measure is the cell-mass extraction of the constructed
    field.  See :func:`iter_limit_rows` for the marching rule and errors.
    """
    n, h = lattice.n, lattice.h
    d = lattice.diamond
    phi, su = _forward(data, lattice, check_data)
    Fx, _ = data.null_potentials(d.u_lo + h * np.arange(-1, n), np.zeros(1))
    _, Gx = data.null_potentials(np.zeros(1), d.v_lo + h * np.arange(-1, n))
    du_mag = np.abs(np.diff(Fx)) / h
    dv_mag = np.abs(np.diff(Gx)) / h
    if not forward_only and d.u_lo + d.v_lo < 0:
        rlat = NullLattice(Diamond(-d.v_lo, -d.u_lo, d.r), n)
        rphi, _ = _forward(data.time_reversed(), rlat, check_data)
        back = ~lattice.forward_mask()
        phi = np.where(back, rphi[::-1, ::-1].T, phi)
        with np.errstate(invalid="ignore"):
            su_all = np.zeros_like(su)
            su_all[1:] = np.nan_to_num(np.sign(np.diff(phi, axis=0))).astype(np.int8)
        su = np.where(back, su_all, su).astype(np.int8)
    su[du_mag == 0, :] = 0
    sv = _v_signs(phi, dv_mag)
    state = CharState(lattice, phi, du_mag, dv_mag, su, sv)
    return state, extract_defect(state.field())


def naive_clamp(data: InitialData, lattice: NullLattice, forward_only: bool = True) -> Field2D:
    """``clip(phi_lin, -1, 1)``: a barrier-respecting field without reflection."""
    T, X = lattice.cartesian_mesh()
    vals = np.clip(dalembert_grid(data, T, X), -1.0, 1.0)
    fwd = lattice.forward_mask()
    return Field2D(lattice, vals, fwd if forward_only and not fwd.all() else None)


# property checks ------------------------------------------------------------

@dataclass(frozen=True)
class PropertyReport:
    """Discrete measurements of the properties a limit field must have.

    ``defect_support_distance`` and the segment count are in lattice
    cells; every other entry is in field units.
    """

    lipschitz_constant: float
    piecewise_segments_max: int
    initial_agreement_error: float
    barrier_violation: float
    defect_negativity: float
    defect_support_distance: float
    reflection_error_median: float
    reflection_error_p95: float
    reflection_error_fraction_bad: float
    mu_plus_total: float
    mu_minus_total: float
    h: float

    def to_dict(self) -> dict:
        return asdict(self)


def lipschitz_constant(field: Field2D) -> float:
    """Largest null difference quotient ``|delta phi|/h`` along ``u`` and ``v``."""
    f, h = field.values, field.lattice.h
    with np.errstate(invalid="ignore"):
        a = np.nanmax(np.abs(np.diff(f, axis=0))) if f.shape[0] > 1 else 0.0
        b = np.nanmax(np.abs(np.diff(f, axis=1))) if f.shape[1] > 1 else 0.0
    return float(max(a, b) / h)


def _run_starts(flag: np.ndarray) -> np.ndarray:
    start = flag.copy()
    start[:, 1:] &= ~flag[:, :-1]
    return start.sum(axis=1)


def count_segments(field: Field2D, lip: float, p_scale: float = 0.0) -> int:
    """Most smooth pieces on any null line of the lattice.

    A break is a run of nodes whose second null difference exceeds
    ``10 h (h lip + h^2 p_scale)``; smooth pieces give second differences
    of order ``h^2`` times the curvature.
    """
    f, h = field.values, field.lattice.h
    thr = 10.0 * h * (h * lip + h * h * p_scale)
    best = 1
    for g in (f, f.T):
        if g.shape[1] < 3:
            continue
        d2 = np.abs(g[:, 2:] - 2.0 * g[:, 1:-1] + g[:, :-2])
        with np.errstate(invalid="ignore"):
            flag = d2 > thr
        best = max(best, int(1 + _run_starts(flag).max()))
    return best


def support_distance(defect: DefectMeasure, field: Field2D, eps: float) -> float:
    """Largest Chebyshev distance in cells from a defect cell to its barrier set.

    A ``mu_plus`` cell is at distance 0 if a corner has ``phi >= 1 - eps``.
    With no barrier nodes at all the distance is reported as ``n - 1``.
    """
    f = field.values
    n = field.lattice.n
    worst = 0.0
    corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    for mu, near in ((defect.mu_plus, f >= 1.0 - eps), (defect.mu_minus, f <= -1.0 + eps)):
        coo = mu.tocoo()
        cells = np.column_stack([coo.row, coo.col])[coo.data != 0]
        if cells.size == 0:
            continue
        pts = np.argwhere(near)
        if pts.size == 0:
            return float(n - 1)
        tree = cKDTree(pts)
        dist = np.full(len(cells), np.inf)
        for c in corners:
            dd, _ = tree.query(cells + c, p=np.inf)
            dist = np.minimum(dist, dd)
        worst = max(worst, float(dist.max()))
    return worst


def reflection_errors(field: Field2D, data: InitialData) -> np.ndarray:
    """``||phi_u| - |phi_lin_u||`` and the ``v`` analogue at interior nodes."""
    lat = field.lattice
    du, dv = null_derivatives(field)
    U, V = lat.mesh()
    eu = np.abs(np.abs(du.values) - np.abs(lin_u(data, U)))
    ev = np.abs(np.abs(dv.values) - np.abs(lin_v(data, V)))
    f = field.values
    inner = np.zeros(f.shape, dtype=bool)
    inner[1:-1, 1:-1] = True
    fin = np.isfinite(f)
    nb = fin.copy()
    nb[1:-1, 1:-1] = (fin[1:-1, 1:-1] & fin[2:, 1:-1] & fin[:-2, 1:-1]
                      & fin[1:-1, 2:] & fin[1:-1, :-2])
    keep = inner & nb
    return np.concatenate([eu[keep], ev[keep]])


def check_properties(field: Field2D, data: InitialData, margin: float = 0.0,
                     reflection_tol: Optional[float] = None, p_scale: float = 0.0) -> PropertyReport:
    """Measure barrier, defect, reflection and initial-agreement properties.

    ``reflection_tol`` (default ``10 h Lip``) sets what counts as a bad
    point in the null-energy reflection test.  The initial-agreement strip
    is ``|t| < t_lin`` where ``t_lin`` is the first time the free solution
    reaches ``|phi_lin| > 1 - margin`` on the lattice.
    """
    lat = field.lattice
    h = lat.h
    f = field.values
    lip = lipschitz_constant(field)
    segs = count_segments(field, lip, p_scale)
    T, X = lat.cartesian_mesh()
    lin = dalembert_grid(data, T, X)
    ok = np.isfinite(f)
    over = ok & (np.abs(lin) > 1.0 - margin)
    t_lin = float(np.min(np.abs(T[over]))) if over.any() else np.inf
    strip = ok & (np.abs(T) < t_lin)
    init_err = float(np.max(np.abs(f[strip] - lin[strip]))) if strip.any() else 0.0
    barrier = float(max(0.0, np.nanmax(np.abs(f)) - 1.0))
    defect = extract_defect(field)
    negativity = max(0.0, -defect.min_mass)
    eps = 4.0 * h * lip
    dist = support_distance(defect, field, eps)
    err = reflection_errors(field, data)
    tol = 10.0 * h * lip if reflection_tol is None else reflection_tol
    if err.size:
        med, p95 = float(np.median(err)), float(np.percentile(err, 95))
        bad = float(np.mean(err > tol))
    else:
        med = p95 = bad = 0.0
    return PropertyReport(lip, segs, init_err, barrier, negativity, dist, med, p95, bad,
                          defect.total_plus, defect.total_minus, h)

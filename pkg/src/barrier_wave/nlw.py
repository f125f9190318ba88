"""Leapfrog solver for ``phi_tt = phi_xx - |phi|^(p-1) phi`` on an interval.

The solver keeps a small ring of time levels, samples the solution (and
optionally its null-derivative jet) onto null lattices by bilinear
interpolation in ``(t, x)``, tracks derivative maxima on the solver grid
inside a region of interest, and records total and local energy.
Negative times are obtained by solving forward with ``(phi0, -phi1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels
from .errors import BlowUpError, LatticeError
from .geometry import Diamond, Field2D, NullLattice
from .linear import InitialData

JET_NAMES = ("phi", "phi_u", "phi_v", "phi_uu", "phi_vv")


def blowup_threshold(p: float) -> float:
    """Amplitude beyond which a run is declared unstable: ``1 + 50/sqrt(p)``."""
    return 1.0 + 50.0 / math.sqrt(p)


def nonlinearity(phi: float, p: float) -> float:
    """``sign(phi) |phi|^p`` evaluated as ``sign(phi) exp(p log|phi|)``."""
    if not p > 1:
        raise ValueError("exponent p must exceed 1")
    a = abs(phi)
    if not math.isfinite(phi) or a > blowup_threshold(p):
        raise BlowUpError(f"|phi|={a} exceeds the blow-up guard {blowup_threshold(p):.4g}",
                          max_abs=a)
    if a == 0.0:
        return 0.0
    return math.copysign(math.exp(p * math.log(a)), phi)


def potential(phi: np.ndarray, p: float) -> np.ndarray:
    """``|phi|^(p+1)/(p+1)``."""
    a = np.abs(np.asarray(phi, dtype=float))
    with np.errstate(divide="ignore"):
        return np.exp((p + 1.0) * np.log(a)) / (p + 1.0)


@dataclass(frozen=True)
class SimState:
    """Two consecutive leapfrog levels; ``t`` is the time of ``phi_curr``."""

    p: float
    x_lo: float
    x_hi: float
    dx: float
    dt: float
    t: float
    phi_prev: np.ndarray
    phi_curr: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("exponent p must exceed 1")
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")
        if self.dt > self.dx * (1.0 + 1e-12):
            raise ValueError("CFL violated: dt must not exceed dx")
        a, b = np.asarray(self.phi_prev, float), np.asarray(self.phi_curr, float)
        if a.shape != b.shape or a.ndim != 1 or a.size < 3:
            raise ValueError("levels must be 1-D arrays of equal length >= 3")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise BlowUpError("non-finite values in state")

    @property
    def x(self) -> np.ndarray:
        return self.x_lo + self.dx * np.arange(self.phi_curr.size)


def spatial_grid(x_lo: float, x_hi: float, dx: float, periodic: bool = False) -> np.ndarray:
    """Grid nodes; periodic grids exclude the right endpoint."""
    if periodic:
        n = int(round((x_hi - x_lo) / dx))
        return x_lo + dx * np.arange(n)
    n = int(math.ceil((x_hi - x_lo) / dx - 1e-9)) + 1
    return x_lo + dx * np.arange(n)


def _laplacian(f: np.ndarray, dx: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / dx**2
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx**2
    return out


def _nonlin_array(phi: np.ndarray, p: float) -> np.ndarray:
    out = np.empty_like(phi)
    kernels.nonlinearity_array(np.ascontiguousarray(phi), float(p), out)
    return out


def _initial_levels(data: InitialData, p: float, x: np.ndarray, dx: float, dt: float,
                    periodic: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Levels -1, 0, 1 from the second-order Taylor start."""
    f0 = np.asarray(data.phi0(x), dtype=float) * np.ones_like(x)
    f1 = np.asarray(data.phi1(x), dtype=float) * np.ones_like(x)
    if not periodic:
        f0[0] = f0[-1] = 0.0
        f1[0] = f1[-1] = 0.0
    acc = _laplacian(f0, dx, periodic) - _nonlin_array(f0, p)
    lm1 = f0 - dt * f1 + 0.5 * dt * dt * acc
    l1 = f0 + dt * f1 + 0.5 * dt * dt * acc
    if not periodic:
        lm1[0] = lm1[-1] = l1[0] = l1[-1] = 0.0
    return lm1, f0, l1


def initial_state(data: InitialData, p: float, x_lo: float, x_hi: float, dx: float,
                  cfl: float = 0.5) -> SimState:
    """State holding levels 0 and 1 (so ``t = dt``)."""
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    periodic = data.periodic_length is not None
    x = spatial_grid(x_lo, x_hi, dx, periodic)
    dt = cfl * dx
    _, l0, l1 = _initial_levels(data, p, x, dx, dt, periodic)
    return SimState(p, x_lo, x_hi, dx, dt, dt, l0, l1, periodic)


def step(state: SimState) -> SimState:
    """One leapfrog update; returns a new state."""
    nxt = np.empty_like(state.phi_curr)
    amax, ok = kernels.leapfrog_step(state.phi_prev, state.phi_curr, nxt, float(state.p),
                                     (state.dt / state.dx) ** 2, state.dt**2, state.periodic)
    t = state.t + state.dt
    _guard(amax, ok, state.p, t)
    return SimState(state.p, state.x_lo, state.x_hi, state.dx, state.dt, t,
                    state.phi_curr, nxt, state.periodic)


def _guard(amax: float, ok: bool, p: float, t: float) -> None:
    if not ok or not math.isfinite(amax):
        raise BlowUpError(f"non-finite values at t={t:.6g}", t=t)
    if amax > blowup_threshold(p):
        raise BlowUpError(f"max|phi|={amax:.6g} exceeds guard {blowup_threshold(p):.6g} "
                          f"at t={t:.6g}", t=t, max_abs=amax)


def _energy_density(l0: np.ndarray, l1: np.ndarray, p: float, dx: float, dt: float,
                    periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Nodal kinetic+potential density and edge gradient density."""
    kin = 0.5 * ((l1 - l0) / dt) ** 2
    pot = 0.5 * (potential(l0, p) + potential(l1, p))
    if periodic:
        g0 = (np.roll(l0, -1) - l0) / dx
        g1 = (np.roll(l1, -1) - l1) / dx
    else:
        g0 = np.diff(l0) / dx
        g1 = np.diff(l1) / dx
    return kin + pot, 0.5 * g0 * g1


def staggered_energy(l0: np.ndarray, l1: np.ndarray, p: float, dx: float, dt: float,
                     periodic: bool = False) -> float:
    """Energy between two levels: trapezoid in x, time derivative by differencing."""
    node, edge = _energy_density(l0, l1, p, dx, dt, periodic)
    if periodic:
        return float(dx * (node.sum() + edge.sum()))
    return float(dx * (0.5 * node[0] + node[1:-1].sum() + 0.5 * node[-1] + edge.sum()))


def energy(state: SimState) -> float:
    """Energy of the state (centered between its two stored levels)."""
    return staggered_energy(state.phi_prev, state.phi_curr, state.p, state.dx, state.dt,
                            state.periodic)


def _interval_integral(dens: np.ndarray, x_lo: float, dx: float, a: float, b: float) -> float:
    """Integral of the piecewise-linear interpolant of ``dens`` over [a, b]."""
    n = dens.size
    sa = min(max((a - x_lo) / dx, 0.0), n - 1.0)
    sb = min(max((b - x_lo) / dx, 0.0), n - 1.0)
    if sb <= sa:
        return 0.0
    ia, ib = int(math.floor(sa)), int(math.floor(sb))

    def val(s):
        k = min(int(math.floor(s)), n - 2)
        w = s - k
        return (1 - w) * dens[k] + w * dens[k + 1]

    if ia == ib:
        return 0.5 * (val(sa) + val(sb)) * (sb - sa) * dx
    total = 0.5 * (val(sa) + dens[ia + 1]) * (ia + 1 - sa)
    total += 0.5 * (dens[ia + 1:ib].sum() + dens[ia + 2:ib + 1].sum())
    total += 0.5 * (dens[ib] + val(sb)) * (sb - ib)
    return float(total * dx)


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    total_energy: list = field(default_factory=list)
    local_energy: list = field(default_factory=list)

    def relative_drift(self) -> float:
        if not self.total_energy:
            return 0.0
        e = np.asarray(self.total_energy)
        ref = e[np.argmin(np.abs(np.asarray(self.times)))]
        return float(np.max(np.abs(e - ref)) / max(abs(ref), 1e-12))

    def local_increase(self) -> float:
        """Largest relative increase of local energy as |t| grows."""
        t = np.asarray(self.times)
        e = np.asarray(self.local_energy)
        worst = 0.0
        for sel in (t >= 0, t <= 0):
            if sel.sum() < 2:
                continue
            order = np.argsort(np.abs(t[sel]))
            es = e[sel][order]
            scale = max(abs(es[0]), 1e-12)
            worst = max(worst, float(np.max(np.diff(es), initial=0.0)) / scale)
        return worst


@dataclass
class LatticeRequest:
    """A lattice to sample during a run.

    ``mask`` selects nodes (default all); ``jets`` also samples the
    null-derivative jet from solver-grid stencils.
    """

    lattice: NullLattice
    mask: Optional[np.ndarray] = None
    jets: bool = False


@dataclass
class SolveResult:
    fields: list
    trace: EnergyTrace
    diag: dict
    dx: float
    dt: float
    x_lo: float
    x_hi: float
    steps: int


def jet_fields(pm, c, nx, dt, dx, lo, hi):
    """Jet ``(phi, phi_u, phi_v, phi_uu, phi_vv)`` on indices ``lo..hi``."""
    s = slice(lo, hi + 1)
    sp = slice(lo + 1, hi + 2)
    sm = slice(lo - 1, hi)
    ft = (nx[s] - pm[s]) / (2 * dt)
    fx = (c[sp] - c[sm]) / (2 * dx)
    ftt = (nx[s] - 2.0 * c[s] + pm[s]) / dt**2
    fxx = (c[sp] - 2.0 * c[s] + c[sm]) / dx**2
    ftx = (nx[sp] - nx[sm] - pm[sp] + pm[sm]) / (4 * dt * dx)
    return np.stack([c[s], 0.5 * (ft + fx), 0.5 * (ft - fx),
                     0.25 * (ftt + 2 * ftx + fxx), 0.25 * (ftt - 2 * ftx + fxx)])


class _Sampler:
    """Streams lattice nodes (sorted by time) out of the level ring."""

    def __init__(self, req: LatticeRequest, time_sign: float):
        lat = req.lattice
        T, X = lat.cartesian_mesh()
        sel = np.ones(T.shape, bool) if req.mask is None else np.asarray(req.mask, bool)
        sel = sel & ((time_sign * T) >= -1e-12 * max(1.0, lat.diamond.r))
        idx = np.flatnonzero(sel.ravel())
        tt = np.abs(T.ravel()[idx])
        order = np.argsort(tt, kind="stable")
        self.idx = idx[order]
        self.t = tt[order]
        self.x = X.ravel()[self.idx]
        self.jets = req.jets
        self.nfields = 5 if req.jets else 1
        self.out = np.full((self.nfields, T.size), np.nan)
        self.k = 0

    @property
    def t_max(self) -> float:
        return float(self.t[-1]) if self.t.size else 0.0


def _process_batch(smp: _Sampler, ring, level_n: int, dt: float, x_lo: float, dx: float,
                   nx_grid: int, final: bool) -> None:
    """Sample nodes with t in [t_{n-1}, t_n] once level n+1 is available."""
    t_hi = level_n * dt
    k0 = smp.k
    k1 = int(np.searchsorted(smp.t, t_hi * (1 + 1e-14) + 1e-300, side="right"))
    if final:
        k1 = smp.t.size
    if k1 <= k0:
        return
    tb = smp.t[k0:k1]
    xb = smp.x[k0:k1]
    s = (xb - x_lo) / dx
    if np.any(s < 1 - 1e-9) or np.any(s > nx_grid - 2 + 1e-9):
        raise LatticeError("lattice node outside the solver's interior grid")
    kx = np.clip(np.floor(s).astype(int), 1, nx_grid - 3)
    wx = s - kx
    lo, hi = int(kx.min()), int(kx.max()) + 1
    # ring holds levels n-2, n-1, n, n+1
    l_nm2, l_nm1, l_n, l_np1 = ring
    if smp.jets:
        ja = jet_fields(l_nm2, l_nm1, l_n, dt, dx, lo, hi)
        jb = jet_fields(l_nm1, l_n, l_np1, dt, dx, lo, hi)
    else:
        ja = l_nm1[lo:hi + 1][None, :]
        jb = l_n[lo:hi + 1][None, :]
    wt = np.clip((tb - (level_n - 1) * dt) / dt, 0.0, 1.0)
    kk = kx - lo
    va = (1 - wx) * ja[:, kk] + wx * ja[:, kk + 1]
    vb = (1 - wx) * jb[:, kk] + wx * jb[:, kk + 1]
    smp.out[:, smp.idx[k0:k1]] = (1 - wt) * va + wt * vb
    smp.k = k1


def _run_direction(data: InitialData, p: float, dx: float, cfl: float, x_lo: float,
                   x_hi: float, requests: Sequence[LatticeRequest], time_sign: float,
                   region: Optional[Diamond], region_forward_only: bool,
                   cone_top: Optional[tuple], energy_samples: int):
    periodic = data.periodic_length is not None
    run_data = data if time_sign > 0 else data.time_reversed()
    x = spatial_grid(x_lo, x_hi, dx, periodic)
    dt = cfl * dx
    nx_grid = x.size
    samplers = [_Sampler(r, time_sign) for r in requests]
    t_end = max([s.t_max for s in samplers] + [0.0])
    if region is not None:
        tr = region.t_range
        t_end = max(t_end, tr[1] if time_sign > 0 else -tr[0])
    nsteps = int(math.ceil(t_end / dt - 1e-9)) + 1
    lm1, l0, l1 = _initial_levels(run_data, p, x, dx, dt, periodic)
    ring = [lm1, l0, l1, np.empty_like(l0)]
    p = float(p)
    r2, dt2 = (dt / dx) ** 2, dt * dt
    guard_amax = max(float(np.max(np.abs(l0))), float(np.max(np.abs(l1))))
    _guard(guard_amax, bool(np.all(np.isfinite(l1))), p, dt)
    diag = dict(max_abs_phi=0.0, max_phi_u=0.0, max_phi_v=0.0, max_phi_uu=0.0, max_phi_vv=0.0)
    trace = EnergyTrace()
    every = max(1, nsteps // max(1, energy_samples))

    def record_energy(n, la, lb):
        tm = (n + 0.5) * dt
        node, edge = _energy_density(la, lb, p, dx, dt, periodic)
        if periodic:
            tot = float(dx * (node.sum() + edge.sum()))
        else:
            tot = float(dx * (0.5 * node[0] + node[1:-1].sum() + 0.5 * node[-1] + edge.sum()))
        loc = math.nan
        if cone_top is not None and not periodic:
            t_top, x_top = cone_top
            half = t_top - tm
            if half >= 0:
                dens = node.copy()
                dens[1:-1] += 0.5 * (edge[:-1] + edge[1:])
                loc = _interval_integral(dens, x_lo, dx, x_top - half, x_top + half)
        trace.times.append(time_sign * tm)
        trace.total_energy.append(tot)
        trace.local_energy.append(loc)

    # level index of ring[1] is 0 before the first step
    for n in range(1, nsteps + 1):
        # ring = [n-2, n-1, n, scratch] with n counting the newest known level
        prev, cur, nxt = ring[1], ring[2], ring[3]
        amax, ok = kernels.leapfrog_step(prev, cur, nxt, p, r2, dt2, periodic)
        _guard(amax, ok, p, (n + 1) * dt)
        # levels now available: n-2 .. n+1 as ring[0..3]
        if region is not None:
            tn = n * dt
            tphys = time_sign * tn
            if not region_forward_only or tphys >= 0:
                lo, hi = region.cross_section(tphys)
                if hi >= lo:
                    jlo = int(math.ceil((lo - x_lo) / dx - 1e-9))
                    jhi = int(math.floor((hi - x_lo) / dx + 1e-9))
                    m = kernels.jet_max(prev, cur, nxt, dt, dx, jlo, jhi)
                    diag["max_abs_phi"] = max(diag["max_abs_phi"], m[0])
                    if time_sign > 0:
                        diag["max_phi_u"] = max(diag["max_phi_u"], m[1])
                        diag["max_phi_v"] = max(diag["max_phi_v"], m[2])
                        diag["max_phi_uu"] = max(diag["max_phi_uu"], m[3])
                        diag["max_phi_vv"] = max(diag["max_phi_vv"], m[4])
                    else:
                        diag["max_phi_u"] = max(diag["max_phi_u"], m[2])
                        diag["max_phi_v"] = max(diag["max_phi_v"], m[1])
                        diag["max_phi_uu"] = max(diag["max_phi_uu"], m[4])
                        diag["max_phi_vv"] = max(diag["max_phi_vv"], m[3])
        for smp in samplers:
            _process_batch(smp, ring, n, dt, x_lo, dx, nx_grid, final=(n == nsteps))
        if (n - 1) % every == 0:
            record_energy(n - 1, prev, cur)
        ring = [ring[1], ring[2], ring[3], ring[0]]
    if region is not None and region.t_range[0] * time_sign <= 0 <= region.t_range[1] * time_sign:
        lo, hi = region.cross_section(0.0)
        sel = (x >= lo - 1e-12) & (x <= hi + 1e-12)
        if sel.any():
            diag["max_abs_phi"] = max(diag["max_abs_phi"], float(np.max(np.abs(l0[sel]))))
    return samplers, trace, diag, dt, nsteps


def solve_region(data: InitialData, p: float, dx: float,
                 requests: Sequence[LatticeRequest], cfl: float = 0.5,
                 region: Optional[Diamond] = None, region_forward_only: bool = False,
                 cone_top: Optional[tuple] = None, cone_bottom: Optional[tuple] = None,
                 energy_samples: int = 400, pad: float = 0.5) -> SolveResult:
    """Run the solver over the time span needed by ``requests`` and ``region``.

    Returns one ``dict`` of sampled :class:`Field2D` per request (keys
    from ``JET_NAMES``; only ``"phi"`` unless jets were requested), the
    energy trace, and the maxima of the jet on the solver grid inside
    ``region`` (restricted to t >= 0 when ``region_forward_only``).
    Local energy is integrated over the backward light cone of
    ``cone_top = (t, x)`` and, for the time-reversed run, over the forward
    cone of ``cone_bottom``.
    """
    if not p > 1:
        raise ValueError("exponent p must exceed 1")
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    periodic = data.periodic_length is not None
    need_back = False
    deps = []
    for r in requests:
        lat = r.lattice
        d = lat.diamond
        T = lat.cartesian_mesh()[0]
        sel = np.ones(T.shape, bool) if r.mask is None else np.asarray(r.mask, bool)
        if np.any(T[sel] < -1e-12 * max(1.0, d.r)):
            need_back = True
        deps.append(d.dependence_interval(forward_only=not np.any(T[sel] < 0)))
    if region is not None:
        fo = region_forward_only or region.t_range[0] >= 0
        deps.append(region.dependence_interval(forward_only=fo))
        if not fo:
            need_back = True
    if periodic:
        L = float(data.periodic_length)
        x_lo, x_hi = -0.5 * L, 0.5 * L
    else:
        R = data.support_radius
        x_lo = min([d[0] for d in deps] + [-R]) - pad
        x_hi = max([d[1] for d in deps] + [R]) + pad
    fwd = _run_direction(data, p, dx, cfl, x_lo, x_hi, requests, 1.0, region,
                         region_forward_only, cone_top, energy_samples)
    samplers, trace, diag, dt, steps = fwd
    if need_back:
        mirrored = None if cone_bottom is None else (-cone_bottom[0], cone_bottom[1])
        bwd = _run_direction(data, p, dx, cfl, x_lo, x_hi, requests, -1.0, region,
                             region_forward_only, mirrored, energy_samples)
        bsamp, btrace, bdiag, _, bsteps = bwd
        steps += bsteps
        for k in diag:
            diag[k] = max(diag[k], bdiag[k])
        # splice the backward trace in front, in increasing time order
        trace = EnergyTrace(btrace.times[::-1] + trace.times,
                            btrace.total_energy[::-1] + trace.total_energy,
                            btrace.local_energy[::-1] + trace.local_energy)
    else:
        bsamp = None
    results = []
    for k, r in enumerate(requests):
        lat = r.lattice
        n = lat.n
        T = lat.cartesian_mesh()[0]
        out = samplers[k].out.copy()
        if bsamp is not None:
            bo = bsamp[k].out
            back = (T.ravel() < 0) & np.isfinite(bo[0])
            if r.jets:
                # phi(t) = psi(-t): phi_u = -psi_v, phi_v = -psi_u, phi_uu = psi_vv
                bo = np.stack([bo[0], -bo[2], -bo[1], bo[4], bo[3]])
            out[:, back] = bo[:, back]
        mask = None if r.mask is None else np.asarray(r.mask, bool)
        fields = {}
        for f_i in range(out.shape[0]):
            vals = out[f_i].reshape(n, n)
            m = mask if mask is not None else np.isfinite(vals)
            fields[JET_NAMES[f_i]] = Field2D(lat, vals, None if m.all() else m)
        results.append(fields)
    return SolveResult(results, trace, diag, dx, dt, x_lo, x_hi, steps)


def solve_on_diamond(data: InitialData, p: float, diamond: Diamond, lattice_n: int,
                     dx: float, cfl: float = 0.5, triangle: bool = False
                     ) -> tuple[Field2D, EnergyTrace]:
    """Solve and sample ``phi`` on the diamond's null lattice.

    With ``triangle=True`` only nodes with t >= 0 are sampled (the rest are
    masked).  The local energy is taken over the backward light cone of the
    diamond's top vertex.
    """
    lat = NullLattice(diamond, lattice_n)
    mask = lat.forward_mask() if triangle else None
    top = diamond.t_range[1], 0.5 * (diamond.u0 - diamond.v0)
    bottom = diamond.t_range[0], 0.5 * (diamond.u_lo - diamond.v_lo)
    res = solve_region(data, p, dx, [LatticeRequest(lat, mask)], cfl=cfl,
                       region=diamond, region_forward_only=triangle, cone_top=top,
                       cone_bottom=bottom)
    return res.fields[0]["phi"], res.trace


def holder_check(f: Field2D, samples: int, seed: int = 0) -> float:
    """Max over random node pairs of ``|df| / (|dx|^1/2 + |dt|^1/2)``."""
    rng = np.random.default_rng(seed)
    T, X = f.lattice.cartesian_mesh()
    valid = np.flatnonzero(f.valid.ravel())
    if valid.size < 2 or samples < 1:
        return 0.0
    a = rng.choice(valid, size=samples)
    b = rng.choice(valid, size=samples)
    keep = a != b
    a, b = a[keep], b[keep]
    vals = f.values.ravel()
    t, x = T.ravel(), X.ravel()
    den = np.sqrt(np.abs(x[a] - x[b])) + np.sqrt(np.abs(t[a] - t[b]))
    num = np.abs(vals[a] - vals[b])
    return float(np.max(num / den, initial=0.0))

"""Numpy implementations of the hot loops (same API as ``_ckernels``)."""
from __future__ import annotations

import math

import numpy as np


def _nonlin(a: np.ndarray, p: float) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        m = np.exp(p * np.log(np.abs(a)))
    return np.where(a > 0, m, np.where(a < 0, -m, 0.0))


def nonlinearity_array(phi, p, out):
    out[:] = _nonlin(np.asarray(phi), p)


def leapfrog_step(prev, cur, nxt, p, r2, dt2, periodic):
    if periodic:
        lap = np.roll(cur, -1) - 2.0 * cur + np.roll(cur, 1)
        nxt[:] = ((2.0 * cur - prev) + r2 * lap) - dt2 * _nonlin(cur, p)
    else:
        c = cur[1:-1]
        lap = cur[2:] - 2.0 * c + cur[:-2]
        nxt[1:-1] = ((2.0 * c - prev[1:-1]) + r2 * lap) - dt2 * _nonlin(c, p)
        nxt[0] = 0.0
        nxt[-1] = 0.0
    ok = bool(np.all(np.isfinite(nxt)))
    amax = float(np.max(np.abs(nxt))) if ok else math.nan
    return amax, ok


def jet_max(pm, c, nx, dt, dx, lo, hi):
    lo = max(int(lo), 1)
    hi = min(int(hi), c.shape[0] - 2)
    if hi < lo:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    s = slice(lo, hi + 1)
    sp = slice(lo + 1, hi + 2)
    sm = slice(lo - 1, hi)
    ft = (nx[s] - pm[s]) * (0.5 / dt)
    fx = (c[sp] - c[sm]) * (0.5 / dx)
    ftt = (nx[s] - 2.0 * c[s] + pm[s]) * (1.0 / (dt * dt))
    fxx = (c[sp] - 2.0 * c[s] + c[sm]) * (1.0 / (dx * dx))
    ftx = (nx[sp] - nx[sm] - pm[sp] + pm[sm]) * (0.25 / (dt * dx))
    return (float(np.max(np.abs(c[s]))),
            float(np.max(np.abs(0.5 * (ft + fx)))),
            float(np.max(np.abs(0.5 * (ft - fx)))),
            float(np.max(np.abs(0.25 * (ftt + 2.0 * ftx + fxx)))),
            float(np.max(np.abs(0.25 * (ftt - 2.0 * ftx + fxx)))))


def _node(p01, sd, su, mu, cut):
    """Scalar march step; returns (value, su, cut, kind, overshoot)."""
    kind, over = 0, 0.0
    if sd != su and sd != 0 and su != 0:
        room = 1.0 - p01 if sd > 0 else p01 + 1.0
        if room < cut:
            over, cut, kind = mu - room, room, sd
        val = p01 + sd * (2.0 * cut - mu)
    else:
        val = p01 + su * mu
    if kind == 0:
        if val > 1.0:
            val, over, cut, su, kind = 2.0 - val, val - 1.0, 1.0 - p01, -1, 2
        elif val < -1.0:
            val, over, cut, su, kind = -2.0 - val, -1.0 - val, p01 + 1.0, 1, -2
    return val, su, cut, kind, over


def march_row(prev, prev_sig, row, sig_u, su, mu, j_lo, ev_j, ev_over, ev_kind):
    """Row march: vectorized free runs, scalar steps at contacts."""
    nv = row.shape[0]
    ne = 0
    emax = 0.0
    cut = 0.0
    su = int(su)
    mu = float(mu)
    j = int(j_lo)
    while j < nv:
        p = prev[j:]
        sd = prev_sig[j:].astype(np.int64)
        strad = (sd != su) & (sd != 0) & (su != 0)
        val = np.where(strad, p + sd * (2.0 * cut - mu), p + su * mu)
        room = np.where(sd > 0, 1.0 - p, p + 1.0)
        with np.errstate(invalid="ignore"):
            stop_at = (strad & (room < cut)) | (np.abs(val) > 1.0)
        hit = np.flatnonzero(stop_at)
        stop = nv if hit.size == 0 else j + int(hit[0])
        row[j:stop] = val[:stop - j]
        sig_u[j:stop] = su
        if stop == nv:
            break
        k = stop
        v, su, cut, kind, over = _node(float(prev[k]), int(prev_sig[k]), su, mu, cut)
        row[k] = v
        sig_u[k] = su
        if kind != 0:
            emax = max(emax, abs(v) - 1.0)
            ev_j[ne] = k
            ev_over[ne] = over
            ev_kind[ne] = kind
            ne += 1
        j = k + 1
    return ne, emax


def verlet(p, q, v, dt, nsteps, stride, out_q, out_v):
    hdt = 0.5 * dt
    out_q[0] = q
    out_v[0] = v
    exp, log = math.exp, math.log
    for k in range(1, nsteps + 1):
        q = q + hdt * v
        if q > 0.0:
            v = v - dt * exp(p * log(q))
        elif q < 0.0:
            v = v + dt * exp(p * log(-q))
        q = q + hdt * v
        if k % stride == 0:
            s = k // stride
            out_q[s] = q
            out_v[s] = v
    return q, v

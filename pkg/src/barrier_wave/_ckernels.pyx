# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: leapfrog update, solver-grid jet maxima, the
row march of the limit constructor, and position Verlet.  The numpy fallback in
``_pykernels`` implements the same functions with the same semantics."""

from libc.math cimport exp, log, fabs, isfinite

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _nonlin(double a, double p) noexcept nogil:
    cdef double m
    if a == 0.0:
        return 0.0
    m = exp(p * log(fabs(a)))
    return m if a > 0.0 else -m


def nonlinearity_array(const double[::1] phi, double p, double[::1] out):
    cdef Py_ssize_t j, n = phi.shape[0]
    with nogil:
        for j in range(n):
            out[j] = _nonlin(phi[j], p)


def leapfrog_step(const double[::1] prev, const double[::1] cur, double[::1] nxt,
                  double p, double r2, double dt2, bint periodic):
    """Advance one level; return ``(max |nxt|, finite_flag)``."""
    cdef Py_ssize_t j, n = cur.shape[0]
    cdef double c, lap, val, amax = 0.0
    cdef int ok = 1
    with nogil:
        for j in range(1, n - 1):
            c = cur[j]
            lap = cur[j + 1] - 2.0 * c + cur[j - 1]
            val = ((2.0 * c - prev[j]) + r2 * lap) - dt2 * _nonlin(c, p)
            nxt[j] = val
            if fabs(val) > amax:
                amax = fabs(val)
            elif not isfinite(val):
                ok = 0
        if periodic:
            c = cur[0]
            lap = cur[1] - 2.0 * c + cur[n - 1]
            nxt[0] = ((2.0 * c - prev[0]) + r2 * lap) - dt2 * _nonlin(c, p)
            c = cur[n - 1]
            lap = cur[0] - 2.0 * c + cur[n - 2]
            nxt[n - 1] = ((2.0 * c - prev[n - 1]) + r2 * lap) - dt2 * _nonlin(c, p)
            for j in range(2):
                val = nxt[j * (n - 1)]
                if fabs(val) > amax:
                    amax = fabs(val)
                elif not isfinite(val):
                    ok = 0
        else:
            nxt[0] = 0.0
            nxt[n - 1] = 0.0
    if amax != amax:
        ok = 0
    return amax, bool(ok)


def jet_max(const double[::1] pm, const double[::1] c, const double[::1] nx,
            double dt, double dx, Py_ssize_t lo, Py_ssize_t hi):
    """Maxima of |phi|, |phi_u|, |phi_v|, |phi_uu|, |phi_vv| on ``lo..hi``."""
    cdef Py_ssize_t j
    cdef double ft, fx, ftt, fxx, ftx, a
    cdef double m0 = 0.0, m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0
    cdef double i2dt = 0.5 / dt, i2dx = 0.5 / dx
    cdef double idt2 = 1.0 / (dt * dt), idx2 = 1.0 / (dx * dx)
    cdef double i4dtdx = 0.25 / (dt * dx)
    if lo < 1:
        lo = 1
    if hi > c.shape[0] - 2:
        hi = c.shape[0] - 2
    with nogil:
        for j in range(lo, hi + 1):
            a = fabs(c[j])
            if a > m0:
                m0 = a
            ft = (nx[j] - pm[j]) * i2dt
            fx = (c[j + 1] - c[j - 1]) * i2dx
            ftt = (nx[j] - 2.0 * c[j] + pm[j]) * idt2
            fxx = (c[j + 1] - 2.0 * c[j] + c[j - 1]) * idx2
            ftx = (nx[j + 1] - nx[j - 1] - pm[j + 1] + pm[j - 1]) * i4dtdx
            a = fabs(0.5 * (ft + fx))
            if a > m1:
                m1 = a
            a = fabs(0.5 * (ft - fx))
            if a > m2:
                m2 = a
            a = fabs(0.25 * (ftt + 2.0 * ftx + fxx))
            if a > m3:
                m3 = a
            a = fabs(0.25 * (ftt - 2.0 * ftx + fxx))
            if a > m4:
                m4 = a
    return m0, m1, m2, m3, m4


def march_row(const double[::1] prev, const signed char[::1] prev_sig, double[::1] row,
              signed char[::1] sig_u, int su, double mu, Py_ssize_t j_lo,
              cnp.int64_t[::1] ev_j, double[::1] ev_over, signed char[::1] ev_kind):
    """March one u-row: ``row[j] = prev[j] + su*mu`` with mirror reflection.

    ``prev_sig`` holds the u-increment signs of the previous row.  Where
    they differ from ``su`` the sign flips inside the cell, after a part
    ``cut`` of the increment taken with the old sign.  The cut is carried
    along the row (a flip line of constant ``u``) and shortened to the
    distance to the barrier when that is smaller (a contact).  Returns
    ``(n_events, max_excess)`` where the excess is how far a mirrored
    value still lies outside ``[-1, 1]``.  Event kinds: +-1 contact on a
    straddling edge, +-2 contact that flips the row sign.
    """
    cdef Py_ssize_t j, nv = row.shape[0]
    cdef Py_ssize_t ne = 0
    cdef double p01, room, val, over, exc, emax = 0.0, cut = 0.0
    cdef int sd
    cdef signed char kind
    with nogil:
        for j in range(j_lo, nv):
            p01 = prev[j]
            sd = prev_sig[j]
            kind = 0
            over = 0.0
            if sd != su and sd != 0 and su != 0:
                room = 1.0 - p01 if sd > 0 else p01 + 1.0
                if room < cut:
                    over = mu - room
                    cut = room
                    kind = sd
                val = p01 + sd * (2.0 * cut - mu)
            else:
                val = p01 + su * mu
            if kind == 0:
                if val > 1.0:
                    over = val - 1.0
                    cut = 1.0 - p01
                    val = 2.0 - val
                    su = -1
                    kind = 2
                elif val < -1.0:
                    over = -1.0 - val
                    cut = p01 + 1.0
                    val = -2.0 - val
                    su = 1
                    kind = -2
            if kind != 0:
                exc = fabs(val) - 1.0
                if exc > emax:
                    emax = exc
                ev_j[ne] = j
                ev_over[ne] = over
                ev_kind[ne] = kind
                ne += 1
            row[j] = val
            sig_u[j] = su
    return ne, emax


def verlet(double p, double q, double v, double dt, Py_ssize_t nsteps, Py_ssize_t stride,
           double[::1] out_q, double[::1] out_v):
    """Position Verlet for ``q'' = -|q|^{p-1} q``; samples every ``stride`` steps."""
    cdef Py_ssize_t k, s = 0
    cdef double hdt = 0.5 * dt
    with nogil:
        out_q[0] = q
        out_v[0] = v
        for k in range(1, nsteps + 1):
            q = q + hdt * v
            v = v - dt * _nonlin(q, p)
            q = q + hdt * v
            if k % stride == 0:
                s = k // stride
                out_q[s] = q
                out_v[s] = v
    return q, v

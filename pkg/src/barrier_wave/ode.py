"""Spatially homogeneous model ``phi'' = -|phi|^(p-1) phi``.

Position-Verlet integration, the closed-form reflection profile of
``psi'' = -exp(psi)``, the bouncing (sawtooth) limit and the rescaled
reflection profile near a bounce.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .errors import EnergyDriftError


@dataclass(frozen=True)
class OdeState:
    p: float
    phi: float
    phi_t: float
    t: float

    def hamiltonian(self) -> float:
        return hamiltonian(self.phi, self.phi_t, self.p)


@dataclass(frozen=True)
class ReflectionProfile:
    """Profile ``log(2 a^2 / cosh^2(a (s - s0)))``; ``t0`` is the bounce time."""

    a: float
    s0: float = 0.0
    t0: Optional[float] = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("reflection speed a must be positive")


@dataclass(frozen=True)
class OdeTrajectory:
    p: float
    t: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray
    hamiltonian: np.ndarray

    @property
    def relative_drift(self) -> float:
        """``|H(t_end) - H(0)| / H(0)``."""
        h0 = float(self.hamiltonian[0])
        return abs(float(self.hamiltonian[-1]) - h0) / max(abs(h0), 1e-300)

    @property
    def max_excursion(self) -> float:
        """Largest ``|H(t) - H(0)| / H(0)`` along the samples."""
        h0 = float(self.hamiltonian[0])
        return float(np.max(np.abs(self.hamiltonian - h0))) / max(abs(h0), 1e-300)


def hamiltonian(phi, phi_t, p):
    """``phi_t^2/2 + |phi|^(p+1)/(p+1)``."""
    phi = np.asarray(phi, dtype=float)
    with np.errstate(divide="ignore"):
        pot = np.exp((p + 1.0) * np.log(np.abs(phi))) / (p + 1.0)
    return 0.5 * np.asarray(phi_t, dtype=float) ** 2 + pot


def integrate_ode(p: float, phi0: float, phi1: float, t_end: float, dt: float,
                  stride: int = 1, drift_tol: Optional[float] = 1e-6,
                  check_dt: bool = True) -> OdeTrajectory:
    """Position-Verlet trajectory sampled every ``stride`` steps.

    Raises
    ------
    EnergyDriftError
        If the end-to-end relative drift of the Hamiltonian exceeds
        ``drift_tol`` (pass ``None`` to skip the check).
    """
    if not p > 1:
        raise ValueError("exponent p must exceed 1")
    if abs(phi0) > 1:
        raise ValueError("|phi0| must not exceed 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if check_dt and dt > 1.0 / (4.0 * p) * (1 + 1e-12):
        raise ValueError(f"dt={dt} does not resolve the reflection layer (need dt <= 1/(4p))")
    nsteps = int(round(t_end / dt))
    if nsteps < 0:
        raise ValueError("t_end must be nonnegative")
    stride = max(1, int(stride))
    nsamp = nsteps // stride + 1
    q = np.empty(nsamp)
    v = np.empty(nsamp)
    kernels.verlet(float(p), float(phi0), float(phi1), float(dt), nsteps, stride, q, v)
    t = np.arange(nsamp) * (stride * dt)
    traj = OdeTrajectory(float(p), t, q, v, hamiltonian(q, v, p))
    if drift_tol is not None and traj.relative_drift > drift_tol:
        raise EnergyDriftError(f"relative energy drift {traj.relative_drift:.3e} exceeds "
                               f"{drift_tol:.1e}; reduce dt")
    return traj


def integrate_backward(traj: OdeTrajectory, dt: float) -> tuple[float, float]:
    """Integrate from the end of ``traj`` back to t=0 with step ``-dt``."""
    nsteps = int(round(float(traj.t[-1]) / dt))
    q = np.empty(1)
    v = np.empty(1)
    qf, vf = kernels.verlet(traj.p, float(traj.phi[-1]), float(traj.phi_t[-1]), -float(dt),
                            nsteps, max(nsteps, 1), q, v)
    return float(qf), float(vf)


def _log_cosh(y):
    y = np.abs(np.asarray(y, dtype=float))
    return y + np.log1p(np.exp(-2.0 * y)) - math.log(2.0)


def liouville_ode_profile(prof: ReflectionProfile, s):
    """``log(2 a^2 / cosh^2(a (s - s0)))`` (stable for large arguments)."""
    a = prof.a
    return math.log(2.0 * a * a) - 2.0 * _log_cosh(a * (np.asarray(s, dtype=float) - prof.s0))


def ode_residual(prof: ReflectionProfile, s_grid) -> float:
    """Max of ``|psi_ss + exp(psi)|`` by centered differences on a uniform grid."""
    s = np.asarray(s_grid, dtype=float)
    h = s[1] - s[0]
    psi = liouville_ode_profile(prof, s)
    return residual_of_samples(psi, h)


def residual_of_samples(psi: np.ndarray, h: float) -> float:
    psi = np.asarray(psi, dtype=float)
    d2 = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / h**2
    return float(np.max(np.abs(d2 + np.exp(psi[1:-1]))))


def sawtooth_limit(phi0: float, phi1: float, t):
    """Straight-line motion folded back into [-1, 1] at the barriers."""
    if abs(phi0) > 1:
        raise ValueError("|phi0| must not exceed 1")
    y = phi0 + phi1 * np.asarray(t, dtype=float)
    m = np.mod(y + 1.0, 4.0)
    out = np.where(m <= 2.0, m - 1.0, 3.0 - m)
    return out if out.ndim else float(out)


def phip_profile(p: float, prof: ReflectionProfile, t):
    """``1 + log(p)/p + (1/p) log(2 a^2 / cosh^2(a p (t - t0)))``."""
    if not p > 1:
        raise ValueError("exponent p must exceed 1")
    t0 = prof.t0 if prof.t0 is not None else prof.s0
    a = prof.a
    arg = a * p * (np.asarray(t, dtype=float) - t0)
    return 1.0 + math.log(p) / p + (math.log(2.0 * a * a) - 2.0 * _log_cosh(arg)) / p


# trajectory analysis -------------------------------------------------------

def _crossings(t: np.ndarray, y: np.ndarray, level: float) -> np.ndarray:
    """Linearly interpolated times where ``y`` crosses ``level``."""
    s = y - level
    k = np.flatnonzero(np.sign(s[:-1]) * np.sign(s[1:]) < 0)
    w = s[k] / (s[k] - s[k + 1])
    return t[k] + w * (t[k + 1] - t[k])


def _interp_at(t: np.ndarray, y: np.ndarray, tq: float) -> float:
    return float(np.interp(tq, t, y))


@dataclass(frozen=True)
class Bounce:
    t0: float
    peak: float
    sign: int
    speed_in: float
    speed_out: float


def find_bounces(traj: OdeTrajectory, level: float = 0.5) -> list:
    """Bounces located by quadratic fits at the extrema of ``|phi|``.

    ``speed_in``/``speed_out`` are ``|phi_t|`` at the ``|phi| = level``
    crossings before and after each extremum.
    """
    t, y, yt = traj.t, traj.phi, traj.phi_t
    ay = np.abs(y)
    up = np.sort(np.concatenate([_crossings(t, y, level), _crossings(t, y, -level)]))
    out = []
    for c0, c1 in zip(up[:-1], up[1:]):
        sel = (t > c0) & (t < c1)
        if not sel.any():
            continue
        idx = np.flatnonzero(sel)
        k = idx[np.argmax(ay[idx])]
        if ay[k] < level:
            continue
        if 0 < k < t.size - 1:
            y0, y1, y2 = ay[k - 1], ay[k], ay[k + 1]
            den = y0 - 2 * y1 + y2
            off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            dtt = t[1] - t[0]
            t0 = float(t[k] + off * dtt)
            peak = float(y1 - 0.25 * (y0 - y2) * off)
        else:
            t0, peak = float(t[k]), float(ay[k])
        out.append(Bounce(t0, peak, int(np.sign(y[k])),
                          abs(_interp_at(t, yt, c0)), abs(_interp_at(t, yt, c1))))
    return out


def profile_from_bounce(bounce: Bounce) -> ReflectionProfile:
    """Profile fitted to a bounce.

    The profile ``log(2 a^2/cosh^2(a s))`` has asymptotic slope ``2a``
    and the rescaled solution has ``phi_t = psi_s``, so ``a`` is half the
    incoming speed.
    """
    return ReflectionProfile(a=0.5 * bounce.speed_in, t0=bounce.t0)


def reflection_match_error(traj: OdeTrajectory, bounce: Bounce, window: Optional[float] = None) -> float:
    """Sup of ``| |phi| - phip_profile |`` over ``|t - t0| <= window`` (default 10/p)."""
    p = traj.p
    w = 10.0 / p if window is None else window
    sel = np.abs(traj.t - bounce.t0) <= w
    prof = profile_from_bounce(bounce)
    model = phip_profile(p, prof, traj.t[sel])
    return float(np.max(np.abs(np.abs(traj.phi[sel]) - model)))


def sawtooth_distance(traj: OdeTrajectory, phi0: float, phi1: float) -> float:
    return float(np.max(np.abs(traj.phi - sawtooth_limit(phi0, phi1, traj.t))))

"""Closed-form solutions of ``psi_uv = -exp(psi)/4`` and residual checks.

Solutions come from ``psi = log(-8 f'(u) g'(v) / (f(u) + g(v))^2)``.  The
residual helpers difference a sampled :class:`Field2D`, so they apply
equally to closed forms and to rescaled solver output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainViolation, LatticeError
from .geometry import CartesianPoint, Field2D, NullLattice, NullPoint


@dataclass(frozen=True)
class LiouvilleSolution:
    f: Callable
    f_prime: Callable
    g: Callable
    g_prime: Callable
    name: str = ""


@dataclass(frozen=True)
class LorentzProfile:
    """``log(2a^2/cosh^2(a((t-t0) - speed (x-x0))/sqrt(1-speed^2)))``."""

    a: float
    speed: float = 0.0
    t0: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not abs(self.speed) < 1:
            raise ValueError("speed must satisfy |speed| < 1")


def exponential_family(a: float, t0: float = 0.0) -> LiouvilleSolution:
    """``f = exp(a(u - t0))``, ``g = exp(-a(v - t0))``: the profile in t alone."""
    return LiouvilleSolution(
        lambda u: np.exp(a * (np.asarray(u, float) - t0)),
        lambda u: a * np.exp(a * (np.asarray(u, float) - t0)),
        lambda v: np.exp(-a * (np.asarray(v, float) - t0)),
        lambda v: -a * np.exp(-a * (np.asarray(v, float) - t0)),
        name=f"exp(a={a}, t0={t0})")


def rational_family() -> LiouvilleSolution:
    """``f = u``, ``g = 1/v`` on ``v < 0``: ``psi = log(8 / (uv + 1)^2)``."""
    return LiouvilleSolution(
        lambda u: np.asarray(u, float),
        lambda u: np.ones_like(np.asarray(u, float)),
        lambda v: 1.0 / np.asarray(v, float),
        lambda v: -1.0 / np.asarray(v, float) ** 2,
        name="rational")


def liouville_values(sol: LiouvilleSolution, u, v) -> np.ndarray:
    """Vectorized formula; raises on a nonpositive log argument."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    num = -8.0 * sol.f_prime(u) * sol.g_prime(v)
    den = (sol.f(u) + sol.g(v)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = num / den
    if np.any(~np.isfinite(arg)) or np.any(arg <= 0):
        raise DomainViolation("Liouville formula: log argument not positive")
    return np.log(arg)


def liouville_eval(sol: LiouvilleSolution, p: NullPoint) -> float:
    return float(liouville_values(sol, p.u, p.v))


def liouville_field(sol: LiouvilleSolution, lattice: NullLattice) -> Field2D:
    U, V = lattice.mesh()
    return Field2D(lattice, liouville_values(sol, U, V))


def lorentz_values(prof: LorentzProfile, t, x) -> np.ndarray:
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    a = prof.a
    z = a * ((t - prof.t0) - prof.speed * (x - prof.x0)) / math.sqrt(1.0 - prof.speed**2)
    z = np.abs(z)
    log_cosh = z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)
    return math.log(2.0 * a * a) - 2.0 * log_cosh


def lorentz_eval(prof: LorentzProfile, p: CartesianPoint) -> float:
    return float(lorentz_values(prof, p.t, p.x))


def lorentz_field(prof: LorentzProfile, lattice: NullLattice) -> Field2D:
    T, X = lattice.cartesian_mesh()
    return Field2D(lattice, lorentz_values(prof, T, X))


def f_p(s, p: float):
    """``s (1 + s/p)^(p-1)`` on ``1 + s/p >= 0``."""
    s_arr = np.asarray(s, float)
    base = 1.0 + s_arr / p
    if np.any(base < 0):
        raise DomainViolation("f_p requires 1 + s/p >= 0")
    with np.errstate(divide="ignore", under="ignore"):
        out = s_arr * np.where(base > 0, np.exp((p - 1.0) * np.log(np.where(base > 0, base, 1.0))),
                               0.0 if p > 1 else 1.0)
    return float(out) if out.ndim == 0 else out


# residuals ------------------------------------------------------------------

def _check_n(field: Field2D, n_min: int) -> None:
    if field.lattice.n < n_min:
        raise LatticeError(f"need a lattice with n >= {n_min}")


def liouville_residual(field: Field2D) -> float:
    """Max over interior nodes of ``|psi_uv + exp(psi)/4|``."""
    _check_n(field, 5)
    psi = field.values
    h = field.lattice.h
    puv = (psi[2:, 2:] - psi[2:, :-2] - psi[:-2, 2:] + psi[:-2, :-2]) / (4.0 * h * h)
    res = np.abs(puv + 0.25 * np.exp(psi[1:-1, 1:-1]))
    return float(np.nanmax(res))


def _conserved_densities(psi: np.ndarray, h: float):
    """``Q_u = psi_u^2/2 - psi_uu`` (valid rows 1..n-2) and the v analogue."""
    pu = (psi[2:, :] - psi[:-2, :]) / (2 * h)
    puu = (psi[2:, :] - 2 * psi[1:-1, :] + psi[:-2, :]) / h**2
    pv = (psi[:, 2:] - psi[:, :-2]) / (2 * h)
    pvv = (psi[:, 2:] - 2 * psi[:, 1:-1] + psi[:, :-2]) / h**2
    return 0.5 * pu**2 - puu, 0.5 * pv**2 - pvv, pu, pv


def conservation_residual(field: Field2D) -> tuple[float, float]:
    """``(max|d_v(psi_u^2/2 - psi_uu)|, max|d_u(psi_v^2/2 - psi_vv)|)``."""
    _check_n(field, 7)
    h = field.lattice.h
    qu, qv, _, _ = _conserved_densities(field.values, h)
    dv_qu = (qu[:, 2:] - qu[:, :-2]) / (2 * h)
    du_qv = (qv[2:, :] - qv[:-2, :]) / (2 * h)
    return float(np.nanmax(np.abs(dv_qu))), float(np.nanmax(np.abs(du_qv)))


def conserved_variation(field: Field2D) -> float:
    """Max over u-lines of the spread of ``psi_u^2/2 - psi_uu`` along v."""
    _check_n(field, 7)
    qu, _, _, _ = _conserved_densities(field.values, field.lattice.h)
    return float(np.nanmax(np.nanmax(qu, axis=1) - np.nanmin(qu, axis=1)))


def almost_conservation_residual(field: Field2D, p: float) -> float:
    """Max of ``|d_v(psi_u^2/2 - psi_uu) + F_p(psi) psi_u/(4p)|``.

    This is the exact identity satisfied by ``psi_uv = -(1 + psi/p)^p/4``.
    """
    _check_n(field, 7)
    h = field.lattice.h
    psi = field.values
    qu, _, pu, _ = _conserved_densities(psi, h)
    dv_qu = (qu[:, 2:] - qu[:, :-2]) / (2 * h)
    inner = psi[1:-1, 1:-1]
    src = f_p(inner, p) * pu[:, 1:-1] / (4.0 * p)
    return float(np.nanmax(np.abs(dv_qu + src)))


def rescale_to_profile(phi: Field2D, p: float, u0: float, v0: float, half_width: float,
                       n: int) -> Field2D:
    """Blow up ``phi`` around ``(u0, v0)``.

    Returns ``psi(U, V)`` with ``phi(u0 + U/p, v0 + V/p) = p^(1/(p-1)) (1 + psi/p)``
    on the square ``|U|, |V| <= half_width``.
    """
    from .geometry import Diamond
    lat = NullLattice(Diamond(half_width, half_width, 2 * half_width), n)
    U, V = lat.mesh()
    vals = phi.interpolate_null(u0 + U / p, v0 + V / p)
    psi = p * (vals / p ** (1.0 / (p - 1.0)) - 1.0)
    return Field2D(lat, psi)

"""Initial data and the free wave equation.

The free solution splits as ``phi_lin(u, v) = F(u) + G(v)`` with
``F(u) = (phi0(u) + A(u))/2`` and ``G(v) = (phi0(-v) - A(-v))/2`` where
``A`` is an antiderivative of ``phi1``.  ``F' = (phi1 + phi0')/2`` evaluated
at ``x + t`` and ``G' = (phi1 - phi0')/2`` evaluated at ``x - t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import QuadratureError
from .geometry import CartesianPoint

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InitialData:
    """Initial pair ``(phi0, phi1)`` given as vectorized callables.

    Both functions vanish for ``|x| > support_radius`` unless
    ``periodic_length`` is set, in which case they are periodic and the
    solver uses periodic boundaries.  ``phi1_antiderivative`` is optional;
    when absent, integrals of ``phi1`` fall back to adaptive quadrature.
    """

    phi0: Func
    phi1: Func
    phi0_prime: Func
    support_radius: float
    phi1_antiderivative: Optional[Func] = None
    periodic_length: Optional[float] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def time_reversed(self) -> "InitialData":
        """Data ``(phi0, -phi1)`` whose forward solution is ``phi(-t, x)``."""
        p1, a1 = self.phi1, self.phi1_antiderivative
        anti = None if a1 is None else (lambda x: -a1(x))
        return InitialData(self.phi0, lambda x: -p1(x), self.phi0_prime,
                           self.support_radius, anti, self.periodic_length,
                           self.name + "~reversed", dict(self.params))

    def integrate_phi1(self, a: float, b: float) -> float:
        """``int_a^b phi1``; exact when an antiderivative is known."""
        if self.phi1_antiderivative is not None:
            A = self.phi1_antiderivative
            return float(A(np.float64(b)) - A(np.float64(a)))
        return _quad(self.phi1, a, b, self.support_radius)

    def antiderivative(self, x: np.ndarray) -> np.ndarray:
        """``A(x) = int_0^x phi1`` at sorted-or-not sample points."""
        x = np.asarray(x, dtype=float)
        if self.phi1_antiderivative is not None:
            return np.asarray(self.phi1_antiderivative(x), dtype=float) \
                - float(self.phi1_antiderivative(np.float64(0.0)))
        flat = x.ravel()
        order = np.argsort(flat, kind="stable")
        xs = flat[order]
        # integrate outward from 0 on consecutive sample intervals
        out = np.empty_like(xs)
        k0 = int(np.searchsorted(xs, 0.0))
        acc, prev = 0.0, 0.0
        for k in range(k0, xs.size):
            acc += _quad(self.phi1, prev, xs[k], self.support_radius)
            prev = xs[k]
            out[k] = acc
        acc, prev = 0.0, 0.0
        for k in range(k0 - 1, -1, -1):
            acc -= _quad(self.phi1, xs[k], prev, self.support_radius)
            prev = xs[k]
            out[k] = acc
        res = np.empty_like(flat)
        res[order] = out
        return res.reshape(x.shape)

    def null_potentials(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(F(u), G(v))`` with ``phi_lin = F(u) + G(v)``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        F = 0.5 * (self.phi0(u) + self.antiderivative(u))
        G = 0.5 * (self.phi0(-v) - self.antiderivative(-v))
        return np.asarray(F, dtype=float), np.asarray(G, dtype=float)

    def sup_phi0(self, samples: int = 20001) -> float:
        R = self.support_radius if self.periodic_length is None else 0.5 * self.periodic_length
        xs = np.linspace(-R, R, samples)
        return float(np.max(np.abs(self.phi0(xs))))


def _quad(f: Func, a: float, b: float, support: float) -> float:
    if a == b:
        return 0.0
    lo, hi = (a, b) if a < b else (b, a)
    pts = [p for p in (-support, support) if lo < p < hi]
    with np.errstate(all="ignore"):
        val, err, info = integrate.quad(lambda s: float(f(np.float64(s))), lo, hi,
                                        epsabs=1e-10, epsrel=1e-12, limit=200,
                                        points=pts or None, full_output=1)[:3]
    if not math.isfinite(val) or not math.isfinite(err):
        raise QuadratureError(f"non-finite integrand on [{lo}, {hi}]")
    if err > 1e-8:
        raise QuadratureError(f"quadrature did not converge on [{lo}, {hi}] (err {err:.2e})")
    return val if a < b else -val


def dalembert(data: InitialData, p: CartesianPoint) -> float:
    """Free-wave value at ``p`` with the velocity integral by adaptive quadrature."""
    t, x = p.t, p.x
    a, b = x - t, x + t
    s0 = data.phi0(np.array([b, a], dtype=float))
    if not np.all(np.isfinite(s0)):
        raise QuadratureError("non-finite phi0 sample")
    integral = _quad(data.phi1, a, b, data.support_radius) if data.periodic_length is None \
        else _quad(data.phi1, a, b, math.inf)
    return 0.5 * (float(s0[0]) + float(s0[1])) + 0.5 * integral


def dalembert_grid(data: InitialData, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorized free-wave values through the null potentials."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    F, G = data.null_potentials(t + x, t - x)
    return F + G


def lin_u(data: InitialData, u) -> np.ndarray:
    """``phi_lin_u`` as a function of ``u`` alone: ``(phi1 + phi0')(u)/2``."""
    u = np.asarray(u, dtype=float)
    return 0.5 * (data.phi1(u) + data.phi0_prime(u))


def lin_v(data: InitialData, v) -> np.ndarray:
    """``phi_lin_v`` as a function of ``v`` alone: ``(phi1 - phi0')(-v)/2``."""
    y = -np.asarray(v, dtype=float)
    return 0.5 * (data.phi1(y) - data.phi0_prime(y))


def lin_null_derivs(data: InitialData, p: CartesianPoint) -> tuple[float, float]:
    """Null derivatives ``(phi_lin_u, phi_lin_v)`` of the free solution at ``p``."""
    return float(lin_u(data, p.t + p.x)), float(lin_v(data, p.t - p.x))


# nondegeneracy ------------------------------------------------------------

@dataclass(frozen=True)
class NondegeneracyReport:
    """Zero sets of the two null-derivative traces of the data.

    Intervals no wider than two sampling steps are isolated zeros; wider
    ones are the degenerate intervals where a null derivative vanishes.
    """

    plus_zero_intervals: list
    minus_zero_intervals: list
    component_count: int
    step: float

    @property
    def plus_degenerate(self) -> list:
        return [iv for iv in self.plus_zero_intervals if iv[1] - iv[0] > 2 * self.step]

    @property
    def minus_degenerate(self) -> list:
        return [iv for iv in self.minus_zero_intervals if iv[1] - iv[0] > 2 * self.step]


def zero_intervals(xs: np.ndarray, f: np.ndarray, tol: float) -> list:
    """Maximal runs where ``|f| <= tol`` plus sign changes between samples."""
    small = np.abs(f) <= tol
    out = []
    k, n = 0, xs.size
    while k < n:
        if small[k]:
            k2 = k
            while k2 + 1 < n and small[k2 + 1]:
                k2 += 1
            out.append((float(xs[k]), float(xs[k2])))
            k = k2 + 1
        else:
            if k + 1 < n and not small[k + 1] and np.sign(f[k]) != np.sign(f[k + 1]):
                out.append((float(xs[k]), float(xs[k + 1])))
            k += 1
    return out


def check_nondegeneracy(data: InitialData, interval: tuple[float, float],
                        tol: float = 1e-9, samples: int = 20001) -> NondegeneracyReport:
    """Locate the zero components of ``(phi1 +- phi0')/2`` on ``interval``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = interval
    xs = np.linspace(lo, hi, samples)
    step = (hi - lo) / (samples - 1)
    plus = 0.5 * (data.phi1(xs) + data.phi0_prime(xs))
    minus = 0.5 * (data.phi1(xs) - data.phi0_prime(xs))
    pz = zero_intervals(xs, np.asarray(plus, float), tol)
    mz = zero_intervals(xs, np.asarray(minus, float), tol)
    return NondegeneracyReport(pz, mz, len(pz) + len(mz), step)


# closed-form data families ------------------------------------------------

def _smoothstep(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """C-infinity step from 0 (y <= 0) to 1 (y >= 1) and its derivative."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ya = np.where(y > 0, y, 1.0)
        yb = np.where(y < 1, 1.0 - y, 1.0)
        ea = np.where(y > 0, np.exp(-1.0 / ya), 0.0)
        eb = np.where(y < 1, np.exp(-1.0 / yb), 0.0)
        s = ea / (ea + eb)
        dea = np.where(y > 0, ea / ya**2, 0.0)
        deb = np.where(y < 1, eb / yb**2, 0.0)
        ds = (dea * eb + ea * deb) / (ea + eb) ** 2
    return s, ds


def _taper(x: np.ndarray, core: float, width: float) -> tuple[np.ndarray, np.ndarray]:
    ax = np.abs(x)
    s, ds = _smoothstep((ax - core) / width)
    return 1.0 - s, -ds / width * np.sign(x)


def example13_data(delta: float = 1e-3, core_radius: float = 10.0,
                   taper_width: float = 1.0) -> InitialData:
    """Data of the free solution ``1 - delta((t-2)^2 + x^2 - 1)``.

    On ``|x| <= core_radius`` this is ``phi0 = 1 - delta(3 + x^2)`` and
    ``phi1 = 4 delta``.  Outside the core both are multiplied by a smooth
    cutoff reaching zero at ``core_radius + taper_width``.
    """
    if not (0 < delta <= 1e-3):
        raise ValueError("delta must lie in (0, 1e-3]")

    def base(x):
        return 1.0 - delta * (3.0 + x * x)

    def phi0(x):
        x = np.asarray(x, dtype=float)
        chi, _ = _taper(x, core_radius, taper_width)
        return chi * base(x)

    def phi0_prime(x):
        x = np.asarray(x, dtype=float)
        chi, dchi = _taper(x, core_radius, taper_width)
        return dchi * base(x) - chi * 2.0 * delta * x

    def phi1(x):
        x = np.asarray(x, dtype=float)
        chi, _ = _taper(x, core_radius, taper_width)
        return 4.0 * delta * chi

    def anti(x):
        x = np.asarray(x, dtype=float)
        out = 4.0 * delta * np.clip(x, -core_radius, core_radius)
        outer = np.abs(x) > core_radius
        if np.any(outer):
            flat = out.reshape(-1)
            xf = x.reshape(-1)
            for k in np.nonzero(outer.reshape(-1))[0]:
                s = abs(float(xf[k]))
                extra = _quad(lambda y: phi1(y), core_radius, s, math.inf)
                flat[k] += math.copysign(extra, xf[k])
            out = flat.reshape(x.shape)
        return out

    return InitialData(phi0, phi1, phi0_prime, core_radius + taper_width, anti,
                       name="example13",
                       params={"delta": delta, "core_radius": core_radius,
                               "taper_width": taper_width})


def _bump(y):
    """``(1 - y^2)^4`` on ``|y| <= 1``; three continuous derivatives."""
    y = np.asarray(y, dtype=float)
    w = np.clip(1.0 - y * y, 0.0, None)
    return w**4


def _bump_prime(y):
    y = np.asarray(y, dtype=float)
    w = np.clip(1.0 - y * y, 0.0, None)
    return -8.0 * y * w**3


def _bump_integral(y):
    """``int_{-1}^{y} (1 - s^2)^4 ds`` (constant outside [-1, 1])."""
    y = np.clip(np.asarray(y, dtype=float), -1.0, 1.0)

    def P(s):
        return s - 4 * s**3 / 3 + 6 * s**5 / 5 - 4 * s**7 / 7 + s**9 / 9

    return P(y) - P(-1.0)


def smalldata_data() -> InitialData:
    """Compactly supported data whose free solution stays within [-0.5, 0.5]."""

    def phi0(x):
        return 0.3 * _bump(np.asarray(x, dtype=float) / 3.0)

    def phi0_prime(x):
        return 0.1 * _bump_prime(np.asarray(x, dtype=float) / 3.0)

    def phi1(x):
        return 0.1 * _bump_prime((np.asarray(x, dtype=float) - 1.0) / 2.0)

    def anti(x):
        return 0.2 * _bump((np.asarray(x, dtype=float) - 1.0) / 2.0)

    return InitialData(phi0, phi1, phi0_prime, 3.0, anti, name="smalldata")


DEGENERATE_PULSE = 0.74


def degenerate_data(pulse: float = DEGENERATE_PULSE) -> InitialData:
    """A pure right-moving bump of height 0.9 plus a small left-moving pulse.

    ``(phi1 + phi0')/2`` vanishes identically outside [3, 5], so the
    u-derivative of the free solution is zero on wide intervals.  Where the
    bump meets the plateau left behind by the pulse the free solution
    exceeds 1.
    """

    def phi0(x):
        return 0.9 * _bump(np.asarray(x, dtype=float) / 2.0)

    def phi0_prime(x):
        return 0.45 * _bump_prime(np.asarray(x, dtype=float) / 2.0)

    def phi1(x):
        x = np.asarray(x, dtype=float)
        return -phi0_prime(x) + pulse * _bump(x - 4.0)

    def anti(x):
        x = np.asarray(x, dtype=float)
        return -(phi0(x) - 0.9) + pulse * _bump_integral(x - 4.0)

    return InitialData(phi0, phi1, phi0_prime, 5.0, anti, name="degenerate",
                       params={"pulse": pulse})


def spline_data(x: np.ndarray, phi0: np.ndarray, phi1: np.ndarray,
                support_radius: float, name: str = "spline") -> InitialData:
    """Cubic-spline data from samples, set to zero outside the support."""
    x = np.asarray(x, dtype=float)
    s0 = CubicSpline(x, np.asarray(phi0, dtype=float))
    s1 = CubicSpline(x, np.asarray(phi1, dtype=float))
    d0 = s0.derivative()
    i1 = s1.antiderivative()
    lo, hi = max(float(x[0]), -support_radius), min(float(x[-1]), support_radius)

    def inside(y):
        return (y >= lo) & (y <= hi)

    def f0(y):
        y = np.asarray(y, dtype=float)
        return np.where(inside(y), s0(np.clip(y, lo, hi)), 0.0)

    def f0p(y):
        y = np.asarray(y, dtype=float)
        return np.where(inside(y), d0(np.clip(y, lo, hi)), 0.0)

    def f1(y):
        y = np.asarray(y, dtype=float)
        return np.where(inside(y), s1(np.clip(y, lo, hi)), 0.0)

    def anti(y):
        y = np.asarray(y, dtype=float)
        return i1(np.clip(y, lo, hi))

    return InitialData(f0, f1, f0p, float(support_radius), anti, name=name)


def closed_form_data(phi0: Func, phi1: Func, phi0_prime: Func, support_radius: float,
                     periodic_length: Optional[float] = None,
                     phi1_antiderivative: Optional[Func] = None,
                     name: str = "custom") -> InitialData:
    """Wrap user callables; outside the support both functions read as 0."""
    if periodic_length is not None:
        return InitialData(phi0, phi1, phi0_prime, support_radius, phi1_antiderivative,
                           periodic_length, name)
    R = float(support_radius)

    def cut(f):
        def g(y):
            y = np.asarray(y, dtype=float)
            return np.where(np.abs(y) <= R, f(y), 0.0)
        return g

    return InitialData(cut(phi0), cut(phi1), cut(phi0_prime), R, phi1_antiderivative, None, name)

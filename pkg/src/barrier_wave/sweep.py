"""Exponent sweeps: convergence of the solver to the limit and bound checks.

Every bound that holds "up to a constant depending on the data" is tested
by fitting the constant at each exponent and comparing the fits.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import BarrierWaveError, ConfigError, ScenarioError
from .geometry import Diamond, Field2D, NullLattice
from .limit import construct_limit, example_oracle_field
from .linear import InitialData, lin_u
from .nlw import LatticeRequest, holder_check, solve_region
from .scenario import Scenario, canonical_json, resolve_scenario, scenario_from_dict

WORKERS_ENV = "BARRIER_WAVE_WORKERS"
HOLDER_SAMPLES = 20000


@dataclass(frozen=True)
class SweepPlan:
    """One sweep: a scenario, the exponents and the sampling lattice.

    ``dx_rule`` is ``"scaled"`` (``dx = dx_scale / p``) or ``"fixed"``
    (``dx = dx_scale``).  ``reference`` selects the limit to compare with:
    ``"limit"`` (characteristic construction) or ``"oracle"`` (closed form,
    example13 only).
    """

    scenario: Scenario
    p_list: tuple
    diamond: Diamond
    lattice_n: int = 257
    dx_rule: str = "scaled"
    dx_scale: float = 0.125
    cfl: float = 0.5
    reference: str = "limit"
    tau: float = 0.25
    eps: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_list)
        if not ps:
            raise ValueError("p_list must not be empty")
        if any(p <= 1 for p in ps):
            raise ValueError("every exponent must exceed 1")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("p_list must be strictly increasing")
        if self.dx_rule not in ("scaled", "fixed"):
            raise ValueError("dx_rule must be 'scaled' or 'fixed'")
        if self.reference not in ("limit", "oracle"):
            raise ValueError("reference must be 'limit' or 'oracle'")
        if self.lattice_n < 7:
            raise ValueError("lattice_n must be at least 7")
        object.__setattr__(self, "p_list", ps)

    def dx(self, p: float) -> float:
        return self.dx_scale / p if self.dx_rule == "scaled" else self.dx_scale

    def to_dict(self) -> dict:
        d = self.diamond
        return {"scenario": self.scenario.to_dict(), "p_list": list(self.p_list),
                "diamond": {"u0": d.u0, "v0": d.v0, "r": d.r}, "lattice_n": self.lattice_n,
                "dx_rule": self.dx_rule, "dx_scale": self.dx_scale, "cfl": self.cfl,
                "reference": self.reference, "tau": self.tau, "eps": self.eps,
                "seed": self.seed}


@dataclass(frozen=True)
class PerP:
    """Metrics of one solver run (``error`` set and metrics NaN on failure)."""

    p: float
    sup_distance_to_limit: float
    barrier_excess: float
    max_abs_phi: float
    max_first_null_deriv: float
    max_second_null_deriv_over_p: float
    apc_residual: float
    piece_bad_length: float
    piece_components: int
    piece_length_constant: float
    holder_constant: float
    steps: int
    error: str = ""


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-exponent metrics; ``fields`` holds sampled ``phi`` when kept."""

    p_list: tuple
    runs: tuple
    fitted_rate: float
    fields: tuple = ()

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.runs], dtype=float)

    def to_dict(self) -> dict:
        return {"p_list": list(self.p_list), "fitted_rate": self.fitted_rate,
                "runs": [asdict(r) for r in self.runs]}

    def dumps(self) -> str:
        return canonical_json(_json_safe(self.to_dict()))


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


SUMMARY_COLUMNS = ("p", "sup_distance_to_limit", "barrier_excess", "max_abs_phi",
                   "max_first_null_deriv", "max_second_null_deriv_over_p", "apc_residual",
                   "piece_bad_length", "piece_components", "piece_length_constant",
                   "holder_constant")


def log_p_over_p(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.log(p) / p


def fitted_rate(p_list: Sequence[float], distances: Sequence[float]) -> float:
    """Least-squares slope of ``log distance`` against ``log(log p / p)``."""
    p = np.asarray(p_list, dtype=float)
    d = np.asarray(distances, dtype=float)
    ok = np.isfinite(d) & (d > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(log_p_over_p(p[ok])), np.log(d[ok]), 1)[0])


# approximate conservation and piecewise checks ------------------------------

def _window_spread(q: np.ndarray, base_ok: np.ndarray, k: int) -> float:
    """Max over admissible nodes of ``|q(., v + r) - q(., v)|``, ``|r| <= k`` nodes."""
    if k < 1 or not base_ok.any():
        return 0.0
    fin = np.isfinite(q)
    hi = maximum_filter1d(np.where(fin, q, -np.inf), 2 * k + 1, axis=1, mode="nearest")
    lo = minimum_filter1d(np.where(fin, q, np.inf), 2 * k + 1, axis=1, mode="nearest")
    sel = base_ok & fin
    if not sel.any():
        return 0.0
    return float(max(np.max(hi[sel] - q[sel]), np.max(q[sel] - lo[sel])))


def check_apc(jets: dict, p: float, tau: float = 0.25) -> float:
    """Fitted constant of the approximate conservation of ``phi_u^2/2 -+ phi_uu/p``.

    ``jets`` maps ``"phi"``, ``"phi_u"``, ``"phi_uu"`` to fields on one
    lattice.  On every ``u``-line, from each node with ``phi >= -1/2`` the
    quantity ``phi_u^2/2 - phi_uu/p`` may move by at most ``C log p / p``
    within ``|dv| <= tau``; from nodes with ``phi <= 1/2`` the same holds
    for ``phi_u^2/2 + phi_uu/p``.  Returns the smallest such ``C``.
    """
    phi = jets["phi"].values
    pu = jets["phi_u"].values
    puu = jets["phi_uu"].values
    k = int(math.floor(tau / jets["phi"].lattice.h + 1e-9))
    with np.errstate(invalid="ignore"):
        upper = _window_spread(0.5 * pu**2 - puu / p, phi >= -0.5, k)
        lower = _window_spread(0.5 * pu**2 + puu / p, phi <= 0.5, k)
    return max(upper, lower) / float(log_p_over_p(p))


class PiecewiseReport(NamedTuple):
    """Exceptional sets on the nondegenerate part and bounds on the degenerate part.

    ``bad_length`` and ``components`` are maxima over ``v``-lines;
    ``u_ratio`` is ``max|phi_u|/eps`` and ``uu_ratio`` is
    ``max|phi_uu|/(eps^2 p)`` where ``|phi_lin_u| <= eps`` (0 if empty).
    """

    bad_length: float
    components: int
    u_ratio: float
    uu_ratio: float


def check_piecewise_lemma(jets: dict, data: InitialData, eps: float, p: float,
                          scale: Optional[float] = None) -> PiecewiseReport:
    """Measure where ``|phi_u|^2`` departs from ``|phi_lin_u|^2``.

    On ``u``-ranges with ``|phi_lin_u| >= eps`` a node is exceptional when
    ``| |phi_u|^2 - |phi_lin_u|^2 | > scale sqrt(log p / p)``; the report
    gives the largest total ``u``-length and number of runs of exceptional
    nodes on any ``v``-line.  ``scale`` defaults to ``max |phi_lin_u|^2``
    on the lattice, the energy scale of the data.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    lat = jets["phi"].lattice
    h = lat.h
    pu = jets["phi_u"].values
    puu = jets["phi_uu"].values
    lu = np.abs(lin_u(data, lat.u))
    nondeg = lu >= eps
    if scale is None:
        scale = float(np.max(lu)) ** 2
    thr = scale * math.sqrt(float(log_p_over_p(p)))
    with np.errstate(invalid="ignore"):
        bad = (np.abs(pu**2 - (lu**2)[:, None]) > thr) & nondeg[:, None]
    length = float(bad.sum(axis=0).max() * h) if bad.size else 0.0
    starts = bad.copy()
    starts[1:] &= ~bad[:-1]
    comps = int(starts.sum(axis=0).max()) if bad.size else 0
    deg = ~nondeg
    if deg.any():
        u_ratio = float(np.nanmax(np.abs(pu[deg]))) / eps
        uu_ratio = float(np.nanmax(np.abs(puu[deg]))) / (eps * eps * p)
    else:
        u_ratio = uu_ratio = 0.0
    return PiecewiseReport(length, comps, u_ratio, uu_ratio)


# running -------------------------------------------------------------------

def reference_field(plan: SweepPlan, lattice: NullLattice) -> Field2D:
    if plan.reference == "oracle":
        return example_oracle_field(lattice, plan.scenario.initial.get("delta", 1e-3),
                                    extended=True)[0]
    state, _ = construct_limit(plan.scenario.initial_data(), lattice)
    return state.field()


def default_eps(data: InitialData, lattice: NullLattice) -> float:
    """Half the largest ``|phi_lin_u|`` on the lattice."""
    return 0.5 * float(np.max(np.abs(lin_u(data, lattice.u))))


def _run_one(plan: SweepPlan, p: float, ref_values: np.ndarray,
             keep_field: bool = False) -> tuple:
    data = plan.scenario.initial_data()
    lat = NullLattice(plan.diamond, plan.lattice_n)
    try:
        res = solve_region(data, p, plan.dx(p), [LatticeRequest(lat, jets=True)], cfl=plan.cfl,
                           region=plan.diamond)
    except BarrierWaveError as exc:
        nan = math.nan
        err = f"{type(exc).__name__}: {exc}"
        return PerP(p, nan, nan, nan, nan, nan, nan, nan, 0, nan, nan, 0, err), None
    jets = res.fields[0]
    phi = jets["phi"].values
    dist = float(np.nanmax(np.abs(phi - ref_values)))
    diag = res.diag
    amax = diag["max_abs_phi"]
    excess = (amax - 1.0) * p - math.log(p)
    d1 = max(diag["max_phi_u"], diag["max_phi_v"])
    d2 = max(diag["max_phi_uu"], diag["max_phi_vv"]) / p
    apc = check_apc(jets, p, plan.tau)
    eps = plan.eps if plan.eps is not None else default_eps(data, lat)
    pw = check_piecewise_lemma(jets, data, eps, p)
    const = pw.bad_length / float(log_p_over_p(p))
    holder = holder_check(jets["phi"], HOLDER_SAMPLES, plan.seed)
    run = PerP(p, dist, excess, amax, d1, d2, apc, pw.bad_length, pw.components, const,
               holder, res.steps)
    return run, (jets["phi"] if keep_field else None)


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count: the environment variable wins over the argument."""
    env = os.environ.get(WORKERS_ENV)
    if env is not None and env.strip():
        n = int(env)
    elif workers is not None:
        n = int(workers)
    else:
        n = 1
    if n < 1:
        raise ValueError("worker count must be at least 1")
    return n


def run_sweep(plan: SweepPlan, workers: Optional[int] = None,
              keep_fields: bool = False) -> ConvergenceReport:
    """Run the solver at every exponent and measure all metrics.

    A run that fails (blow-up guard, bad lattice) is reported with NaN
    metrics and its error message; the sweep continues.  Results do not
    depend on the number of workers.
    """
    lat = NullLattice(plan.diamond, plan.lattice_n)
    ref = reference_field(plan, lat).values
    n = resolve_workers(workers)
    if n == 1 or len(plan.p_list) == 1:
        out = [_run_one(plan, p, ref, keep_fields) for p in plan.p_list]
    else:
        with ProcessPoolExecutor(max_workers=min(n, len(plan.p_list))) as ex:
            futs = [ex.submit(_run_one, plan, p, ref, keep_fields) for p in plan.p_list]
            out = [f.result() for f in futs]
    runs = tuple(r for r, _ in out)
    fields = tuple(f for _, f in out) if keep_fields else ()
    dist = [r.sup_distance_to_limit for r in runs]
    return ConvergenceReport(plan.p_list, runs, fitted_rate(plan.p_list, dist), fields)


# plan files -------------------------------------------------------------------

_PLAN_KEYS = {"scenario", "p_list", "diamond", "lattice_n", "dx_rule", "dx_scale", "cfl",
              "reference", "tau", "eps", "seed"}


def plan_from_dict(raw, base_dir: Optional[str] = None) -> SweepPlan:
    """Validate a decoded plan object.

    ``scenario`` is a builtin name, a scenario file path (relative to
    ``base_dir``) or an inline scenario object; ``diamond`` defaults to the
    scenario's.  Raises :class:`ConfigError` naming every bad key.
    """
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "must be an object")])
    problems = [(k, "unknown key") for k in sorted(set(raw) - _PLAN_KEYS)]
    sc = None
    ref = raw.get("scenario")
    try:
        if isinstance(ref, dict):
            sc = scenario_from_dict(ref)
        elif isinstance(ref, str) and ref:
            path = ref if base_dir is None or os.path.isabs(ref) else os.path.join(base_dir, ref)
            sc = resolve_scenario(ref if not os.path.exists(path) else path)
        else:
            problems.append(("scenario", "missing: give a builtin name, a path or an object"))
    except ScenarioError as exc:
        problems.extend((f"scenario.{k}", m) for k, m in exc.problems)
    p_list = raw.get("p_list")
    if not (isinstance(p_list, list) and p_list
            and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in p_list)):
        problems.append(("p_list", "missing or not a nonempty list of numbers"))
    kwargs = {}
    for key, typ in (("lattice_n", int), ("dx_rule", str), ("dx_scale", float), ("cfl", float),
                     ("reference", str), ("tau", float), ("eps", float), ("seed", int)):
        if key not in raw or (key == "eps" and raw[key] is None):
            continue
        val = raw[key]
        ok = (isinstance(val, str) if typ is str else
              isinstance(val, int) and not isinstance(val, bool) if typ is int else
              isinstance(val, (int, float)) and not isinstance(val, bool))
        if not ok:
            problems.append((key, f"must be of type {typ.__name__}, got {val!r}"))
        else:
            kwargs[key] = float(val) if typ is float else val
    diamond = None
    d = raw.get("diamond")
    if d is not None:
        try:
            diamond = Diamond(float(d["u0"]), float(d["v0"]), float(d["r"]))
        except (TypeError, KeyError, ValueError, BarrierWaveError):
            problems.append(("diamond", "must be an object with numbers u0, v0, r (r > 0)"))
    if problems:
        raise ConfigError(problems)
    try:
        return SweepPlan(sc, tuple(p_list), diamond or sc.diamond, **kwargs)
    except ValueError as exc:
        raise ConfigError([("plan", str(exc))]) from exc


def parse_plan(path) -> SweepPlan:
    """Read and validate a sweep plan file (JSON)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([("<file>", f"cannot read {path}: {exc.strerror}")]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("<file>", f"malformed JSON at line {exc.lineno}: {exc.msg}")]) from exc
    return plan_from_dict(raw, os.path.dirname(os.path.abspath(path)))


# acceptance-style summaries -------------------------------------------------

def inversions(values: Sequence[float]) -> list:
    """Indices ``k`` with ``values[k+1] > values[k]``."""
    v = np.asarray(values, dtype=float)
    return [int(k) for k in np.flatnonzero(v[1:] > v[:-1])]


def spread_ratio(values: Sequence[float]) -> float:
    """``max / min`` of positive finite values (``inf`` if any is not)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
        return math.inf
    return float(v.max() / v.min())

"""Scenario files: named initial data plus a default diamond.

A scenario is stored as canonical JSON (sorted keys, two-space indent,
trailing newline), so writing a parsed scenario reproduces the file byte
for byte.  Data kinds:

``example13``
    ``delta``, ``support_radius`` (radius of the closed-form core) and
    ``taper_width`` (smooth cutoff beyond the core).
``smalldata``
    No parameters; the free solution stays within ``[-0.5, 0.5]``.
``degenerate``
    ``pulse``: height of the left-moving pulse.
``samples``
    ``x``, ``phi0``, ``phi1`` sample lists (cubic spline) and
    ``support_radius``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioError
from .geometry import Diamond
from .linear import (DEGENERATE_PULSE, InitialData, degenerate_data, example13_data,
                     smalldata_data, spline_data)

KINDS = ("example13", "smalldata", "degenerate", "samples")
_KIND_KEYS = {
    "example13": {"delta": float, "support_radius": float, "taper_width": float},
    "smalldata": {},
    "degenerate": {"pulse": float},
    "samples": {"x": list, "phi0": list, "phi1": list, "support_radius": float},
}
_OPTIONAL = {"example13": {"delta": 1e-3, "support_radius": 10.0, "taper_width": 1.0},
             "degenerate": {"pulse": DEGENERATE_PULSE}}


@dataclass(frozen=True)
class Scenario:
    name: str
    initial: dict
    diamond: Diamond
    notes: str = ""
    _data_cache: list = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = self.diamond
        return {"name": self.name, "initial": dict(self.initial),
                "diamond": {"u0": d.u0, "v0": d.v0, "r": d.r}, "notes": self.notes}

    def dumps(self) -> str:
        return canonical_json(self.to_dict())

    def config_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def initial_data(self) -> InitialData:
        """Build (once) the :class:`InitialData` described by ``initial``."""
        if not self._data_cache:
            self._data_cache.append(_build_data(self.initial))
        return self._data_cache[0]

    def __getstate__(self):
        return {"name": self.name, "initial": self.initial, "diamond": self.diamond,
                "notes": self.notes}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "_data_cache", [])


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _build_data(initial: dict) -> InitialData:
    kind = initial["kind"]
    if kind == "example13":
        return example13_data(initial["delta"], initial["support_radius"], initial["taper_width"])
    if kind == "smalldata":
        return smalldata_data()
    if kind == "degenerate":
        return degenerate_data(initial["pulse"])
    return spline_data(initial["x"], initial["phi0"], initial["phi1"],
                       initial["support_radius"], name="samples")


def _number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _validate_initial(raw, problems: list) -> dict:
    if not isinstance(raw, dict):
        problems.append(("initial", "must be an object"))
        return {}
    kind = raw.get("kind")
    if kind not in KINDS:
        problems.append(("initial.kind", f"must be one of {', '.join(KINDS)}, got {kind!r}"))
        return {}
    spec = _KIND_KEYS[kind]
    out = {"kind": kind}
    defaults = _OPTIONAL.get(kind, {})
    for key in sorted(set(raw) - {"kind"} - set(spec)):
        problems.append((f"initial.{key}", f"unknown key for kind {kind!r}"))
    for key, typ in spec.items():
        if key not in raw:
            if key in defaults:
                out[key] = defaults[key]
            else:
                problems.append((f"initial.{key}", "missing"))
            continue
        val = raw[key]
        if typ is float:
            if not _number(val):
                problems.append((f"initial.{key}", f"must be a finite number, got {val!r}"))
                continue
            out[key] = float(val)
        else:
            if not (isinstance(val, list) and val and all(_number(e) for e in val)):
                problems.append((f"initial.{key}", "must be a nonempty list of finite numbers"))
                continue
            out[key] = [float(e) for e in val]
    if kind == "example13" and "delta" in out and not 0 < out["delta"] <= 1e-3:
        problems.append(("initial.delta", "must lie in (0, 1e-3]"))
    for key in ("support_radius", "taper_width"):
        if key in out and not out[key] > 0:
            problems.append((f"initial.{key}", "must be positive"))
    if kind == "samples" and all(k in out for k in ("x", "phi0", "phi1")):
        n = len(out["x"])
        if len(out["phi0"]) != n or len(out["phi1"]) != n:
            problems.append(("initial.phi0", "x, phi0 and phi1 must have equal lengths"))
        elif n < 4:
            problems.append(("initial.x", "need at least 4 samples"))
        elif any(b <= a for a, b in zip(out["x"], out["x"][1:])):
            problems.append(("initial.x", "must be strictly increasing"))
    return out


def scenario_from_dict(raw) -> Scenario:
    """Validate a decoded scenario object.

    Raises
    ------
    ScenarioError
        Listing every offending field, including data that touch the
        barriers (``sup |phi0| >= 1``).
    """
    problems = []
    if not isinstance(raw, dict):
        raise ScenarioError([("<root>", "must be an object")])
    for key in sorted(set(raw) - {"name", "initial", "diamond", "notes"}):
        problems.append((key, "unknown key"))
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        problems.append(("name", "missing or not a nonempty string"))
    notes = raw.get("notes", "")
    if not isinstance(notes, str):
        problems.append(("notes", "must be a string"))
    if "initial" not in raw:
        problems.append(("initial", "missing"))
        initial = {}
    else:
        initial = _validate_initial(raw["initial"], problems)
    diamond = None
    d = raw.get("diamond")
    if not isinstance(d, dict):
        problems.append(("diamond", "missing or not an object with u0, v0, r"))
    else:
        for key in sorted(set(d) - {"u0", "v0", "r"}):
            problems.append((f"diamond.{key}", "unknown key"))
        vals = {}
        for key in ("u0", "v0", "r"):
            if not _number(d.get(key)):
                problems.append((f"diamond.{key}", "missing or not a finite number"))
            else:
                vals[key] = float(d[key])
        if len(vals) == 3:
            if vals["r"] > 0:
                diamond = Diamond(vals["u0"], vals["v0"], vals["r"])
            else:
                problems.append(("diamond.r", "must be positive"))
    if problems:
        raise ScenarioError(problems)
    sc = Scenario(name, initial, diamond, notes)
    sup = sc.initial_data().sup_phi0()
    if not sup < 1.0:
        raise ScenarioError([("initial", f"sup|phi0| = {sup:.17g} must be < 1 (strict barrier condition)")])
    return sc


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError([("<file>", f"cannot read {path}: {exc.strerror}")]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([("<file>", f"malformed JSON at line {exc.lineno}: {exc.msg}")]) from exc
    return scenario_from_dict(raw)


def write_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(sc.dumps())


def builtin_scenario(name: str) -> Scenario:
    """The scenarios shipped with the package."""
    if name == "example13":
        raw = {"name": "example13",
               "initial": {"kind": "example13", "delta": 1e-3, "support_radius": 10.0,
                           "taper_width": 1.0},
               "diamond": {"u0": 10.0, "v0": 10.0, "r": 20.0},
               "notes": "free solution 1 - delta((t-2)^2 + x^2 - 1) near the +1 barrier"}
    elif name == "smalldata":
        raw = {"name": "smalldata", "initial": {"kind": "smalldata"},
               "diamond": {"u0": 4.0, "v0": 4.0, "r": 8.0},
               "notes": "sub-barrier data; the nonlinearity never activates"}
    elif name == "degenerate":
        raw = {"name": "degenerate", "initial": {"kind": "degenerate", "pulse": DEGENERATE_PULSE},
               "diamond": {"u0": 8.0, "v0": 2.0, "r": 8.0},
               "notes": "u-derivative of the free solution vanishes on wide intervals"}
    else:
        raise ScenarioError([("name", f"unknown builtin scenario {name!r}; "
                                      f"choose from example13, smalldata, degenerate")])
    return scenario_from_dict(raw)


BUILTINS = ("example13", "smalldata", "degenerate")


def resolve_scenario(ref: str) -> Scenario:
    """A builtin name or a path to a scenario file."""
    if ref in BUILTINS:
        return builtin_scenario(ref)
    return parse_scenario(ref)

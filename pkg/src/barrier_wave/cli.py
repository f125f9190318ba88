"""``barrier-wave`` command line.

Exit codes: 0 success, 1 domain error (bad data, failed numerics, missing
files), 2 usage error.  Every output directory receives one
``metadata.json``; all numeric CSVs use 17 significant digits.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from ._backend import BACKEND
from .errors import BarrierWaveError, LatticeError
from .geometry import CSV_FMT, Diamond, Field2D, NullLattice
from .scenario import canonical_json, resolve_scenario

METADATA_NAME = "metadata.json"


class UsageError(Exception):
    """Bad command-line arguments (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# metadata ----------------------------------------------------------------------

@dataclass(frozen=True)
class RunMetadata:
    command_line: list
    config_hash: str
    tool_version: str
    backend: str
    started: str
    finished: str
    tolerances: dict

    def write(self, directory) -> Path:
        path = Path(directory) / METADATA_NAME
        path.write_text(canonical_json(asdict(self)))
        return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _finish(args, config: dict, tolerances: dict, directory, started: str) -> None:
    meta = RunMetadata(list(args._argv), config_hash(config), __version__, BACKEND, started,
                       _now(), tolerances)
    meta.write(directory)


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _csv_dir(path) -> Path:
    parent = Path(path).resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    return parent


def _write_columns(path, header: str, cols) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    np.savetxt(path, data, fmt=CSV_FMT, delimiter=",", header=header, comments="")


def _parse_diamond(text: str) -> Diamond:
    try:
        u0, v0, r = (float(s) for s in text.split(","))
    except ValueError:
        raise UsageError(f"--diamond expects u0,v0,r, got {text!r}") from None
    return Diamond(u0, v0, r)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _print_json(obj) -> None:
    sys.stdout.write(canonical_json(_json_safe(obj)))


# subcommands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .nlw import blowup_threshold, solve_on_diamond
    started = _now()
    sc = resolve_scenario(args.scenario)
    diamond = _parse_diamond(args.diamond) if args.diamond else sc.diamond
    dx = args.dx if args.dx is not None else 1.0 / (8.0 * args.p)
    field, trace = solve_on_diamond(sc.initial_data(), args.p, diamond, args.n, dx, args.cfl,
                                    triangle=args.forward_only)
    out = _out_dir(args.out)
    field.write_csv(out / "field.csv")
    _write_columns(out / "energy.csv", "t,total,local",
                   [trace.times, trace.total_energy, trace.local_energy])
    config = {"command": "simulate", "scenario": sc.to_dict(), "p": args.p, "dx": dx,
              "cfl": args.cfl, "lattice": NullLattice(diamond, args.n).to_dict(),
              "forward_only": args.forward_only}
    _finish(args, config, {"blowup_threshold": blowup_threshold(args.p)}, out, started)
    return 0


def _write_property_report(rep, path) -> None:
    Path(path).write_text(canonical_json(_json_safe(rep.to_dict())))


def cmd_limit(args) -> int:
    from . import limit as lm
    started = _now()
    if args.check is not None:
        if args.scenario is None or args.oracle is not None:
            raise UsageError("limit --check needs --scenario and no --oracle")
        return _check_field(args, args.check, started)
    if (args.scenario is None) == (args.oracle is None):
        raise UsageError("limit needs exactly one of --scenario, --oracle, --check")
    if args.out is None:
        raise UsageError("limit needs --out")
    out = _out_dir(args.out)
    if args.oracle is not None:
        diamond = _parse_diamond(args.diamond) if args.diamond else lm.EXAMPLE_DIAMOND
        lat = NullLattice(diamond, args.n)
        field, reg = lm.example_oracle_field(lat, args.delta, extended=args.extended)
        field.write_csv(out / "field.csv")
        U, V = lat.mesh()
        _write_columns(out / "regions.csv", "u,v,region", [U.ravel(), V.ravel(), reg.ravel()])
        config = {"command": "limit", "oracle": args.oracle, "delta": args.delta,
                  "lattice": lat.to_dict(), "extended": args.extended}
        _finish(args, config, {}, out, started)
        return 0
    sc = resolve_scenario(args.scenario)
    diamond = _parse_diamond(args.diamond) if args.diamond else sc.diamond
    lat = NullLattice(diamond, args.n)
    data = sc.initial_data()
    state, defect = lm.construct_limit(data, lat, forward_only=args.forward_only)
    field = state.field()
    field.write_csv(out / "field.csv")
    defect.write_csv(out / "defect.csv")
    rep = lm.check_properties(field, data)
    _write_property_report(rep, out / "properties.json")
    config = {"command": "limit", "scenario": sc.to_dict(), "lattice": lat.to_dict(),
              "forward_only": args.forward_only}
    _finish(args, config, _limit_tolerances(lat.h, rep.lipschitz_constant), out, started)
    return 0


def _limit_tolerances(h: float, lip: float) -> dict:
    from . import limit as lm
    return {"mass_floor": lm.default_mass_floor(h), "support_eps": 4.0 * h * lip,
            "reflection_tol": 10.0 * h * lip,
            "overshoot_limit": lm.OVERSHOOT_FACTOR * h}


def _check_field(args, field_path, started) -> int:
    from . import limit as lm
    sc = resolve_scenario(args.scenario)
    try:
        field = Field2D.read_csv(field_path)
    except OSError as exc:
        raise LatticeError(f"cannot read {field_path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise LatticeError(f"cannot parse {field_path}: {exc}") from exc
    rep = lm.check_properties(field, sc.initial_data(), margin=args.margin)
    _print_json(rep.to_dict())
    if args.out is not None:
        out = _out_dir(args.out)
        _write_property_report(rep, out / "properties.json")
        digest = hashlib.sha256(Path(field_path).read_bytes()).hexdigest()
        config = {"command": "check", "scenario": sc.to_dict(), "field_sha256": digest,
                  "margin": args.margin}
        _finish(args, config, _limit_tolerances(field.lattice.h, rep.lipschitz_constant),
                out, started)
    return 0


def cmd_check(args) -> int:
    return _check_field(args, args.field, _now())


def cmd_ode(args) -> int:
    from . import ode
    started = _now()
    traj = ode.integrate_ode(args.p, args.phi0, args.phi1, args.t_end, args.dt,
                             stride=args.stride, drift_tol=args.drift_tol)
    directory = _csv_dir(args.out)
    _write_columns(args.out, "t,phi,phi_t,hamiltonian",
                   [traj.t, traj.phi, traj.phi_t, traj.hamiltonian])
    config = {"command": "ode", "p": args.p, "phi0": args.phi0, "phi1": args.phi1,
              "t_end": args.t_end, "dt": args.dt, "stride": args.stride,
              "output": os.path.basename(args.out)}
    _finish(args, config, {"drift_tol": args.drift_tol}, directory, started)
    return 0


def cmd_liouville(args) -> int:
    from . import liouville as lv
    started = _now()
    if args.check is not None:
        if args.input is None:
            raise UsageError("liouville --check needs --in")
        try:
            field = Field2D.read_csv(args.input)
        except OSError as exc:
            raise LatticeError(f"cannot read {args.input}: {exc.strerror}") from exc
        if args.check == "residual":
            result = {"residual": lv.liouville_residual(field)}
        elif args.check == "conservation":
            du, dv = lv.conservation_residual(field)
            result = {"conservation_u": du, "conservation_v": dv}
        else:
            if args.p is None:
                raise UsageError("liouville --check almost needs --p")
            result = {"almost_conservation": lv.almost_conservation_residual(field, args.p)}
        _print_json(result)
        return 0
    if args.out is None:
        raise UsageError("liouville needs --out (or --check)")
    diamond = _parse_diamond(args.diamond) if args.diamond else Diamond(1.0, 1.0, 2.0)
    lat = NullLattice(diamond, args.n)
    if args.family == "exp":
        field = lv.liouville_field(lv.exponential_family(args.a, args.t0), lat)
    elif args.family == "rational":
        field = lv.liouville_field(lv.rational_family(), lat)
    else:
        prof = lv.LorentzProfile(args.a, args.speed, args.t0, args.x0)
        field = lv.lorentz_field(prof, lat)
    directory = _csv_dir(args.out)
    field.write_csv(args.out)
    config = {"command": "liouville", "family": args.family, "a": args.a, "t0": args.t0,
              "speed": args.speed, "x0": args.x0, "lattice": lat.to_dict(),
              "output": os.path.basename(args.out)}
    _finish(args, config, {}, directory, started)
    return 0


def cmd_sweep(args) -> int:
    from . import sweep as sw
    started = _now()
    plan = sw.parse_plan(args.plan)
    if args.out is None:
        raise UsageError("sweep needs --out")
    workers = sw.resolve_workers(args.workers)
    rep = sw.run_sweep(plan, workers, keep_fields=True)
    out = _out_dir(args.out)
    (out / "report.json").write_text(rep.dumps())
    rows = [[getattr(r, c) for c in sw.SUMMARY_COLUMNS] for r in rep.runs]
    _write_columns(out / "summary.csv", ",".join(sw.SUMMARY_COLUMNS),
                   np.asarray(rows, dtype=float).T)
    for r, f in zip(rep.runs, rep.fields):
        if f is not None:
            f.write_csv(out / f"field_p{r.p:g}.csv")
    config = {"command": "sweep", "plan": plan.to_dict()}
    _finish(args, config, {"tau": plan.tau, "eps": plan.eps, "workers": workers}, out, started)
    return 0


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="barrier-wave",
                 description="Large-exponent defocusing wave equation: solver, limit, checks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run the finite-difference solver")
    s.add_argument("--scenario", required=True, help="builtin name or scenario file")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--dx", type=float, help="grid step (default 1/(8p))")
    s.add_argument("--cfl", type=float, default=0.5)
    s.add_argument("--diamond", help="u0,v0,r (default: the scenario's)")
    s.add_argument("--n", type=int, default=257, help="lattice nodes per side")
    s.add_argument("--forward-only", action="store_true", help="sample t >= 0 only")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("limit", help="construct the limit field or the example oracle")
    s.add_argument("--scenario")
    s.add_argument("--oracle", choices=["example"])
    s.add_argument("--delta", type=float, default=1e-3)
    s.add_argument("--extended", action="store_true", help="oracle also for t < 0")
    s.add_argument("--check", metavar="FIELD_CSV")
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--diamond")
    s.add_argument("--n", type=int, default=513)
    s.add_argument("--forward-only", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("ode", help="integrate the spatially homogeneous model")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--phi0", type=float, required=True)
    s.add_argument("--phi1", type=float, required=True)
    s.add_argument("--t-end", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--drift-tol", type=float, default=1e-6)
    s.add_argument("--out", required=True, help="CSV path")
    s.set_defaults(func=cmd_ode)

    s = sub.add_parser("liouville", help="closed-form solutions and residual checks")
    s.add_argument("--family", choices=["exp", "rational", "lorentz"], default="exp")
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--speed", type=float, default=0.0)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--diamond")
    s.add_argument("--n", type=int, default=129)
    s.add_argument("--check", choices=["residual", "conservation", "almost"])
    s.add_argument("--in", dest="input", metavar="FIELD_CSV")
    s.add_argument("--p", type=float)
    s.add_argument("--out", help="CSV path")
    s.set_defaults(func=cmd_liouville)

    s = sub.add_parser("sweep", help="exponent sweep with convergence metrics")
    s.add_argument("--plan", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("check", help="property report of a field CSV")
    s.add_argument("--field", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_check)
    return ap


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("barrier-wave: error: a subcommand is required")
        args._argv = ["barrier-wave"] + argv
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except (BarrierWaveError, ValueError, OSError) as exc:
        print(f"barrier-wave: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

import json
import math

import numpy as np
import pytest

from barrier_wave.errors import ConfigError
from barrier_wave.geometry import Diamond, Field2D, NullLattice, sample_function
from barrier_wave.linear import lin_u, lin_v
from barrier_wave.nlw import LatticeRequest, solve_region
from barrier_wave.scenario import builtin_scenario
from barrier_wave.sweep import (SweepPlan, check_apc, check_piecewise_lemma, default_eps,
                                fitted_rate, inversions, parse_plan, plan_from_dict,
                                resolve_workers, run_sweep, spread_ratio)


def free_wave_jets(data, lat):
    """Exact jet of the free solution (no nonlinearity anywhere)."""
    U, V = lat.mesh()
    F, G = data.null_potentials(U, V)
    h = 1e-5
    lu, lv = lin_u(data, U), lin_v(data, V)
    luu = (lin_u(data, U + h) - lin_u(data, U - h)) / (2 * h)
    lvv = (lin_v(data, V + h) - lin_v(data, V - h)) / (2 * h)
    return {k: Field2D(lat, v) for k, v in
            (("phi", F + G), ("phi_u", lu), ("phi_v", lv), ("phi_uu", luu), ("phi_vv", lvv))}


@pytest.fixture(scope="module")
def smalldata_report():
    sc = builtin_scenario("smalldata")
    plan = SweepPlan(sc, (15, 63, 255), sc.diamond, lattice_n=65, dx_rule="fixed",
                     dx_scale=1 / 512)
    return run_sweep(plan)


def test_sub_barrier_sweep_matches_free_wave(smalldata_report):
    assert all(r.error == "" for r in smalldata_report.runs)
    assert np.all(smalldata_report.column("sup_distance_to_limit") <= 1e-6)
    assert np.all(smalldata_report.column("piece_bad_length") == 0)


def test_linear_regime_conservation_exact():
    sc = builtin_scenario("smalldata")
    lat = NullLattice(sc.diamond, 65)
    jets = free_wave_jets(sc.initial_data(), lat)
    assert check_apc(jets, 63.0) <= 1e-12
    rep = check_piecewise_lemma(jets, sc.initial_data(), 0.01, 63.0)
    assert rep.bad_length == 0 and rep.components == 0


def test_apc_uses_lower_branch_below_one_half():
    p = 31.0
    lat = NullLattice(Diamond(1.0, 1.0, 1.0), 33)
    U, V = lat.mesh()
    g = np.sin(3 * U + 2 * V)
    jets = {"phi": Field2D(lat, np.full(U.shape, -0.8)), "phi_u": Field2D(lat, g),
            "phi_uu": Field2D(lat, p * (1.0 - 0.5 * g**2))}
    # phi_u^2/2 + phi_uu/p is constant; the upper-branch quantity is not,
    # but nodes with phi < -1/2 are outside its range
    assert check_apc(jets, p, tau=0.25) <= 1e-12
    jets["phi"] = Field2D(lat, np.full(U.shape, 0.0))
    assert check_apc(jets, p, tau=0.25) > 1.0


def test_piecewise_requires_positive_eps():
    sc = builtin_scenario("smalldata")
    lat = NullLattice(sc.diamond, 9)
    with pytest.raises(ValueError):
        check_piecewise_lemma(free_wave_jets(sc.initial_data(), lat), sc.initial_data(), 0.0, 9.0)


def test_degenerate_range_stays_flat_uniformly_in_p():
    sc = builtin_scenario("degenerate")
    data = sc.initial_data()
    lat = NullLattice(sc.diamond, 65)
    eps = default_eps(data, lat)
    ratios = []
    for p in (15.0, 63.0):
        res = solve_region(data, p, 1 / (8 * p), [LatticeRequest(lat, jets=True)],
                           region=sc.diamond)
        ratios.append(check_piecewise_lemma(res.fields[0], data, eps, p).u_ratio)
    assert ratios[1] <= 3 * ratios[0]


def test_fitted_rate_recovers_model():
    p = np.array([15.0, 31.0, 63.0, 127.0])
    assert fitted_rate(p, 2.5 * np.log(p) / p) == pytest.approx(1.0, abs=1e-12)
    assert math.isnan(fitted_rate([15.0], [0.1]))


def test_inversions_and_spread():
    assert inversions([3.0, 2.0, 2.5, 1.0]) == [1]
    assert spread_ratio([1.0, 4.0, 2.0]) == 4.0
    assert spread_ratio([1.0, 0.0]) == math.inf


def test_plan_validation():
    sc = builtin_scenario("smalldata")
    with pytest.raises(ValueError):
        SweepPlan(sc, (63, 15), sc.diamond)
    with pytest.raises(ValueError):
        SweepPlan(sc, (1.0, 15), sc.diamond)
    with pytest.raises(ValueError):
        SweepPlan(sc, (15,), sc.diamond, dx_rule="adaptive")


def test_plan_file_parsing(tmp_path):
    path = tmp_path / "plan.json"
    path.write_text(json.dumps({"scenario": "example13", "p_list": [15, 31], "lattice_n": 33,
                                "reference": "oracle"}))
    plan = parse_plan(path)
    assert plan.p_list == (15.0, 31.0)
    assert plan.diamond == Diamond(10.0, 10.0, 20.0)
    assert plan.dx(15.0) == pytest.approx(1 / 120)


def test_plan_errors_name_keys(tmp_path):
    with pytest.raises(ConfigError) as exc:
        plan_from_dict({"scenario": "smalldata", "p_list": [15], "lattice": 3, "cfl": "big"})
    keys = [k for k, _ in exc.value.problems]
    assert "lattice" in keys and "cfl" in keys
    with pytest.raises(ConfigError) as exc:
        plan_from_dict({"scenario": {"name": "x", "initial": {"kind": "smalldata"}},
                        "p_list": [15]})
    assert any(k.startswith("scenario.diamond") for k, _ in exc.value.problems)
    with pytest.raises(ConfigError):
        parse_plan(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_plan(bad)


def test_worker_count_environment_override(monkeypatch):
    monkeypatch.delenv("BARRIER_WAVE_WORKERS", raising=False)
    assert resolve_workers(None) == 1
    assert resolve_workers(3) == 3
    monkeypatch.setenv("BARRIER_WAVE_WORKERS", "2")
    assert resolve_workers(5) == 2
    monkeypatch.setenv("BARRIER_WAVE_WORKERS", "0")
    with pytest.raises(ValueError):
        resolve_workers(1)


def test_reports_independent_of_worker_count(monkeypatch):
    monkeypatch.delenv("BARRIER_WAVE_WORKERS", raising=False)
    sc = builtin_scenario("degenerate")
    plan = SweepPlan(sc, (15, 31), sc.diamond, lattice_n=33)
    a = run_sweep(plan, workers=1)
    b = run_sweep(plan, workers=2)
    assert a.dumps() == b.dumps()


def test_failed_run_is_reported_not_raised():
    sc = builtin_scenario("degenerate")
    # cfl = 1 with a coarse grid lets the reflection layer blow up
    plan = SweepPlan(sc, (255,), sc.diamond, lattice_n=9, dx_rule="fixed", dx_scale=0.25,
                     cfl=1.0)
    rep = run_sweep(plan)
    run = rep.runs[0]
    assert run.error.startswith("BlowUpError")
    assert math.isnan(run.sup_distance_to_limit)
    assert json.loads(rep.dumps())["runs"][0]["sup_distance_to_limit"] is None

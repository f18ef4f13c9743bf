"""Bidding value harness: LP structure, newsvendor and collapse oracles,
oracle dominance, battery effects, and the benchmark runner."""
import json
from datetime import date, timedelta

import numpy as np
import pytest

from scendiff.errors import (
    CoverageError,
    DimensionError,
    ModelValidationError,
    ParameterError,
)
from scendiff.value import (
    RetailerModel,
    ValueReport,
    build_two_stage_lp,
    deterministic_bids,
    extract_bids,
    extract_schedule,
    oracle_profit,
    realtime_dispatch,
    run_value_benchmark,
    solve_bidding,
)

HOURS = 24


def _no_battery(**kw):
    return RetailerModel(capacity=0.0, p_charge=0.0, p_discharge=0.0,
                         soc_start=0.0, soc_end=0.0, **kw)


def _triple(net):
    """Wind-only triple realizing the given net position."""
    net = np.asarray(net, dtype=float)
    return (net, np.zeros(HOURS), np.zeros(HOURS))


# --------------------------------------------------------------- model guards


def test_price_curves_broadcast_and_check_length():
    m = RetailerModel(price=42.0)
    assert m.price.shape == (HOURS,)
    assert np.all(m.price == 42.0)
    with pytest.raises(DimensionError):
        RetailerModel(price=np.ones(23))


def test_model_validation_catches_bad_fields():
    bad = [
        dict(capacity=-1.0),
        dict(eta_c=0.0),
        dict(eta_d=1.5),
        dict(p_charge=-2.0),
        dict(soc_start=11.0),  # above default capacity 10
        dict(pen_surplus=-1.0),
        dict(price=np.inf),
    ]
    for kw in bad:
        with pytest.raises(ModelValidationError):
            RetailerModel(**kw).validate()
    # terminal state of charge that cannot be reached within a day
    with pytest.raises(ModelValidationError, match="charge enough"):
        RetailerModel(capacity=1000.0, p_charge=0.01, soc_start=0.0,
                      soc_end=900.0).validate()
    with pytest.raises(ModelValidationError, match="discharge enough"):
        RetailerModel(capacity=1000.0, p_discharge=0.01, soc_start=900.0,
                      soc_end=0.0).validate()


def test_model_dict_round_trip():
    m = RetailerModel(capacity=8.0, price=np.linspace(30, 70, HOURS))
    m2 = RetailerModel.from_dict(json.loads(json.dumps(m.to_dict())))
    for k in ("capacity", "p_charge", "eta_c", "soc_end"):
        assert getattr(m2, k) == getattr(m, k)
    np.testing.assert_array_equal(m2.price, m.price)
    np.testing.assert_array_equal(m2.pen_deficit, m.pen_deficit)


# ----------------------------------------------------------------- LP anatomy


def test_lp_dimensions_and_names():
    rng = np.random.default_rng(0)
    scens = [_triple(rng.uniform(0, 1, HOURS)) for _ in range(3)]
    model = RetailerModel()
    lp = build_two_stage_lp(model, scens)
    per_s = 5 * HOURS - 1 + 2 * HOURS + (HOURS - 1)
    rows_per_s = 4 * HOURS + (HOURS - 1)
    assert lp.a.shape == (3 * rows_per_s, 2 * HOURS + 3 * per_s)
    assert "bid_pos_0" in lp.names and "bid_neg_23" in lp.names
    assert "soc_2_23" in lp.names and "soc_0_24" not in lp.names

    pinned = build_two_stage_lp(model, scens, bids=np.zeros(HOURS))
    assert pinned.a.shape == (3 * rows_per_s, 3 * per_s)
    assert "bid_pos_0" not in pinned.names


def test_scenario_shape_errors():
    good = _triple(np.zeros(HOURS))
    bad = (np.zeros(HOURS - 1), np.zeros(HOURS), np.zeros(HOURS))
    with pytest.raises(DimensionError, match="scenario 1"):
        build_two_stage_lp(RetailerModel(), [good, bad])


# ------------------------------------------------------------ planner oracles


def test_zero_battery_newsvendor_quantile_bids():
    """Without storage the stage decouples per hour into a newsvendor: the
    optimal bid is the net-position order statistic at the critical fractile
    (price + surplus penalty) / (surplus + deficit penalty)."""
    model = _no_battery(price=50.0, pen_surplus=25.0, pen_deficit=90.0)
    rng = np.random.default_rng(1)
    nets = rng.uniform(0.0, 1.0, (5, HOURS))
    scens = [_triple(nets[s]) for s in range(5)]
    lp, sol = solve_bidding(model, scens)
    bids = extract_bids(lp, sol)
    # fractile 75/115 ~ 0.652 lies strictly inside the (0.6, 0.8] jump:
    # the 4th of 5 order statistics per hour is the unique optimum
    want = np.sort(nets, axis=0)[3]
    np.testing.assert_allclose(bids, want, atol=1e-7)

    expected_cost = 0.0
    for t in range(HOURS):
        b = want[t]
        pen = np.mean(90.0 * np.maximum(b - nets[:, t], 0.0)
                      + 25.0 * np.maximum(nets[:, t] - b, 0.0))
        expected_cost += -50.0 * b + pen
    assert sol.objective == pytest.approx(expected_cost, rel=1e-9)


def test_single_scenario_bids_equal_net_position():
    """S=1 with flat prices: a battery with round-trip losses stays idle and
    the optimal bid is exactly the scenario's net position."""
    rng = np.random.default_rng(2)
    net = rng.uniform(-0.5, 1.5, HOURS)
    for model in (_no_battery(), RetailerModel()):
        lp, sol = solve_bidding(model, [_triple(net)])
        np.testing.assert_allclose(extract_bids(lp, sol), net, atol=1e-7)
        assert sol.objective == pytest.approx(-float(model.price @ net), abs=1e-6)


def test_perfect_information_recovers_oracle_profit():
    rng = np.random.default_rng(3)
    obs = _triple(rng.uniform(0, 2, HOURS))
    model = RetailerModel(price=np.linspace(30, 70, HOURS))
    lp, sol = solve_bidding(model, [obs])
    profit = realtime_dispatch(model, extract_bids(lp, sol), obs)
    want = oracle_profit(model, obs)
    assert profit == pytest.approx(want, rel=1e-6, abs=1e-6)


def test_oracle_dominates_any_bids():
    rng = np.random.default_rng(4)
    model = RetailerModel(price=np.r_[np.full(12, 35.0), np.full(12, 65.0)])
    for trial in range(12):
        obs = _triple(rng.uniform(0, 2, HOURS))
        bound = oracle_profit(model, obs)
        scens = [_triple(rng.uniform(0, 2, HOURS)) for _ in range(4)]
        lp, sol = solve_bidding(model, scens)
        profit = realtime_dispatch(model, extract_bids(lp, sol), obs)
        assert profit <= bound + 1e-6 * (1 + abs(bound)), f"trial {trial}"
        arbitrary = rng.uniform(-1, 2, HOURS)
        assert realtime_dispatch(model, arbitrary, obs) <= bound + 1e-6 * (1 + abs(bound))


def test_battery_arbitrage_adds_value():
    """With a wide peak/off-peak spread, storage strictly beats no storage
    even under perfect information."""
    price = np.r_[np.full(12, 30.0), np.full(12, 70.0)]
    obs = _triple(np.full(HOURS, 1.0))
    with_batt = RetailerModel(price=price)
    without = _no_battery(price=price)
    gain = oracle_profit(with_batt, obs) - oracle_profit(without, obs)
    assert gain > 10.0  # 70 * 0.9025 - 30 > 0 per shifted MWh, several MWh shift


def test_dispatch_detail_is_physically_consistent():
    rng = np.random.default_rng(5)
    model = RetailerModel(price=np.linspace(20, 80, HOURS))
    obs = _triple(rng.uniform(0, 2, HOURS))
    bids = rng.uniform(0, 2, HOURS)
    profit, detail = realtime_dispatch(model, bids, obs, return_detail=True)
    net = obs[0] + obs[1] - obs[2]
    assert profit == pytest.approx(detail["revenue"] - detail["penalty"], abs=1e-9)
    assert detail["revenue"] == pytest.approx(float(model.price @ bids), abs=1e-9)
    lhs = bids - (net + detail["discharge"] - detail["charge"])
    np.testing.assert_allclose(lhs, detail["deficit"] - detail["surplus"], atol=1e-6)
    soc = detail["soc"]
    assert soc.shape == (HOURS + 1,)
    assert soc[0] == model.soc_start and soc[-1] == model.soc_end
    steps = model.eta_c * detail["charge"] - detail["discharge"] / model.eta_d
    np.testing.assert_allclose(np.diff(soc), steps, atol=1e-6)
    assert np.all(detail["charge"] <= model.p_charge + 1e-9)
    assert np.all(detail["discharge"] <= model.p_discharge + 1e-9)
    assert np.all(soc <= model.capacity + 1e-9) and np.all(soc >= -1e-9)


def test_unbounded_without_penalties():
    model = _no_battery(pen_surplus=0.0, pen_deficit=0.0)
    with pytest.raises(ParameterError, match="unbounded"):
        solve_bidding(model, [_triple(np.ones(HOURS))])


def test_deterministic_bids_match_mean_scenario_plan():
    rng = np.random.default_rng(6)
    scens = [_triple(rng.uniform(0, 1, HOURS)) for _ in range(4)]
    model = RetailerModel()
    det = deterministic_bids(model, scens)
    mean_net = np.mean([t[0] for t in scens], axis=0)
    lp, sol = solve_bidding(model, [_triple(mean_net)])
    np.testing.assert_allclose(det, extract_bids(lp, sol), atol=1e-7)


def test_extract_schedule_per_scenario():
    rng = np.random.default_rng(7)
    scens = [_triple(rng.uniform(0, 1, HOURS)) for _ in range(2)]
    model = RetailerModel()
    lp, sol = solve_bidding(model, scens)
    for s in range(2):
        sched = extract_schedule(lp, sol, model, s=s)
        assert set(sched) == {"charge", "discharge", "soc", "surplus", "deficit"}
        assert sched["soc"].shape == (HOURS + 1,)


# ------------------------------------------------------------------ benchmark


def _benchmark_inputs(n_days=2, m=6, seed=8):
    rng = np.random.default_rng(seed)
    days = [date(2014, 6, 1) + timedelta(days=i) for i in range(n_days)]
    obs = {"wind": {}, "pv": {}, "load": {}}
    scen = {"wind": {}, "pv": {}, "load": {}}
    for d in days:
        for track, zones in (("wind", [1, 2]), ("pv", [1]), ("load", [1])):
            for z in zones:
                obs[track][(d, z)] = rng.uniform(0.2, 1.0, HOURS)
                scen[track][(d, z)] = rng.uniform(0.2, 1.0, (m, HOURS))
    return days, obs, scen


def test_run_value_benchmark_end_to_end(tmp_path):
    days, obs, scen = _benchmark_inputs()
    retailer = RetailerModel(capacity=2.0, p_charge=1.0, p_discharge=1.0,
                             soc_start=1.0, soc_end=1.0,
                             price=np.r_[np.full(12, 35.0), np.full(12, 65.0)])
    report = run_value_benchmark({"m1": scen}, obs, retailer, days,
                                 pv_zones=[1], wind_zones=[1, 2])
    combos = len(days) * 1 * 2
    assert report.n_simulated == combos
    assert len(report.rows) == combos * 3  # oracle + m1 + m1-det
    assert set(report.aggregate) == {"oracle", "m1", "m1-det"}
    for name in ("m1", "m1-det"):
        total = sum(r["profit"] for r in report.rows if r["model"] == name)
        assert report.aggregate[name] == pytest.approx(total, abs=1e-9)
    assert report.oracle_total == pytest.approx(report.aggregate["oracle"], abs=1e-12)
    assert report.aggregate["m1"] <= report.oracle_total + 1e-6

    jp = tmp_path / "value.json"
    report.write_json(jp)
    doc = json.loads(jp.read_text())
    assert doc["n_simulated"] == combos
    assert doc["aggregate"]["m1"] == report.aggregate["m1"]
    assert len(doc["rows"]) == len(report.rows)

    cp = tmp_path / "value.csv"
    report.write_csv(cp)
    lines = cp.read_text().strip().splitlines()
    assert lines[0] == "model,day,pv_zone,wind_zone,profit"
    assert len(lines) == 1 + len(report.rows)
    total = sum(float(l.split(",")[4]) for l in lines[1:] if l.startswith("m1,"))
    assert total == pytest.approx(report.aggregate["m1"], rel=1e-12)


def test_run_value_benchmark_coverage_error():
    days, obs, scen = _benchmark_inputs()
    del obs["wind"][(days[1], 2)]
    with pytest.raises(CoverageError, match="obs:wind"):
        run_value_benchmark({"m1": scen}, obs, RetailerModel(), days,
                            pv_zones=[1], wind_zones=[1, 2])
    days, obs, scen = _benchmark_inputs()
    del scen["pv"][(days[0], 1)]
    with pytest.raises(CoverageError, match="m1:pv"):
        run_value_benchmark({"m1": scen}, obs, RetailerModel(), days,
                            pv_zones=[1], wind_zones=[1, 2])


def test_value_report_validate_rejects_super_oracle_rows():
    rows = [
        {"model": "oracle", "day": date(2014, 1, 1), "pv_zone": 1, "wind_zone": 1,
         "profit": 100.0},
        {"model": "m1", "day": date(2014, 1, 1), "pv_zone": 1, "wind_zone": 1,
         "profit": 100.5},
    ]
    with pytest.raises(ParameterError, match="exceeds oracle"):
        ValueReport(rows=rows).validate()

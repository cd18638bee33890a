import numpy as np
import pytest
from hypothesis import given, strategies as st

from edgeplan.subproblem import (
    Infeasible,
    SubproblemSpec,
    SubproblemSolution,
    kkt_report,
    solve,
)


def make_spec(**kw):
    base = dict(
        c=np.array([8.2177]),
        const=0.0,
        alpha=np.array([1.0]),
        load=np.array([12.92]),
        budget_rhs=6.0,
        rate=np.array([11.0]),
        rate_rhs=5.0,
        p_min=np.array([0.001]),
    )
    base.update(kw)
    return SubproblemSpec(**base)


def grid_minimum(spec, step):
    """Brute-force oracle: scan a uniform grid of blocking vectors."""
    axes = [np.arange(lo + step, 1.0 + step / 2, step) for lo in spec.p_min]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    bound = (spec.alpha * (spec.load * (1.0 - pts) + 1.0 / pts)).sum(axis=1)
    rate = (spec.rate * (1.0 - pts)).sum(axis=1)
    ok = (bound <= spec.budget_rhs) & (rate <= spec.rate_rhs)
    assert ok.any(), "oracle grid found no feasible point"
    obj = pts[ok] @ spec.c + spec.const
    return float(obj.min())


def test_single_station_against_grid_oracle():
    spec = make_spec()
    sol = solve(spec)
    oracle = grid_minimum(spec, 1e-5)
    assert sol.objective <= oracle + 1e-6
    assert sol.objective >= oracle - 1e-3
    # Budget binds before the rate cap here: F(p*) == budget_rhs.
    p = sol.p[0]
    assert spec.load[0] * (1 - p) + 1 / p == pytest.approx(6.0, abs=1e-6)


def test_single_station_rate_cap_binds():
    # Loose budget, tight admission: optimum sits at (1-p) rate == cap.
    spec = make_spec(budget_rhs=60.0, rate_rhs=3.0)
    sol = solve(spec)
    oracle = grid_minimum(spec, 1e-5)
    assert sol.objective <= oracle + 1e-6
    assert sol.objective >= oracle - 1e-3
    assert (1 - sol.p[0]) * 11.0 == pytest.approx(3.0, abs=1e-6)


def test_two_station_against_grid_oracle():
    spec = SubproblemSpec(
        c=np.array([8.2, 9.7]),
        const=2.5,
        alpha=np.array([1.0, 1.0]),
        load=np.array([12.92, 16.51]),
        budget_rhs=10.0,
        rate=np.array([11.0, 13.0]),
        rate_rhs=6.0,
        p_min=np.array([0.02, 0.02]),
    )
    sol = solve(spec)
    oracle = grid_minimum(spec, 2e-3)
    assert sol.objective <= oracle + 1e-6
    assert sol.objective >= oracle - 0.05
    rep = kkt_report(spec, sol)
    assert rep["feasibility"] <= 1e-9
    assert rep["stationarity"] <= 1e-8


def test_slack_couplings_hit_lower_box():
    spec = make_spec(budget_rhs=1e4, rate_rhs=1e4, p_min=np.array([0.05]))
    sol = solve(spec)
    assert sol.p[0] == pytest.approx(0.05, abs=1e-5)


def test_infeasible_budget_raises():
    with pytest.raises(Infeasible):
        solve(make_spec(alpha=np.array([7.0]), budget_rhs=6.0))


def test_zero_rate_cap_returns_all_ones_vertex():
    sol = solve(make_spec(rate_rhs=0.0))
    assert sol.mode == "vertex"
    assert np.all(sol.p == 1.0)
    assert sol.objective == pytest.approx(8.2177)


def test_exact_budget_returns_all_ones_vertex():
    sol = solve(make_spec(budget_rhs=1.0))  # == sum(alpha) == F at all-ones
    assert sol.mode == "vertex"
    assert np.all(sol.p == 1.0)


def test_kkt_multipliers_identify_binding_constraint():
    spec = make_spec()  # budget binds, rate cap slack
    sol = solve(spec)
    rep = kkt_report(spec, sol)
    assert rep["feasibility"] <= 1e-9
    assert rep["stationarity"] <= 1e-8
    assert rep["comp_slack"] <= 1e-8
    assert sol.multipliers["budget"] > 1e-3
    assert sol.multipliers["rate"] < 1e-6
    assert sol.newton_iters > 0
    assert isinstance(sol, SubproblemSolution)


def test_spec_validation():
    with pytest.raises(ValueError):
        make_spec(alpha=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        make_spec(rate=np.array([0.0]))
    with pytest.raises(ValueError):
        make_spec(p_min=np.array([1.0]))
    with pytest.raises(ValueError):
        make_spec(rate_rhs=-1.0)


@given(
    n=st.integers(1, 4),
    seed=st.integers(0, 10_000),
    slack=st.floats(0.0, 5.0),
    rate_frac=st.floats(0.0, 1.0),
)
def test_never_beats_constraints_never_loses_to_all_local(n, seed, slack, rate_frac):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.0, 20.0, n)
    alpha = rng.uniform(0.2, 3.0, n)
    load = rng.uniform(0.5, 30.0, n)
    rate = rng.uniform(1.0, 20.0, n)
    spec = SubproblemSpec(
        c=c,
        const=0.0,
        alpha=alpha,
        load=load,
        budget_rhs=float(np.sum(alpha)) * (1.0 + slack),
        rate=rate,
        rate_rhs=rate_frac * float(np.sum(rate)),
        p_min=rng.uniform(0.0, 0.2, n),
    )
    sol = solve(spec)
    rep = kkt_report(spec, sol)
    assert rep["feasibility"] <= 1e-9
    # The all-ones vertex is always feasible, so we can never do worse.
    assert sol.objective <= float(np.dot(c, np.ones(n))) + 1e-7
    if sol.mode == "interior":
        assert rep["stationarity"] <= 1e-6

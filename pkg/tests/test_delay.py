"""Edge-queue delay tests.

Three independent routes are cross-checked: the alternating-sum closed form
for deterministic service, the transform-inversion route, and a brute-force
Lindley recursion fed with the same arrival/service law.  The exponential
closed form pins the inversion machinery on a third distribution family.
"""

import math

import numpy as np
import pytest

from edgeplan.channel import GilbertElliotModel, Pmf, upload_pmf
from edgeplan.delay import (
    DelayModel,
    EsServiceModel,
    discretize_sojourn,
    feasible_lambda_star,
    md1_wait_cdf,
    mg1_wait_cdf,
    pk_wait_cdf,
    total_delay_prob,
)
from edgeplan.scenario import bundled_config_path, load_scenario


def lindley_waits(lam, service_draw, n, seed):
    """Oracle: exact FIFO waiting times via w' = max(0, w + b - A)."""
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / lam, size=n)
    services = service_draw(rng, n)
    w = np.zeros(n)
    cur = 0.0
    for i in range(1, n):
        cur = max(0.0, cur + services[i - 1] - gaps[i])
        w[i] = cur
    return w


def ks_statistic(samples, cdf):
    """sup |F_emp - F| for samples that may tie at distribution atoms."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    vals, counts = np.unique(xs, return_counts=True)
    cum = np.cumsum(counts) / n
    before = cum - counts / n
    f_right = np.asarray(cdf(vals))
    f_left = np.asarray(cdf(vals - 1e-9))
    return float(
        max(np.max(np.abs(cum - f_right)), np.max(np.abs(before - f_left)))
    )


def test_md1_atom_and_edges():
    assert md1_wait_cdf(10.0, 25.0, 0.0) == pytest.approx(0.6, abs=1e-12)
    assert md1_wait_cdf(0.0, 25.0, 1.0) == 1.0
    assert md1_wait_cdf(10.0, 25.0, -0.5) == 0.0
    with pytest.raises(ValueError):
        md1_wait_cdf(25.0, 25.0, 1.0)
    with pytest.raises(ValueError):
        md1_wait_cdf(-1.0, 25.0, 1.0)


def test_md1_monotone_and_bounded():
    ts = np.linspace(0.0, 1.2, 121)
    vals = [md1_wait_cdf(18.0, 25.0, t) for t in ts]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.999


def test_md1_against_lindley():
    lam, mu, n = 10.0, 25.0, 200_000
    w = lindley_waits(lam, lambda rng, k: np.full(k, 1.0 / mu), n, seed=7)
    ks = ks_statistic(w, lambda x: np.array([md1_wait_cdf(lam, mu, t) for t in x]))
    assert ks <= 0.02
    atom = float(np.mean(w <= 1e-12))
    assert atom == pytest.approx(1.0 - lam / mu, abs=0.005)


def test_mm1_closed_form_via_inversion():
    lam, mu = 4.0, 5.0
    rho = lam / mu

    def exp_lst(s):
        return mu / (mu + s)

    ts = np.linspace(0.0, 3.0, 301)
    got = pk_wait_cdf(lam, 1.0 / mu, exp_lst, ts)
    want = 1.0 - rho * np.exp(-(mu - lam) * ts)
    assert np.max(np.abs(got - want)) <= 1e-4


def test_single_class_inversion_matches_md1():
    lam, mu = 10.0, 25.0
    service = EsServiceModel(seconds=np.array([1.0 / mu]), weights=np.array([1.0]))
    ts = np.linspace(0.0, 20.0 / mu, 200)
    got = mg1_wait_cdf(lam, service, ts)
    want = np.array([md1_wait_cdf(lam, mu, t) for t in ts])
    assert np.max(np.abs(got - want)) <= 1e-4


def test_single_class_inversion_matches_md1_heavy_load():
    lam, mu = 22.0, 25.0
    service = EsServiceModel(seconds=np.array([1.0 / mu]), weights=np.array([1.0]))
    ts = np.linspace(0.0, 20.0 / mu, 120)
    got = mg1_wait_cdf(lam, service, ts)
    want = np.array([md1_wait_cdf(lam, mu, t) for t in ts])
    assert np.max(np.abs(got - want)) <= 1e-4


def test_md1_highprecision_path_consistent():
    # lam*t beyond 16 flips md1 to the multi-precision branch; it must agree
    # with the independent transform inversion to inversion accuracy.
    lam, mu = 20.0, 25.0
    service = EsServiceModel(seconds=np.array([1.0 / mu]), weights=np.array([1.0]))
    for t in (0.9, 1.1, 1.6, 2.4):
        assert lam * t > 16.0
        direct = md1_wait_cdf(lam, mu, t)
        inverted = float(mg1_wait_cdf(lam, service, t))
        assert direct == pytest.approx(inverted, abs=2e-5)


def test_mg1_mixture_against_lindley():
    # three-class mix from the second reference set at full edge share
    scen = load_scenario(bundled_config_path("set2"))
    service = EsServiceModel.from_scenario(scen, y=1.0)
    lam = 10.0
    assert lam * service.mean < 1.0

    def draw(rng, k):
        idx = rng.choice(len(service.seconds), size=k, p=service.weights)
        return service.seconds[idx]

    w = lindley_waits(lam, draw, 200_000, seed=11)
    ts_cache = {}

    def cdf(xs):
        return mg1_wait_cdf(lam, service, xs)

    ks = ks_statistic(w, cdf)
    assert ks <= 0.02


def test_mg1_rejects_unstable():
    service = EsServiceModel(seconds=np.array([0.1]), weights=np.array([1.0]))
    with pytest.raises(ValueError, match="unstable"):
        mg1_wait_cdf(10.0, service, 1.0)


def test_delay_model_saturated_is_zero():
    scen = load_scenario(bundled_config_path("set1"))
    dm = DelayModel(scen, y=0.5, lam=scen.es_rate_cap(0.5) * 1.5)
    assert dm.saturated
    assert dm.wait_cdf(5.0) == 0.0
    pmf = upload_pmf(GilbertElliotModel(0.9, 0.1, 2e6), 2e6)
    assert total_delay_prob(pmf, 0, dm) == 0.0


def test_total_delay_prob_idle_server():
    # lam = 0: every stored upload slot that fits the deadline counts fully
    scen = load_scenario(bundled_config_path("set1"))
    dm = DelayModel(scen, y=1.0, lam=0.0)
    pmf = upload_pmf(GilbertElliotModel(0.7, 0.3, 2e6), 2e6)
    # floor((4 - 0.04)/1) = 3 slots fit
    want = pmf.cdf(3)
    assert total_delay_prob(pmf, 0, dm) == pytest.approx(want, abs=1e-12)


def test_total_delay_prob_monotone_in_lambda():
    scen = load_scenario(bundled_config_path("set1"))
    pmf = upload_pmf(GilbertElliotModel(0.9, 0.1, 2e6), 2e6)
    vals = [
        total_delay_prob(pmf, 0, DelayModel(scen, y=1.0, lam=lam))
        for lam in (0.0, 5.0, 10.0, 15.0, 20.0, 24.0)
    ]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_discretize_sojourn_matches_cdf():
    scen = load_scenario(bundled_config_path("set1"))
    dm = DelayModel(scen, y=1.0, lam=15.0)
    pmf = discretize_sojourn(dm, 0)
    assert pmf.first == 1
    assert float(np.sum(pmf.probs)) + pmf.tail_mass == pytest.approx(1.0, abs=1e-9)
    assert pmf.tail_mass <= 1e-9
    # cell mass equals CDF increments
    c1 = dm.sojourn_cdf(0, scen.tau)
    assert pmf.prob(1) == pytest.approx(float(c1), abs=1e-9)
    capped = discretize_sojourn(dm, 0, max_slots=2)
    assert capped.last == 2
    assert capped.tail_mass == pytest.approx(1.0 - float(dm.sojourn_cdf(0, 2 * scen.tau)), abs=1e-9)


def test_feasible_lambda_star_set1():
    from edgeplan.channel import station_upload_table

    scen = load_scenario(bundled_config_path("set1"))
    uploads = [station_upload_table(bs, scen.classes) for bs in scen.base_stations]

    # eps = 1%: the worse channel model only reaches 0.973 within the deadline
    tight = scen.scaled(eps=0.01)
    assert feasible_lambda_star(tight, 1.0, uploads) == 0.0

    # eps = 3%: feasible at lam = 0 and the threshold is interior
    ok = scen.scaled(eps=0.03)
    star = feasible_lambda_star(ok, 1.0, uploads)
    mu_max = ok.es_rate_cap(1.0)
    assert 0.0 < star < mu_max
    dm = DelayModel(ok, 1.0, star)
    worst = min(
        total_delay_prob(pmf, j, dm)
        for table in uploads
        for j in range(len(ok.classes))
        for pmf in table.pmfs[j]
    )
    assert worst >= 1.0 - 0.03 - 1e-6

    # eps = 100%: constraint vacuous, the cap itself comes back
    vac = scen.scaled(eps=1.0)
    assert feasible_lambda_star(vac, 1.0, uploads) == mu_max

    # y = 0 means no edge capacity at all
    assert feasible_lambda_star(ok, 0.0, uploads) == 0.0


def test_feasible_lambda_star_monotone_in_eps():
    from edgeplan.channel import station_upload_table

    scen = load_scenario(bundled_config_path("set1"))
    uploads = [station_upload_table(bs, scen.classes) for bs in scen.base_stations]
    stars = [
        feasible_lambda_star(scen.scaled(eps=e), 0.8, uploads) for e in (0.03, 0.05, 0.10)
    ]
    assert stars[0] <= stars[1] + 1e-9 <= stars[2] + 2e-9

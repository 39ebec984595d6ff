import io
import json
import math

import numpy as np
import pytest
from scipy.stats import kstest

import pilgrim as pg
from pilgrim import bulk
from pilgrim.exponent import ModelParams, splitting_prob
from pilgrim.monopoly import HotelLedger, toll_rate_base

WORKED_X = [0.36, 0.25, 0.36, 2.24, 0.40, 0.03, 1.17, 1.68, 3.31, 1.24, 0.35, 0.50]
WORKED_T = [0.36, 0.36, 0.36, 1.12, 0.36, 0.18, 0.36, 0.85, 1.89, 0.85, 0.36, 0.36]


def test_worked_example_two_decimals():
    T, _ = pg.simulate_from_funds(WORKED_X, ModelParams(rho=1.0))
    np.testing.assert_array_equal(np.round(T, 2), WORKED_T)


def test_advance_empty_ledger_founds_first_hotel():
    led = HotelLedger(ModelParams(rho=1.0))
    t, led = pg.advance_one_pilgrim(led, 0.36)
    assert t == pytest.approx(0.36)
    assert led.k == 1 and led.occupancy == [1]
    assert led.toll_paid[0] == pytest.approx(0.36)


def test_advance_insufficient_tax_forfeits():
    led = HotelLedger(ModelParams(rho=1.0))
    led.advance(0.36)
    t = led.advance(0.25)
    assert t == pytest.approx(0.36)
    assert led.toll_paid[1] == pytest.approx(0.18)
    assert led.forfeit[1] == pytest.approx(0.07)
    assert led.tax_paid[1] == 0.0
    assert led.occupancy == [2]


def test_advance_sixth_pilgrim_founds_hotel_at_six_x():
    led = HotelLedger(ModelParams(rho=1.0))
    for x in WORKED_X[:5]:
        led.advance(x)
    t = led.advance(0.03)
    assert t == pytest.approx(6 * 0.03, rel=1e-12)


def test_single_pilgrim_destination_scales_with_rho_over_nu():
    for rho in (0.5, 1.0, 4.0):
        for nu in (1.0, 2.0):
            T, _ = pg.simulate_from_funds([0.7], ModelParams(rho=rho, nu=nu))
            assert T[0] == pytest.approx(rho * 0.7 / nu, rel=1e-14)


def test_nu_scaling_law():
    X = np.random.default_rng(5).exponential(size=200)
    p1 = ModelParams(rho=1.5, beta=0.5, nu=1.0)
    p2 = ModelParams(rho=1.5, beta=0.5, nu=2.0)
    T1, _ = pg.simulate_from_funds(X, p1)
    T2, _ = pg.simulate_from_funds(X, p2)
    np.testing.assert_array_equal(2.0 * T2, T1)  # halving is exact in binary
    p3 = ModelParams(rho=1.5, beta=0.5, nu=3.0)
    T3, _ = pg.simulate_from_funds(X, p3)
    np.testing.assert_allclose(3.0 * T3, T1, rtol=1e-13)


def test_simulate_deterministic():
    p = ModelParams(rho=2.0, beta=0.5)
    T1, led1 = pg.simulate(100, p, seed=42)
    T2, led2 = pg.simulate(100, p, seed=42)
    np.testing.assert_array_equal(T1, T2)
    assert led1.wealth == led2.wealth
    T3, _ = pg.simulate(100, p, seed=43)
    assert not np.array_equal(T1, T3)


@pytest.mark.parametrize("rho,beta,nu", [(1.0, 0.0, 1.0), (0.5, 1.0, 2.0), (4.0, -0.5, 1.0)])
def test_engine_parity_bitwise(rho, beta, nu):
    X = np.random.default_rng(11).exponential(size=300)
    p = ModelParams(rho=rho, beta=beta, nu=nu)
    Tp, lp = pg.simulate_from_funds(X, p, engine="python")
    Tf, lf = pg.simulate_from_funds(X, p, engine="fast")
    np.testing.assert_array_equal(Tp, Tf)
    assert lp.positions == lf.positions
    assert lp.occupancy == lf.occupancy
    assert lp.wealth == lf.wealth
    assert lp.toll_paid == lf.toll_paid
    assert lp.forfeit == lf.forfeit
    assert lp.founder == lf.founder


def test_money_conservation_randomized():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 60))
        params = ModelParams(
            rho=float(rng.uniform(0.2, 6.0)),
            beta=float(rng.uniform(-0.9, 2.0)),
            nu=float(rng.uniform(0.3, 3.0)),
        )
        X = rng.exponential(size=n)
        _, led = pg.simulate_from_funds(X, params)
        assert abs(led.money_residual()) <= 1e-9 * led.total_funds
        assert sum(led.occupancy) == n
        rc = led.risk_counts()
        assert rc[-1] == 0
        assert np.all(np.diff(rc) <= 0)


def test_toll_total_examples():
    p = ModelParams(rho=1.0)
    _, led = pg.simulate_from_funds([0.9], p)
    assert pg.toll_total(led) == pytest.approx(0.9, rel=1e-12)
    assert pg.toll_total(HotelLedger(p)) == 0.0
    _, led = pg.simulate(200, ModelParams(rho=2.0, beta=1.0), seed=3)
    assert pg.toll_total(led) == pytest.approx(
        led.total_funds - led.total_taxes_and_forfeits, rel=1e-11
    )


def test_wealth_report_single_and_tie():
    p = ModelParams(rho=1.0)
    _, led = pg.simulate_from_funds([0.9], p)
    rep = pg.wealth_report(led)
    assert len(rep.rows) == 1
    assert rep.rows[0]["wealth"] == 0.0
    assert rep.toll_total == pytest.approx(0.9, rel=1e-12)
    # tie: second traveller's forfeit is the only hotel wealth
    _, led2 = pg.simulate_from_funds([0.36, 0.25], p)
    rep2 = pg.wealth_report(led2)
    assert rep2.rows[0]["wealth"] == pytest.approx(led2.forfeit[1], rel=1e-14)
    assert abs(rep2.money_residual) < 1e-12


def test_wealth_report_orderings():
    _, led = pg.simulate(500, ModelParams(rho=4.0), seed=9)
    rep = pg.wealth_report(led)
    spatial = rep.spatial()
    temporal = rep.temporal()
    assert [r["founding_order"] for r in temporal] == list(range(1, led.k + 1))
    assert [r["position"] for r in spatial] == sorted(r["position"] for r in spatial)
    total = sum(r["wealth"] for r in spatial)
    assert total + rep.toll_total == pytest.approx(led.total_funds, rel=1e-11)


def test_ledger_export_roundtrip():
    _, led = pg.simulate(20, ModelParams(rho=1.0), seed=1)
    buf = io.StringIO()
    led.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "pilgrim,time,hotel_index,funds,toll_paid,tax_paid,forfeit"
    assert len(lines) == 21
    first = lines[1].split(",")
    assert float(first[1]) == led.times[0]
    payload = json.loads(led.to_json())
    assert payload["params"]["rho"] == 1.0
    assert len(payload["pilgrims"]) == 20
    assert len(payload["hotels"]) == led.k
    assert sum(h["occupancy"] for h in payload["hotels"]) == 20


def test_invalid_inputs():
    p = ModelParams(rho=1.0)
    with pytest.raises(ValueError):
        pg.simulate_from_funds([], p)
    with pytest.raises(ValueError):
        pg.simulate_from_funds([1.0, -0.5], p)
    with pytest.raises(ValueError):
        HotelLedger(p).advance(0.0)
    with pytest.raises(ValueError):
        pg.simulate(0, p, seed=1)


# ---------------------------------------------------------------------------
# Monte Carlo checks against the exact laws
# ---------------------------------------------------------------------------


def test_marginal_law_is_exponential():
    # every T_i is marginally exponential with mean rho/nu
    p = ModelParams(rho=2.0, nu=1.0)
    T = bulk.simulate_times_matrix(3, p, 100_000, seed=101)
    second = T[:, 1]
    assert second.mean() == pytest.approx(2.0, abs=3 * second.std() / math.sqrt(second.size))
    stat = kstest(second, "expon", args=(0.0, 2.0)).statistic
    assert stat < 1.628 / math.sqrt(second.size)  # 1% critical value


@pytest.mark.parametrize(
    "beta,rho",
    [(0.0, 1.0), (1.0, 1.0), (0.5, 2.0)],
)
def test_tie_frequency_matches_splitting_rule(beta, rho):
    p = ModelParams(rho=rho, beta=beta)
    target = (1.0 + beta) / (2.0 * rho + 1.0 + beta)
    T = bulk.simulate_times_matrix(2, p, 100_000, seed=13)
    freq = float(np.mean(T[:, 0] == T[:, 1]))
    se = math.sqrt(target * (1.0 - target) / T.shape[0])
    assert abs(freq - target) <= 3.0 * se
    assert splitting_prob(p, 0, 2) == pytest.approx(target, rel=1e-12)


def _pattern_of(row):
    groups = {}
    for i, v in enumerate(row):
        groups.setdefault(v, []).append(i + 1)
    return tuple(sorted(tuple(g) for g in groups.values()))


def test_exchangeability_tie_patterns():
    reps = 100_000
    for rho in (0.5, 1.0, 4.0):
        for beta in (0.0, 1.0):
            T = bulk.simulate_times_matrix(3, ModelParams(rho=rho, beta=beta), reps, seed=29)
            pat_id = [_pattern_of(r) for r in T]
            pat_sw = [_pattern_of(r[[1, 0, 2]]) for r in T]
            pats = sorted(set(pat_id))
            assert len(pats) == 5
            for pat in pats:
                f1 = sum(q == pat for q in pat_id) / reps
                f2 = sum(q == pat for q in pat_sw) / reps
                se = math.sqrt(max(f1 + f2, 1e-12) / reps)
                assert abs(f1 - f2) <= 3.0 * se + 1e-12


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("rho", [1.0, 4.0])
def test_first_block_size_matches_splitting_rule(beta, rho):
    n, reps = 4, 100_000
    p = ModelParams(rho=rho, beta=beta)
    T = bulk.simulate_times_matrix(n, p, reps, seed=31)
    first = np.array([np.sum(r == r.min()) for r in T])
    for d in range(1, n + 1):
        target = math.comb(n, d) * splitting_prob(p, n - d, d)
        freq = float(np.mean(first == d))
        se = math.sqrt(target * (1.0 - target) / reps)
        assert abs(freq - target) <= 3.0 * se + 1e-12


# ---------------------------------------------------------------------------
# predictive distributions
# ---------------------------------------------------------------------------


def test_predictive_empty_history_is_exponential():
    for rho in (0.5, 1.0, 3.0):
        curve = pg.predictive_survival([], ModelParams(rho=rho))
        t = np.linspace(0.0, 5.0, 7)
        np.testing.assert_allclose(curve.survival(t), np.exp(-t / rho), rtol=1e-12)


def test_predictive_one_hotel_example():
    t1 = 0.8
    curve = pg.predictive_survival([t1], ModelParams(rho=1.0))
    assert curve.survival(t1) == pytest.approx(math.exp(-t1 / 2.0) / 2.0, rel=1e-12)
    assert curve.survival(0.0) == 1.0
    # atom equals the log toll-rate ratio at beta = 0
    np.testing.assert_allclose(curve.atoms, [math.log(2.0)], rtol=1e-12)


def test_predictive_matches_walk_costs():
    # -log S(t) must equal the tolls+taxes a fresh traveller faces up to t
    X = [0.36, 0.25, 0.36, 2.24, 0.40, 0.03]
    p = ModelParams(rho=1.0)
    T, led = pg.simulate_from_funds(X, p)
    curve = pg.predictive_survival(T, p)
    # walk a probe traveller with large funds and tally costs to each hotel
    probe = HotelLedger(p)
    for x in X:
        probe.advance(x)
    base = toll_rate_base(p, led.n + 1)
    cum = 0.0
    cur = 0.0
    R = led.n
    for j, pos in enumerate(led.positions):
        cum += base[R] * (pos - cur)
        cur = pos
        d = led.occupancy[j]
        cum += math.log((R + p.rho) / (R - d + p.rho))
        R -= d
        assert -math.log(curve.survival(pos)) == pytest.approx(cum, rel=1e-12)
    assert curve.survival(led.positions[-1] + 1.0) == pytest.approx(
        math.exp(-(cum + 1.0)) , rel=1e-12
    )


def test_predictive_monotone_right_continuous():
    T, _ = pg.simulate(30, ModelParams(rho=1.0, beta=0.5), seed=17)
    curve = pg.predictive_survival(T, ModelParams(rho=1.0, beta=0.5))
    grid = np.linspace(0, float(np.max(T)) * 1.2, 500)
    s = curve.survival(grid)
    assert np.all(np.diff(s) <= 1e-15)
    for pos in curve.positions:
        assert curve.survival(pos) == pytest.approx(
            curve.survival(pos + 1e-12), rel=1e-9
        )
        assert curve.survival(pos - 1e-12) > curve.survival(pos)


def test_taxes_only_survival_distinct_times_at_rho_zero():
    times = [0.3, 0.7, 1.1, 2.0, 2.5]
    s = pg.taxes_only_survival(times, 0.0)
    assert s(0.1) == 1.0
    for i, t in enumerate(sorted(times), start=1):
        assert s(t) == pytest.approx((5 - i) / 5, abs=1e-14)


def test_taxes_only_survival_matches_km_oracle():
    # independent Kaplan-Meier oracle: prod (1 - d_i / n_i)
    T, _ = pg.simulate(50, ModelParams(rho=1.0), seed=23)
    pos, counts = np.unique(T, return_counts=True)
    at_risk = T.size - np.concatenate(([0], np.cumsum(counts)[:-1]))
    km = np.cumprod(1.0 - counts / at_risk)
    s0 = pg.taxes_only_survival(T, 0.0)
    np.testing.assert_allclose(s0(pos), km, rtol=1e-12)
    # continuity in rho near 0
    s_eps = pg.taxes_only_survival(T, 1e-6)
    grid = np.concatenate((pos, pos - 1e-9, [0.0, pos[-1] * 1.5]))
    assert float(np.max(np.abs(s_eps(grid) - s0(grid)))) < 1e-4

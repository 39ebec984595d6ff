import math

import numpy as np
import pytest

from pilgrim.exponent import ModelParams
from pilgrim.voyage import (
    Feature,
    FeatureAllocation,
    ibp_new_dish_rate,
    ibp_params_for_voyage,
    ibp_pattern_probs,
    ibp_sample,
    simulate_voyage,
    voyage_ibp_distance,
    voyage_new_hotel_rate,
    voyage_occupy_prob,
    voyage_pattern_probs,
)


def test_single_traveller_hotel_count_is_poisson():
    p = ModelParams(rho=1.0)
    rng = np.random.default_rng(1)
    reps = 100_000
    counts = np.empty(reps)
    for r in range(reps):
        _, fa = simulate_voyage(1, 1.0, p, rng)
        counts[r] = fa.k
    se = counts.std(ddof=1) / math.sqrt(reps)
    assert abs(counts.mean() - 1.0) <= 3 * se
    assert abs(counts.var(ddof=1) - 1.0) <= 0.05  # Poisson dispersion


def test_second_traveller_joins_singleton_hotel_half_the_time():
    p = ModelParams(rho=1.0)
    rng = np.random.default_rng(2)
    joins = trials = 0
    while trials < 30_000:
        _, fa = simulate_voyage(2, 1.0, p, rng)
        singles = [f for f in fa.features if f.founder == 1]
        if len(singles) != 1:
            continue
        trials += 1
        joins += 2 in singles[0].members
    freq = joins / trials
    se = math.sqrt(0.25 / trials)
    assert abs(freq - 0.5) <= 3 * se
    assert voyage_occupy_prob(1, 1, p) == 0.5


def test_horizon_scales_hotel_count():
    p = ModelParams(rho=1.0)
    rng = np.random.default_rng(3)
    k1 = np.array([simulate_voyage(1, 1.0, p, rng)[1].k for _ in range(20_000)])
    k2 = np.array([simulate_voyage(1, 2.0, p, rng)[1].k for _ in range(20_000)])
    se = math.sqrt(k1.var(ddof=1) / k1.size + k2.var(ddof=1) / k2.size)
    assert abs(k2.mean() - 2 * k1.mean()) <= 3 * se * 2


def test_voyage_times_lie_in_horizon_and_sorted():
    p = ModelParams(rho=0.5, nu=2.0)
    times, fa = simulate_voyage(6, 1.5, p, seed=9)
    assert len(times) == 6
    for s in times:
        assert np.all((s > 0) & (s <= 1.5))
        assert np.all(np.diff(s) > 0)
    for f in fa.features:
        assert min(f.members) == f.founder
        assert 0 < f.position <= 1.5
    inc = fa.incidence_matrix()
    assert inc.shape == (6, fa.k)
    np.testing.assert_array_equal(inc.sum(axis=0), fa.counts())


def test_feature_allocation_validation():
    with pytest.raises(ValueError):
        FeatureAllocation(2, (Feature(2, frozenset({1, 2})),))
    with pytest.raises(ValueError):
        FeatureAllocation(2, (Feature(1, frozenset({1}), 3.0),), horizon=1.0)


def test_ibp_first_customer_poisson():
    rng = np.random.default_rng(5)
    gamma = 1.7
    counts = np.array([ibp_sample(1, gamma, 1.0, 0.0, rng).k for _ in range(50_000)])
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - gamma) <= 3 * se


def test_ibp_new_dish_rate_alpha_zero_collapses():
    gamma, theta = 2.0, 1.5
    for n in range(0, 12):
        assert ibp_new_dish_rate(n, gamma, theta, 0.0) == pytest.approx(
            gamma * theta / (theta + n), rel=1e-12
        )
    assert ibp_new_dish_rate(0, gamma, theta, 0.3) == pytest.approx(gamma, rel=1e-12)


def test_ibp_existing_dish_probability():
    # a dish sampled by the first customer is taken by the second w.p. (1-alpha)/(theta+1)
    rng = np.random.default_rng(6)
    theta, alpha = 1.0, 0.0
    taken = trials = 0
    while trials < 30_000:
        fa = ibp_sample(2, 1.0, theta, alpha, rng)
        firsts = [f for f in fa.features if f.founder == 1]
        for f in firsts:
            trials += 1
            taken += 2 in f.members
    freq = taken / trials
    target = (1 - alpha) / (theta + 1)
    se = math.sqrt(target * (1 - target) / trials)
    assert abs(freq - target) <= 3 * se


def test_pattern_probs_sum_to_one():
    p = ModelParams(rho=1.0)
    for n in (1, 2, 3):
        probs = voyage_pattern_probs(n, p, max_features=4)
        assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)


def test_feature_allocation_equivalence_exact():
    # voyage (rho, nu, horizon 1) == buffet (gamma=nu/rho, theta=rho, alpha=0)
    p = ModelParams(rho=1.0, nu=1.0)
    for n in (1, 2, 3):
        pv = voyage_pattern_probs(n, p, horizon=1.0, max_features=4)
        pi = ibp_pattern_probs(n, 1.0, 1.0, 0.0, max_features=4)
        keys = set(pv) | set(pi)
        for k in keys:
            assert pv.get(k, 0.0) == pytest.approx(pi.get(k, 0.0), abs=1e-12)


def test_rate_mapping_identity():
    p = ModelParams(rho=2.5, nu=1.3)
    gamma, theta, alpha = p.nu / p.rho, p.rho, 0.0
    for m in range(0, 15):
        assert voyage_new_hotel_rate(m, p) == pytest.approx(
            ibp_new_dish_rate(m, gamma, theta, alpha), rel=1e-12
        )


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5])
def test_generalized_voyage_buffet_mapping(alpha):
    # beta = -alpha, rho = theta + alpha, nu from the founding-rate identity
    theta = 1.2
    p = ModelParams(rho=theta + alpha, beta=-alpha, nu=0.8)
    gamma, theta_m, alpha_m = ibp_params_for_voyage(p, horizon=1.0)
    assert theta_m == pytest.approx(theta, rel=1e-12)
    assert alpha_m == pytest.approx(alpha, rel=1e-12)
    for n in (1, 2, 3):
        pv = voyage_pattern_probs(n, p, horizon=1.0, max_features=4)
        pi = ibp_pattern_probs(n, gamma, theta_m, alpha_m, max_features=4)
        for k in set(pv) | set(pi):
            assert pv.get(k, 0.0) == pytest.approx(pi.get(k, 0.0), abs=1e-12)
    # simulated occupancy probabilities agree as well
    for d in (1, 2, 4):
        for m in (d, d + 3):
            assert voyage_occupy_prob(d, m, p) == pytest.approx(
                (d - alpha) / (theta + m), rel=1e-12
            )


def test_feature_pattern_exchangeability():
    p = ModelParams(rho=1.0)
    rng = np.random.default_rng(7)
    reps = 100_000
    pats_id = []
    pats_sw = []
    swap = {1: 2, 2: 1, 3: 3}
    for _ in range(reps):
        _, fa = simulate_voyage(3, 1.0, p, rng)
        pats_id.append(fa.pattern())
        pats_sw.append(fa.relabelled(swap).pattern())
    common = sorted(set(pats_id[:2000]), key=str)[:12]
    for pat in common:
        f1 = sum(q == pat for q in pats_id) / reps
        f2 = sum(q == pat for q in pats_sw) / reps
        se = math.sqrt(max(f1 + f2, 1e-12) / reps)
        assert abs(f1 - f2) <= 3 * se + 1e-12


def test_mean_total_features_matches_rate_sum():
    p = ModelParams(rho=1.0, nu=1.0)
    rep = voyage_ibp_distance(10, p, gamma=1.0, theta=1.0, reps=30_000, seed=11)
    target = sum(1.0 / (1.0 + i) for i in range(10))  # harmonic sum of rates
    assert rep.mean_features_exact == pytest.approx(target, rel=1e-12)
    se = math.sqrt(target / 30_000)  # Poisson-scale bound
    assert abs(rep.mean_features_voyage - target) <= 3 * se * 2
    assert abs(rep.mean_features_ibp - target) <= 3 * se * 2
    se_diff = 2 * math.sqrt(2 * target / 30_000)
    assert abs(rep.mean_features_voyage - rep.mean_features_ibp) <= 3 * se_diff
    assert abs(rep.mean_shared_voyage - rep.mean_shared_ibp) <= 0.1
    assert rep.rate_max_diff < 1e-12


def test_first_founded_hotel_occupancy_recursion():
    # E[occupancy after n] = prod_{m=founder+1}^{n} (1 + 1/(m-1+rho)), founder = 1
    rho, n, reps = 1.0, 10, 40_000
    p = ModelParams(rho=rho)
    target = 1.0
    for m in range(2, n + 1):
        target *= 1.0 + 1.0 / (m - 1 + rho)
    rng = np.random.default_rng(13)
    vals = []
    while len(vals) < reps:
        _, fa = simulate_voyage(n, 1.0, p, rng)
        firsts = [f for f in fa.features if f.founder == 1]
        if not firsts:
            continue
        first = min(firsts, key=lambda f: f.position)
        vals.append(len(first.members))
    vals = np.asarray(vals, dtype=float)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - target) <= 3 * se

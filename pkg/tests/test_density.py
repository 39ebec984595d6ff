import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

import pilgrim as pg
from pilgrim import bulk
from pilgrim.density import conditional_hazard, log_density_general, log_density_pilgrim, voyage_log_density
from pilgrim.exponent import CharacteristicExponent, ModelParams, splitting_prob


def test_single_observation_density():
    for rho in (0.5, 1.0, 3.0):
        for t in (0.2, 1.0, 4.0):
            got = log_density_pilgrim([t], ModelParams(rho=rho))
            assert got == pytest.approx(math.log(1.0 / rho) - t / rho, rel=1e-12)


def test_tied_pair_density():
    t = 0.9
    got = log_density_pilgrim([t, t], ModelParams(rho=1.0))
    assert got == pytest.approx(-1.5 * t - math.log(2.0), rel=1e-12)


def test_permutation_invariance_exact():
    rng = np.random.default_rng(3)
    p = ModelParams(rho=1.0, beta=0.0)
    for _ in range(20):
        T, _ = pg.simulate(8, p, seed=int(rng.integers(1 << 30)))
        perm = rng.permutation(8)
        assert log_density_pilgrim(T, p) == log_density_pilgrim(T[perm], p)
        e = CharacteristicExponent.gamma(2.0)
        assert log_density_general(T, e) == log_density_general(T[perm], e)


def test_gamma_single_observation():
    rho, t = 1.0, 1.3
    e = CharacteristicExponent.gamma(rho)
    expected = math.log(math.log(1 + 1 / rho)) - t * math.log(1 + 1 / rho)
    assert log_density_general([t], e) == pytest.approx(expected, rel=1e-12)


def test_general_matches_pilgrim_on_tied_sequences():
    rng = np.random.default_rng(17)
    for _ in range(100):
        rho = float(rng.uniform(0.4, 4.0))
        nu = float(rng.choice([0.5, 1.0, 2.0]))
        n = int(rng.integers(2, 13))
        p = ModelParams(rho=rho, nu=nu)
        T, _ = pg.simulate(n, p, seed=int(rng.integers(1 << 30)))
        a = log_density_pilgrim(T, p)
        b = log_density_general(T, CharacteristicExponent.pilgrim(rho, nu))
        assert b == pytest.approx(a, rel=1e-10, abs=1e-12)


def test_iid_family_gives_zero_mass_to_ties():
    e = CharacteristicExponent.iid(1.0)
    assert log_density_general([0.5, 0.5], e) == -math.inf
    assert np.isfinite(log_density_general([0.5, 0.7], e))


@pytest.mark.parametrize("rho,beta", [(1.0, 0.0), (1.0, 1.0), (2.0, -0.5)])
def test_tied_pair_atom_mass_is_splitting_prob(rho, beta):
    e = CharacteristicExponent.generalized(rho, beta)
    p = ModelParams(rho=rho, beta=beta)
    mass, err = quad(lambda t: math.exp(log_density_general([t, t], e)), 0, np.inf)
    assert err < 1e-7
    assert mass == pytest.approx(splitting_prob(p, 0, 2), abs=1e-7)


def test_pair_density_normalizes():
    e = CharacteristicExponent.pilgrim(1.0)
    atom, _ = quad(lambda t: math.exp(log_density_general([t, t], e)), 0, np.inf)
    cont, _ = dblquad(
        lambda s, t: math.exp(log_density_general([t, s], e)) if s != t else 0.0,
        0, np.inf, 0, np.inf,
    )
    assert atom + cont == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("rho", [1.0, 4.0])
def test_tie_pattern_frequencies_match_density_strata(rho):
    e = CharacteristicExponent.pilgrim(rho)
    reps = 100_000
    T = bulk.simulate_times_matrix(3, ModelParams(rho=rho), reps, seed=37)

    # stratum masses by quadrature of the joint density
    triple, _ = quad(lambda t: math.exp(log_density_general([t, t, t], e)), 0, np.inf)
    pair, _ = dblquad(
        lambda s, t: math.exp(log_density_general([t, t, s], e)) if s != t else 0.0,
        0, np.inf, 0, np.inf,
    )
    freq_triple = float(np.mean((T[:, 0] == T[:, 1]) & (T[:, 1] == T[:, 2])))
    se = math.sqrt(max(triple * (1 - triple), 1e-12) / reps)
    assert abs(freq_triple - triple) <= 3 * se

    for cols in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
        freq = float(
            np.mean((T[:, cols[0]] == T[:, cols[1]]) & (T[:, cols[0]] != T[:, cols[2]]))
        )
        se = math.sqrt(pair * (1 - pair) / reps)
        assert abs(freq - pair) <= 3 * se

    distinct = 1.0 - triple - 3.0 * pair
    freq_distinct = float(
        np.mean((T[:, 0] != T[:, 1]) & (T[:, 0] != T[:, 2]) & (T[:, 1] != T[:, 2]))
    )
    se = math.sqrt(distinct * (1 - distinct) / reps)
    assert abs(freq_distinct - distinct) <= 3 * se


# ---------------------------------------------------------------------------
# conditional hazard
# ---------------------------------------------------------------------------


def test_hazard_atoms_closed_form():
    e = CharacteristicExponent.pilgrim(1.5)
    hist = [0.4, 0.4, 0.4, 1.0, 2.2]  # hotels: (0.4, d=3), (1.0, d=1), (2.2, d=1)
    prof = conditional_hazard(hist, e)
    risks = [2, 1, 0]
    for atom, r, d in zip(prof.atoms, risks, [3, 1, 1]):
        assert atom == pytest.approx(math.log((1.5 + r + d) / (1.5 + r)), rel=1e-12)
    # continuous rates are first forward differences of the index
    np.testing.assert_allclose(prof.segment_rates, 1.0 / (1.5 + np.array([5, 2, 1, 0])), rtol=1e-12)


def test_merge_additivity_at_beta_zero():
    e = CharacteristicExponent.pilgrim(2.0)
    eps = 1e-9
    merged = conditional_hazard([1.0, 1.0, 1.0, 1.0, 1.0, 2.0], e)
    split = conditional_hazard([1.0, 1.0, 1.0 + eps, 1.0 + eps, 1.0 + eps, 2.0], e)
    assert split.atoms[0] + split.atoms[1] == pytest.approx(merged.atoms[0], rel=1e-12)


def test_gamma_atom_differs_from_toll_ratio():
    e = CharacteristicExponent.gamma(1.0)
    prof = conditional_hazard([0.7, 0.7], e)  # one hotel, R=0, d=2
    toll_ratio = math.log((1.0 + 0 + 2) / (1.0 + 0))
    assert abs(prof.atoms[0] - toll_ratio) > 1e-3
    # and the merge property fails
    eps = 1e-9
    merged = conditional_hazard([1.0, 1.0], e)
    split = conditional_hazard([1.0, 1.0 + eps], e)
    assert abs(split.atoms[0] + split.atoms[1] - merged.atoms[0]) > 1e-3


def test_hazard_matches_predictive_curve():
    p = ModelParams(rho=1.0, beta=0.5)
    T, _ = pg.simulate(12, p, seed=5)
    prof = conditional_hazard(T, p.exponent())
    curve = pg.predictive_survival(T, p)
    np.testing.assert_allclose(curve.atoms, prof.atoms, rtol=1e-12)
    np.testing.assert_allclose(curve.rates, prof.segment_rates, rtol=1e-12)


# ---------------------------------------------------------------------------
# recurrent-event density
# ---------------------------------------------------------------------------


def test_voyage_density_single_traveller():
    p = ModelParams(rho=2.0, nu=1.5)
    horizon = 2.0
    # k = 0 hotels
    assert voyage_log_density([[]], horizon, p) == pytest.approx(
        -1.5 * horizon / 2.0, rel=1e-12
    )
    # k = 3 hotels: Poisson-process density (nu/rho)^k e^{-nu*horizon/rho}
    times = [[0.3, 0.9, 1.4]]
    assert voyage_log_density(times, horizon, p) == pytest.approx(
        -1.5 * horizon / 2.0 + 3 * math.log(1.5 / 2.0), rel=1e-12
    )


def test_voyage_density_relabelling_invariance():
    p = ModelParams(rho=1.0)
    a = [[0.2, 0.5], [0.5], [0.9]]
    b = [[0.9], [0.2, 0.5], [0.5]]  # travellers relabelled (1,2,3) -> (2,3,1)
    assert voyage_log_density(a, 1.0, p) == pytest.approx(
        voyage_log_density(b, 1.0, p), rel=1e-12
    )


def test_voyage_density_validation():
    p = ModelParams(rho=1.0)
    with pytest.raises(ValueError):
        voyage_log_density([[1.4]], 1.0, p)  # beyond the horizon
    with pytest.raises(ValueError):
        voyage_log_density([[0.5, 0.5]], 1.0, p)  # not strictly increasing
    with pytest.raises(ValueError):
        voyage_log_density([[0.5]], 1.0, ModelParams(rho=1.0, beta=0.5))


def test_voyage_density_matches_sequential_enumeration():
    # P(no events for anyone) and P(exactly one shared hotel) at n = 2
    p = ModelParams(rho=1.0)
    horizon = 1.0
    lp_empty = voyage_log_density([[], []], horizon, p)
    #   traveller 1: no hotels (e^-1); traveller 2: no hotels (e^-1/2)
    assert lp_empty == pytest.approx(-1.0 - 0.5, rel=1e-12)
    lp_shared = voyage_log_density([[0.4], [0.4]], horizon, p)
    #   founder rate 1, occupancy prob 1/2, no other foundings
    assert lp_shared == pytest.approx(-1.5 + math.log(1.0) + math.log(0.5), rel=1e-12)

import numpy as np
import pytest

from signalmech.distributions import Beta, Exponential, Mixture, Uniform
from signalmech.errors import DomainError, NotLogConcaveError
from signalmech.posterior import HallucinationPosterior
from signalmech.pricing import (
    BruteForceTable, Regime, brute_force_price, count_segments, hybrid_price,
    is_regime_subsequence, noise_price, optimal_price, optimal_prices, regime_sequence,
    revenue_at, thresholds,
)

U01 = Uniform(0.0, 1.0)
LOG_CONCAVE = [U01, Beta(1, 2), Beta(5, 1), Exponential(1.0)]


def step(prior, grid=2000):
    return (prior.b - prior.a) / (grid - 1)


def test_revenue_at_examples():
    post = HallucinationPosterior(U01, 0.75, 0.4)
    assert revenue_at(post, 0.4) == pytest.approx(0.28)
    assert revenue_at(post, 0.5) == pytest.approx(0.1875)
    assert revenue_at(post, 0.0) == 0.0
    post2 = HallucinationPosterior(Uniform(1.0, 2.0), 0.5, 1.5)
    assert revenue_at(post2, 1.0) == pytest.approx(1.0)


def test_brute_force_examples():
    assert brute_force_price(HallucinationPosterior(U01, 0.75, 0.4)) == pytest.approx(0.4)
    assert brute_force_price(HallucinationPosterior(U01, 0.75, 0.9)) == pytest.approx(2 / 3, abs=step(U01))
    for s in (0.1, 0.5, 0.95):
        p = brute_force_price(HallucinationPosterior(U01, 0.999999, s))
        assert p == pytest.approx(0.5, abs=step(U01))
    with pytest.raises(DomainError):
        brute_force_price(HallucinationPosterior(U01, 0.5, 0.5), grid_size=999)


def test_uniform_thresholds():
    th = thresholds(U01, 0.75)
    assert th.p_ignore == pytest.approx(0.5, abs=1e-7)
    assert th.p_cap == pytest.approx(2 / 3, abs=1e-7)
    assert th.M == th.p_cap
    assert th.U == pytest.approx(1.0)
    assert th.L <= th.M <= th.U
    assert th.branch == "negative_at_a"


def test_beta12_thresholds_and_prices():
    prior = Beta(1, 2)
    th = thresholds(prior, 0.77)
    assert th.p_ignore == pytest.approx(1 / 3, abs=1e-7)
    expected = {0.1: (0.33, Regime.IGNORE), 0.5: (0.5, Regime.FOLLOW),
                0.8: (0.56, Regime.CAP), 0.95: (0.95, Regime.FOLLOW_AGAIN)}
    for s, (p, regime) in expected.items():
        got, tag = optimal_price(prior, 0.77, s)
        assert got == pytest.approx(p, abs=0.005)
        assert tag is regime


def test_gamma_near_one_collapses_to_monopoly_price():
    prices, _ = optimal_prices(U01, 0.999999, np.linspace(0, 1, 50))
    assert np.allclose(prices, 0.5, atol=1e-3)


@pytest.mark.parametrize("prior", LOG_CONCAVE, ids=lambda p: p.token())
@pytest.mark.parametrize("gamma", [0.6, 0.75, 0.77, 0.9])
def test_matches_brute_force_and_orders_regimes(prior, gamma):
    s = np.linspace(prior.a, prior.b, 200)
    prices, codes = optimal_prices(prior, gamma, s)
    brute = np.array([brute_force_price(HallucinationPosterior(prior, gamma, float(x))) for x in s])
    h = step(prior)
    assert np.max(np.abs(prices - brute)) <= h
    assert is_regime_subsequence(regime_sequence(codes))
    # brute-force prices above the signal are the monopoly price; below it they stay above it
    th = thresholds(prior, gamma)
    above = brute > s + 1e-12
    assert np.all(np.abs(brute[above] - th.p_ignore) <= h)
    below = brute < s - 1e-12
    assert np.all(brute[below] >= th.p_ignore - h)
    if np.any(codes == 2):
        assert th.p_ignore < th.p_cap <= th.M


def test_brute_force_table_matches_scalar():
    prior = Beta(1, 2)
    table = BruteForceTable(prior, 0.77)
    s = np.linspace(0, 1, 97)
    want = [brute_force_price(HallucinationPosterior(prior, 0.77, float(x))) for x in s]
    assert np.allclose(table.price(s), want, atol=1e-12)


def test_five_regime_mixture_is_not_log_concave_enough():
    mix = Mixture((0.75, 0.25), (Beta(4, 6), Beta(4, 1)))
    with pytest.raises(NotLogConcaveError):
        thresholds(mix, 0.75)
    price, tag = optimal_price(mix, 0.75, 0.5, fallback=True)
    assert tag is Regime.UNCLASSIFIED
    assert price == brute_force_price(HallucinationPosterior(mix, 0.75, 0.5))


def test_count_segments():
    s = np.linspace(0, 1, 11)
    p = np.array([0.3, 0.3, 0.3, 0.3, 0.4, 0.5, 0.6, 0.6, 0.6, 0.9, 1.0])
    assert count_segments(s, p, 1e-9) == 4
    assert count_segments(s, s, 1e-9) == 1


def test_noise_price_limits():
    prior = Beta(1, 2)
    h = step(prior)
    for s in (0.2, 0.7):
        assert noise_price(prior, 50.0, s) == pytest.approx(1 / 3, abs=h)
        hyb = hybrid_price(prior, 0.77, 1e-4, s)
        assert hyb == pytest.approx(optimal_price(prior, 0.77, s)[0], abs=h)


def _l1_distances(gamma, sigma=0.1, n=200):
    prior = Beta(1, 2)
    s = np.linspace(0.0, 1.0, n)
    hall = optimal_prices(prior, gamma, s)[0]
    noise = np.array([noise_price(prior, sigma, x) for x in s])
    hyb = np.array([hybrid_price(prior, gamma, sigma, x) for x in s])
    return np.abs(hyb - hall).mean(), np.abs(hyb - noise).mean()


def test_hybrid_curve_closer_to_hallucination():
    to_hall, to_noise = _l1_distances(0.77)
    assert to_hall < to_noise


@pytest.mark.parametrize("gamma", [0.8, 0.9])
def test_hybrid_curve_closer_to_hallucination_at_high_gamma(gamma):
    to_hall, to_noise = _l1_distances(gamma)
    assert to_hall < to_noise

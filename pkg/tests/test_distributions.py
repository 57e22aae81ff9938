import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signalmech.distributions import (
    Beta, Exponential, Lognormal, Mixture, TruncatedNormal, Uniform, check_regular,
    gamma_virtual, ironing_demo_mixture, irregular_mixture, parse_prior, prior_virtual,
    revenue_H,
)
from signalmech.errors import ConfigError, DomainError, SingularityError

PRIORS = [
    Uniform(0.0, 1.0), Uniform(1.0, 3.0), Beta(1, 2), Beta(5, 1), Beta(2, 3, 1.0, 4.0),
    Exponential(1.0), Exponential(2.5), Lognormal(0.0, 1.3), TruncatedNormal(0.5, 0.2, 0.0, 1.0),
    Mixture((0.75, 0.25), (Beta(4, 6), Beta(4, 1))), irregular_mixture(), ironing_demo_mixture(),
]


@pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.token())
def test_quantile_inverts_cdf(prior):
    q = np.linspace(0.0, 1.0, 501)
    assert np.max(np.abs(prior.cdf(prior.quantile(q)) - q)) < 1e-9
    assert prior.cdf(prior.a) == pytest.approx(0.0, abs=1e-12)
    assert prior.cdf(prior.b) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.token())
def test_pdf_is_derivative_of_cdf(prior):
    # interior quantiles only: the far tail loses everything to cancellation
    v = prior.quantile(np.linspace(0.01, 0.99, 57))
    v = v[np.all(np.abs(v[:, None] - np.array(prior.breakpoints() or [np.inf])) > 1e-4, axis=1)]
    h = 1e-6 * (prior.b - prior.a)
    num = (prior.cdf(np.minimum(v + h, prior.b)) - prior.cdf(np.maximum(v - h, prior.a))) / (2 * h)
    assert np.allclose(num, prior.pdf(v), rtol=1e-4, atol=1e-6)


@pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.token())
def test_revenue_primitive_matches_closed_form(prior):
    x = prior.quantile(np.linspace(0.0, 0.999, 41))
    closed = -x * (1.0 - prior.cdf(x))
    assert np.max(np.abs(revenue_H(prior, x) - closed)) < 1e-5 * max(1.0, prior.b)


def test_exponential_values():
    e = Exponential(1.0)
    assert e.cdf(1.0) == pytest.approx(1 - math.exp(-1) , abs=1e-6)
    assert e.b == pytest.approx(-math.log(1e-6))


def test_uniform_virtual_values():
    u = Uniform(0.0, 1.0)
    v = np.linspace(0.0, 1.0, 11)
    assert np.allclose(prior_virtual(u, v), 2 * v - 1)
    assert np.allclose(gamma_virtual(u, 0.75, v), v - (1 / 0.75 - v))


def test_virtual_value_singular_where_density_vanishes():
    with pytest.raises(SingularityError):
        prior_virtual(Beta(2, 2), 0.0)
    # at the top of the support the numerator vanishes too and phi(b) = b
    assert prior_virtual(Beta(1, 2), 1.0) == 1.0


def test_gamma_virtual_domain():
    with pytest.raises(DomainError):
        gamma_virtual(Uniform(0, 1), 1.0, 0.5)
    with pytest.raises(DomainError):
        Uniform(0, 1).cdf(1.5)


@pytest.mark.parametrize("prior,regular", [
    (Uniform(0, 1), True), (Beta(1, 2), True), (Beta(5, 1), True), (Exponential(1), True),
    (Lognormal(0, 1.8), True), (irregular_mixture("centered"), False),
    (irregular_mixture("offset"), False), (ironing_demo_mixture(), False),
])
def test_regularity(prior, regular):
    assert check_regular(prior) is regular


def test_sampling_matches_mean():
    rng = np.random.default_rng(3)
    x = Beta(5, 1).sample(rng, 200_000)
    assert abs(x.mean() - 5 / 6) < 4 * x.std() / math.sqrt(len(x))
    assert Beta(5, 1).sample(np.random.default_rng(3), 5).tolist() == \
        Beta(5, 1).sample(np.random.default_rng(3), 5).tolist()


@pytest.mark.parametrize("token,expected", [
    ("uniform:0,1", Uniform(0.0, 1.0)),
    ("beta:1,2", Beta(1.0, 2.0)),
    ("exp:2", Exponential(2.0)),
    ("lognormal:0,1.8", Lognormal(0.0, 1.8)),
])
def test_parse_prior(token, expected):
    assert parse_prior(token) == expected
    assert parse_prior(parse_prior(token).token()) == expected


def test_parse_mixture_round_trip():
    m = parse_prior("mix:0.75*beta:4,6+0.25*beta:4,1")
    assert isinstance(m, Mixture)
    assert parse_prior(m.token()) == m


@pytest.mark.parametrize("token,pos", [("beta:1,", 7), ("gamma:1,2", 0), ("uniform:1,0", None)])
def test_parse_errors_report_position(token, pos):
    with pytest.raises(ConfigError) as exc:
        parse_prior(token)
    if pos is not None:
        assert f"position {pos}" in str(exc.value)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 20), st.floats(0.1, 20), st.floats(0.0, 1.0))
def test_beta_quantile_monotone(a, b, q):
    prior = Beta(a, b)
    x = prior.quantile(q)
    assert prior.a <= x <= prior.b
    assert prior.cdf(x) == pytest.approx(q, abs=1e-8)

"""Posteriors of a buyer's value given a possibly hallucinated signal."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Prior, _scalar_or_array
from .errors import DegenerateSignalError, DomainError, SingularityError

KERNEL_WIDTH = 8.0
TAIL_NODES = 4001


def _check_gamma(gamma: float):
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")


@dataclass(frozen=True)
class HallucinationPosterior:
    """gamma * F + (1 - gamma) * point mass at the signal."""

    prior: Prior
    gamma: float
    signal: float

    def __post_init__(self):
        _check_gamma(self.gamma)
        self.prior._check_values(self.signal)


def cdf_post(post: HallucinationPosterior, v):
    F = np.asarray(post.prior.cdf(v))
    out = post.gamma * F + np.where(np.asarray(v) >= post.signal, 1.0 - post.gamma, 0.0)
    return _scalar_or_array(v, out)


def cdf_post_left(post: HallucinationPosterior, v):
    """Left limit of :func:`cdf_post`; differs from it only at the signal."""
    F = np.asarray(post.prior.cdf(v))
    out = post.gamma * F + np.where(np.asarray(v) > post.signal, 1.0 - post.gamma, 0.0)
    return _scalar_or_array(v, out)


def sample_post(post: HallucinationPosterior, rng: np.random.Generator, size=None):
    """With probability 1 - gamma the signal itself, otherwise a fresh prior draw."""
    accurate = rng.random(size) >= post.gamma
    fresh = post.prior.sample(rng, size)
    out = np.where(accurate, post.signal, fresh)
    return _scalar_or_array(accurate, out)


def effective_gamma(gamma: float, f_at_s: float, g_at_s: float) -> float:
    """Hallucination weight seen at the signal when hallucinations follow a density g."""
    _check_gamma(gamma)
    if f_at_s < 0 or g_at_s < 0:
        raise DomainError("densities must be non-negative")
    if f_at_s == 0 and g_at_s == 0:
        raise SingularityError("both densities vanish at the signal")
    if g_at_s == 0:
        return 0.0
    return 1.0 / (1.0 + (1.0 - gamma) / gamma * (f_at_s / g_at_s))


@dataclass(frozen=True)
class NoisyPosterior:
    """Signal = value + N(0, sigma^2); with ``gamma`` set, hallucinations are mixed in.

    Hallucinated signals are drawn from the prior and carry no extra noise.
    """

    prior: Prior
    sigma: float
    signal: float
    gamma: float | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.gamma is not None:
            _check_gamma(self.gamma)


@dataclass(frozen=True)
class _KernelTail:
    nodes: np.ndarray
    cum: np.ndarray  # unnormalized mass of f * kernel on [nodes[0], nodes[k]]

    @property
    def mass(self) -> float:
        return float(self.cum[-1])

    def upper(self, p: np.ndarray) -> np.ndarray:
        """Unnormalized mass above p."""
        below = np.interp(p, self.nodes, self.cum, left=0.0, right=self.cum[-1])
        return self.cum[-1] - below


def _kernel_tail(post: NoisyPosterior, nodes: int = TAIL_NODES) -> _KernelTail:
    prior, s, sd = post.prior, post.signal, post.sigma
    lo = max(prior.a, s - KERNEL_WIDTH * sd)
    hi = min(prior.b, s + KERNEL_WIDTH * sd)
    if not hi > lo:
        raise DegenerateSignalError("kernel window misses the support")
    x = np.unique(np.concatenate([np.linspace(lo, hi, nodes),
                                  [bp for bp in prior.breakpoints() if lo < bp < hi]]))
    z = (s - x) / sd
    dens = prior.pdf(x) * np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    steps = 0.5 * (dens[1:] + dens[:-1]) * np.diff(x)
    return _KernelTail(x, np.concatenate([[0.0], np.cumsum(steps)]))


def noise_normalizer(post: NoisyPosterior) -> float:
    """Integral of f(v) * kernel(s - v) over the clipped window."""
    return _kernel_tail(post).mass


def noisy_posterior_tail(post: NoisyPosterior, p):
    """P(v >= p | s) under the pure-noise or hybrid signal model."""
    prior = post.prior
    ps = prior._check_values(p)
    kt = _kernel_tail(post)
    if post.gamma is None:
        if kt.mass < 1e-300:
            raise DegenerateSignalError("posterior normalizer underflows")
        out = kt.upper(ps) / kt.mass
        return _scalar_or_array(p, out)
    g = post.gamma
    flat = g * float(prior.pdf(post.signal))
    total = (1.0 - g) * kt.mass + flat
    if total < 1e-300:
        raise DegenerateSignalError("posterior normalizer underflows")
    survival = 1.0 - np.asarray(prior.cdf(ps))
    out = ((1.0 - g) * kt.upper(ps) + flat * survival) / total
    return _scalar_or_array(p, out)

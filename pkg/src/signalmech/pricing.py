"""Single-buyer posted prices under hallucination, noise and hybrid signals."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .distributions import Prior, _phi
from .errors import DomainError, NotLogConcaveError
from .ironing import compute_T
from .posterior import HallucinationPosterior, NoisyPosterior, noisy_posterior_tail

BOUNDARY_TOL = 1e-8


class Regime(Enum):
    IGNORE = "Ignore"
    FOLLOW = "Follow"
    CAP = "Cap"
    FOLLOW_AGAIN = "FollowAgain"
    UNCLASSIFIED = "Unclassified"


REGIME_ORDER = (Regime.IGNORE, Regime.FOLLOW, Regime.CAP, Regime.FOLLOW_AGAIN)


def revenue_at(post: HallucinationPosterior, p):
    """p * P(v >= p): the atom at the signal buys at any price up to s."""
    prior, g, s = post.prior, post.gamma, post.signal
    ps = prior._check_values(p)
    F = np.asarray(prior.cdf(ps))
    out = np.where(ps <= s, ps * (1.0 - g * F), ps * (1.0 - g * F - (1.0 - g)))
    return float(out) if np.ndim(p) == 0 else out


def price_grid(prior: Prior, grid_size: int) -> np.ndarray:
    return np.linspace(prior.a, prior.b, grid_size)


def brute_force_price(post: HallucinationPosterior, grid_size: int = 2000) -> float:
    """Grid argmax of :func:`revenue_at`; the grid contains s, ties go to the lower price."""
    if grid_size < 1000:
        raise DomainError("grid_size must be at least 1000")
    grid = np.union1d(price_grid(post.prior, grid_size), [post.signal])
    rev = revenue_at(post, grid)
    return float(grid[int(np.argmax(rev))])


# ------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class Thresholds:
    p_ignore: float
    p_cap: float
    L: float
    M: float
    U: float
    C: float
    m: float
    branch: str  # which case of the general-support rule produced p_cap and L


def _bisect(fn, lo: float, hi: float, tol: float) -> float:
    """Boundary of a predicate that is False at lo and True at hi."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _first_true(grid, mask, fn, tol, empty):
    """inf{x : fn(x)} when ``mask`` samples fn on ``grid``; ``empty`` if never true."""
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return empty
    i = int(idx[0])
    if i == 0:
        return float(grid[0])
    return _bisect(fn, float(grid[i - 1]), float(grid[i]), tol)


def _last_true(grid, mask, fn, tol, empty):
    """sup{x : fn(x)} when ``mask`` samples fn on ``grid``; ``empty`` if never true."""
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return empty
    i = int(idx[-1])
    if i == len(grid) - 1:
        return float(grid[-1])
    return _bisect(lambda x: not fn(x), float(grid[i]), float(grid[i + 1]), tol)


@lru_cache(maxsize=256)
def thresholds(prior: Prior, gamma: float, grid_size: int = 2000, tol: float = BOUNDARY_TOL) -> Thresholds:
    """Regime constants of the four-regime posted-price rule.

    Boundaries are bracketed on a uniform grid and refined by bisection.
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    a, b = prior.a, prior.b
    grid = np.linspace(a, b, grid_size)

    def phi(x, g=1.0):
        return float(_phi(prior, np.array([x]), g)[0])

    def u(x):
        return x * (1.0 - gamma * float(prior.cdf(x)))

    phi_grid = _phi(prior, grid)
    p_ignore = _first_true(grid, phi_grid >= 0, lambda x: phi(x) >= 0, tol, b)

    neg = _phi(prior, grid, gamma) < 0
    if int(np.count_nonzero(neg[1:] != neg[:-1])) > 2:
        raise NotLogConcaveError("gamma-scaled virtual value has more than two sign changes")
    m = _first_true(grid, neg, lambda x: phi(x, gamma) < 0, tol, b)
    C = _last_true(grid, neg, lambda x: phi(x, gamma) < 0, tol, a)

    if neg[0]:
        branch = "negative_at_a"
        p_cap = _first_true(grid, ~neg, lambda x: phi(x, gamma) >= 0, tol, b)
    elif u(a) <= u(C):
        branch = "cap_at_C"
        p_cap = C
    else:
        branch = "cap_at_a"
        p_cap = a
    M = p_cap

    uM = u(M)
    u_grid = grid * (1.0 - gamma * np.asarray(prior.cdf(grid)))
    U = max(M, _last_true(grid, u_grid <= uM, lambda x: u(x) <= uM, tol, M))

    if neg[0]:
        s_grid = grid[:-1]
        with warnings.catch_warnings():
            # T = s at signals where mu_s(s) vanishes numerically, which is the right answer here
            warnings.simplefilter("ignore", RuntimeWarning)
            reach = np.asarray(compute_T(prior, gamma, s_grid)) >= p_ignore
            L = _first_true(s_grid, reach, lambda x: compute_T(prior, gamma, x) >= p_ignore, tol, b)
    else:
        ua = u(a)
        L = min(_first_true(grid, u_grid > ua, lambda x: u(x) > ua, tol, b), M)
    return Thresholds(p_ignore, p_cap, L, M, U, C, m, branch)


def _apply(th: Thresholds, s):
    s = np.asarray(s, dtype=float)
    price = np.where(s < th.L, th.p_ignore, np.where(s < th.M, s, np.where(s <= th.U, th.p_cap, s)))
    code = np.where(s < th.L, 0, np.where(s < th.M, 1, np.where(s <= th.U, 2, 3)))
    return price, code


def optimal_price(prior: Prior, gamma: float, s: float, grid_size: int = 2000,
                  fallback: bool = False) -> tuple[float, Regime]:
    """Optimal posted price and its regime.

    Raises :class:`NotLogConcaveError` unless ``fallback`` is set, in which case
    the brute-force price is returned with ``Regime.UNCLASSIFIED``.
    """
    prior._check_values(s)
    try:
        th = thresholds(prior, gamma, grid_size)
    except NotLogConcaveError:
        if not fallback:
            raise
        post = HallucinationPosterior(prior, gamma, s)
        return brute_force_price(post, max(grid_size, 1000)), Regime.UNCLASSIFIED
    price, code = _apply(th, s)
    return float(price), REGIME_ORDER[int(code)]


class BruteForceTable:
    """Vectorized grid argmax of the posted-price revenue for many signals.

    Prices at or below s earn p * (1 - gamma F(p)); prices above s earn
    gamma * p * (1 - F(p)).  Prefix and suffix maxima over the grid plus the
    exact value at s give the same answer as :func:`brute_force_price`.
    """

    def __init__(self, prior: Prior, gamma: float, grid_size: int = 2000):
        self.prior, self.gamma = prior, gamma
        p = price_grid(prior, grid_size)
        F = np.asarray(prior.cdf(p))
        below = p * (1.0 - gamma * F)
        above = gamma * p * (1.0 - F)
        self.p = p
        run = np.maximum.accumulate(below)
        # first index attaining each running maximum
        new = np.concatenate([[True], below[1:] > run[:-1]])
        self.pre_idx = np.maximum.accumulate(np.where(new, np.arange(len(p)), 0))
        self.pre_val = run
        # suffix maximum over indices >= i, ties to the lower index
        rev_best = np.maximum.accumulate(above[::-1])[::-1]
        idx = np.empty(len(p), dtype=np.int64)
        best = len(p) - 1
        for i in range(len(p) - 1, -1, -1):
            if above[i] >= above[best]:
                best = i
            idx[i] = best
        self.suf_idx = idx
        self.suf_val = rev_best

    def price(self, s):
        s = np.asarray(s, dtype=float)
        n = len(self.p)
        i_le = np.searchsorted(self.p, s, side="left") - 1  # last grid price strictly below s
        i_gt = np.searchsorted(self.p, s, side="right")  # first grid price strictly above s
        at_s = s * (1.0 - self.gamma * np.asarray(self.prior.cdf(s)))
        lo_val = np.where(i_le >= 0, self.pre_val[np.maximum(i_le, 0)], -np.inf)
        lo_p = self.p[self.pre_idx[np.maximum(i_le, 0)]]
        hi_val = np.where(i_gt < n, self.suf_val[np.minimum(i_gt, n - 1)], -np.inf)
        hi_p = self.p[self.suf_idx[np.minimum(i_gt, n - 1)]]
        best = np.where(lo_val >= at_s, lo_p, s)
        best_val = np.maximum(lo_val, at_s)
        return np.where(hi_val > best_val, hi_p, best)


def optimal_prices(prior: Prior, gamma: float, s, grid_size: int = 2000):
    """Vectorized optimal price; falls back to the brute-force table when not log-concave.

    Returns (prices, regime codes) with codes indexing ``REGIME_ORDER`` and -1 for
    unclassified.
    """
    try:
        th = thresholds(prior, gamma, grid_size)
    except NotLogConcaveError:
        return _table(prior, gamma, grid_size).price(s), np.full(np.shape(s), -1)
    return _apply(th, s)


@lru_cache(maxsize=64)
def _table(prior, gamma, grid_size):
    return BruteForceTable(prior, gamma, grid_size)


# ------------------------------------------------------------ noisy prices


def _argmax_price(prior, tail_fn, grid_size):
    grid = price_grid(prior, grid_size)
    rev = grid * tail_fn(grid)
    return float(grid[int(np.argmax(rev))])


def noise_price(prior: Prior, sigma: float, s: float, grid_size: int = 2000) -> float:
    post = NoisyPosterior(prior, sigma, s)
    return _argmax_price(prior, lambda p: noisy_posterior_tail(post, p), grid_size)


def hybrid_price(prior: Prior, gamma: float, sigma: float, s: float, grid_size: int = 2000) -> float:
    post = NoisyPosterior(prior, sigma, s, gamma)
    return _argmax_price(prior, lambda p: noisy_posterior_tail(post, p), grid_size)


# ------------------------------------------------------------ curve helpers


def regime_sequence(codes) -> list[Regime]:
    """Regimes in order of appearance with consecutive repeats collapsed."""
    out: list[Regime] = []
    for c in codes:
        r = REGIME_ORDER[int(c)] if int(c) >= 0 else Regime.UNCLASSIFIED
        if not out or out[-1] is not r:
            out.append(r)
    return out


def is_regime_subsequence(seq: list[Regime]) -> bool:
    pos = [REGIME_ORDER.index(r) for r in seq if r in REGIME_ORDER]
    return len(pos) == len(seq) and all(x < y for x, y in zip(pos, pos[1:]))


def count_segments(signals, prices, tol: float) -> int:
    """Number of maximal runs on which the price is constant or equals the signal."""
    count = 0
    kinds: set = set()
    for s, p in zip(signals, prices):
        here = {("const", None)}
        if abs(p - s) <= tol:
            here.add(("id", None))
        if kinds:
            keep = set()
            for kind, c in kinds:
                if kind == "id" and ("id", None) in here:
                    keep.add(("id", None))
                if kind == "const" and abs(p - c) <= tol:
                    keep.add(("const", c))
            if keep:
                kinds = keep
                continue
        count += 1
        kinds = {("const", p)} | ({("id", None)} if abs(p - s) <= tol else set())
    return count


def price_curve_rows(prior: Prior, gamma: float, sigma: float, n_signals: int = 200,
                     grid_size: int = 2000):
    """Rows (s, p_hall, p_noise, p_hall_noise, regime) over an even signal grid."""
    signals = np.linspace(prior.a, prior.b, n_signals)
    rows = []
    for s in signals:
        p_hall, regime = optimal_price(prior, gamma, float(s), grid_size, fallback=True)
        rows.append((float(s), p_hall, noise_price(prior, sigma, float(s), grid_size),
                     hybrid_price(prior, gamma, sigma, float(s), grid_size), regime.value))
    return rows

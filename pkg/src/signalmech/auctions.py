"""Eager second-price auctions, the optimal signal-revealing auction and revenue evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .distributions import Prior
from .errors import DomainError, NotLogConcaveError, SingularityError
from .ironing import PiecewiseVirtual, VirtualBatch
from .pricing import optimal_prices, price_grid, thresholds

QUAD_NODES = 2001


# ----------------------------------------------------------------- policies


@dataclass(frozen=True)
class SpaIgnore:
    """Second-price auction with the prior monopoly reserve for every buyer."""

    name: str = "spa_ignore"


@dataclass(frozen=True)
class SignalEager:
    """Each buyer's reserve is their own signal."""

    name: str = "signal_eager"


@dataclass(frozen=True)
class KUncapped:
    """The k highest-signal buyers get max(s, p*(s)), everyone else p*(s)."""

    k: int

    def __post_init__(self):
        if self.k < 0:
            raise DomainError("k must be non-negative")

    @property
    def name(self) -> str:
        return f"k_uncapped_{self.k}"


@dataclass(frozen=True)
class Hybrid:
    """Whichever of SpaIgnore and SignalEager earns more at the given gamma."""

    name: str = "hybrid"


@dataclass(frozen=True)
class Optimal:
    name: str = "optimal"


ReservePolicy = Union[SpaIgnore, SignalEager, KUncapped, Hybrid]


def _p_ignore(prior: Prior, gamma: float) -> float:
    try:
        return thresholds(prior, gamma).p_ignore
    except NotLogConcaveError:
        grid = price_grid(prior, 2000)
        rev = grid * (1.0 - np.asarray(prior.cdf(grid)))
        return float(grid[int(np.argmax(rev))])


def reserves_for(policy, signals, prior: Prior, gamma: float, hybrid_choice=None) -> np.ndarray:
    """Reserves in buyer order; ``signals`` is (n,) or (samples, n).

    Signal ranks for KUncapped are broken toward the lower buyer index.  Hybrid
    needs ``hybrid_choice`` (a SpaIgnore or SignalEager) since its pick is made
    ex ante from revenues, not from the signals.
    """
    s = np.asarray(signals, dtype=float)
    prior._check_values(s)
    if isinstance(policy, Hybrid):
        if hybrid_choice is None:
            raise DomainError("Hybrid needs the constituent chosen for this gamma")
        policy = hybrid_choice
    if isinstance(policy, SignalEager):
        return s.copy()
    if isinstance(policy, SpaIgnore):
        return np.full_like(s, _p_ignore(prior, gamma))
    if isinstance(policy, KUncapped):
        n = s.shape[-1]
        if policy.k > n:
            raise DomainError("k exceeds the number of buyers")
        p_star, _ = optimal_prices(prior, gamma, s)
        order = np.argsort(-s, axis=-1, kind="stable")
        rank = np.argsort(order, axis=-1, kind="stable")
        return np.where(rank < policy.k, np.maximum(s, p_star), p_star)
    raise DomainError(f"unknown policy {policy!r}")


# ----------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class AuctionOutcome:
    winner: int | None
    payment: float
    per_buyer_payments: np.ndarray = field(repr=False)


def _eager_batch(values: np.ndarray, reserves: np.ndarray):
    """Winner index (-1 for no sale) and payment per row."""
    active = values >= reserves
    masked = np.where(active, values, -np.inf)
    win = np.argmax(masked, axis=1)
    has = active.any(axis=1)
    rows = np.arange(len(values))
    others = masked.copy()
    others[rows, win] = -np.inf
    second = others.max(axis=1)
    pay = np.where(has, np.maximum(reserves[rows, win], second), 0.0)
    return np.where(has, win, -1), pay


def _outcome(win: int, pay: float, n: int) -> AuctionOutcome:
    per = np.zeros(n)
    if win < 0:
        return AuctionOutcome(None, 0.0, per)
    per[win] = pay
    return AuctionOutcome(win, float(pay), per)


def eager_run(values, reserves) -> AuctionOutcome:
    """Drop buyers below their reserve; the highest remaining bid wins and pays
    max(own reserve, highest competing active bid)."""
    v = np.asarray(values, dtype=float)
    r = np.asarray(reserves, dtype=float)
    if v.ndim != 1 or v.shape != r.shape or len(v) == 0:
        raise DomainError("values and reserves must be equal-length non-empty vectors")
    win, pay = _eager_batch(v[None, :], r[None, :])
    return _outcome(int(win[0]), float(pay[0]), len(v))


def optimal_run(values, psis: list[PiecewiseVirtual]) -> AuctionOutcome:
    """Highest non-negative ironed virtual value wins and pays its threshold bid."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) != len(psis) or len(v) == 0:
        raise DomainError("values and virtual values must be equal-length non-empty")
    scores = np.array([float(psi(x)) for psi, x in zip(psis, v)])
    if not np.any(scores >= 0):
        return _outcome(-1, 0.0, len(v))
    masked = np.where(scores >= 0, scores, -np.inf)
    win = int(np.argmax(masked))
    rest = np.delete(masked, win)
    z = max(0.0, float(rest.max())) if len(rest) else 0.0
    return _outcome(win, psis[win].pseudo_inverse(z), len(v))


# ------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True)
class Draws:
    signals: np.ndarray  # (samples, buyers)
    values: np.ndarray


def draw_profiles(prior: Prior, gamma: float, n_buyers: int, n_samples: int, seed: int) -> Draws:
    """Signals from the prior, then values from the hallucination posterior.

    The same seed gives the same profiles for every policy, which is what makes
    paired revenue comparisons low-variance.
    """
    if n_samples < 1 or n_buyers < 1:
        raise DomainError("need at least one sample and one buyer")
    rng = np.random.default_rng(seed)
    shape = (n_samples, n_buyers)
    s = prior.sample(rng, shape)
    accurate = rng.random(shape) >= gamma
    fresh = prior.sample(rng, shape)
    return Draws(s, np.where(accurate, s, fresh))


def optimal_revenues(prior: Prior, gamma: float, draws: Draws, batch: VirtualBatch | None = None):
    batch = batch or VirtualBatch(prior, gamma)
    s, v = draws.signals, draws.values
    n_samples, n = s.shape
    T = batch.thresholds(s.ravel())
    psi = batch.evaluate(v.ravel(), s.ravel(), T).reshape(s.shape)
    T = T.reshape(s.shape)
    eligible = psi >= 0
    masked = np.where(eligible, psi, -np.inf)
    win = np.argmax(masked, axis=1)
    has = eligible.any(axis=1)
    rows = np.arange(n_samples)
    others = masked.copy()
    others[rows, win] = -np.inf
    z = np.maximum(0.0, others.max(axis=1))
    pay = np.zeros(n_samples)
    if np.any(has):
        pay[has] = batch.inverse(z[has], s[rows, win][has], T[rows, win][has])
    return pay


def policy_revenues(policy, prior: Prior, gamma: float, draws: Draws, hybrid_choice=None):
    r = reserves_for(policy, draws.signals, prior, gamma, hybrid_choice)
    return _eager_batch(draws.values, r)[1]


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(x)), se


@dataclass
class Comparison:
    """Per-sample revenues of several auctions on one shared set of profiles."""

    gamma: float
    revenues: dict[str, np.ndarray]
    hybrid_pick: str

    def mean(self, name: str) -> float:
        return float(np.mean(self.revenues[name]))

    def stderr(self, name: str) -> float:
        return _mean_se(self.revenues[name])[1]

    def diff_stderr(self, a: str, b: str) -> float:
        return _mean_se(self.revenues[a] - self.revenues[b])[1]

    def ratio(self, name: str) -> float:
        return self.mean(name) / self.mean("optimal")

    def ratio_diff_stderr(self, a: str, b: str) -> float:
        return self.diff_stderr(a, b) / self.mean("optimal")

    @property
    def best_k(self) -> str:
        ks = [k for k in self.revenues if k.startswith("k_uncapped_")]
        return max(ks, key=lambda k: (self.mean(k), -int(k.rsplit("_", 1)[1])))


def mc_compare(prior: Prior, gamma: float, n_buyers: int = 2, n_samples: int = 100_000,
               seed: int = 0, grid_size: int = 20001) -> Comparison:
    """Optimal, SPA, signal-eager, every k-uncapped and the hybrid on common draws."""
    draws = draw_profiles(prior, gamma, n_buyers, n_samples, seed)
    rev = {"optimal": optimal_revenues(prior, gamma, draws, VirtualBatch(prior, gamma, grid_size))}
    for pol in [SpaIgnore(), SignalEager()] + [KUncapped(k) for k in range(n_buyers + 1)]:
        rev[pol.name] = policy_revenues(pol, prior, gamma, draws)
    pick = "spa_ignore" if rev["spa_ignore"].mean() >= rev["signal_eager"].mean() else "signal_eager"
    rev["hybrid"] = rev[pick]
    return Comparison(gamma, rev, pick)


def mc_revenue(prior: Prior, gamma: float, n_buyers: int, policy, n_samples: int = 100_000,
               seed: int = 0) -> tuple[float, float]:
    """Sample mean and standard error of one auction's revenue."""
    if isinstance(policy, Hybrid):
        cmp = mc_compare(prior, gamma, n_buyers, n_samples, seed)
        return _mean_se(cmp.revenues["hybrid"])
    draws = draw_profiles(prior, gamma, n_buyers, n_samples, seed)
    if isinstance(policy, Optimal):
        return _mean_se(optimal_revenues(prior, gamma, draws))
    return _mean_se(policy_revenues(policy, prior, gamma, draws))


# ------------------------------------------------------ exact, two buyers


def _eager_pair(x, y, r1, r2):
    """Revenue of the two-buyer eager auction, broadcasting over x and y."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    a1, a2 = x >= r1, y >= r2
    one_wins = a1 & (~a2 | (x >= y))
    two_wins = a2 & ~one_wins
    pay1 = np.where(a2, np.maximum(r1, y), r1)
    pay2 = np.where(a1, np.maximum(r2, x), r2)
    return np.where(one_wins, pay1, np.where(two_wins, pay2, 0.0))


def _pieces(prior: Prior, cuts) -> list[tuple[float, float]]:
    pts = sorted({prior.a, prior.b, *(c for c in cuts if prior.a < c < prior.b),
                  *(c for c in prior.breakpoints() if prior.a < c < prior.b)})
    return list(zip(pts[:-1], pts[1:]))


def _integrate(prior: Prior, fn, cuts, nodes: int = QUAD_NODES) -> float:
    """Trapezoid of fn(t) f(t) dt on each piece between cuts.

    fn may jump at a cut, so the end nodes of each piece are evaluated a hair
    inside it to pick up the one-sided value.
    """
    total = 0.0
    for lo, hi in _pieces(prior, cuts):
        t = np.linspace(lo, hi, nodes)
        inset = 1e-12 * (hi - lo)
        te = t.copy()
        te[0] += inset
        te[-1] -= inset
        vals = fn(te) * np.asarray(prior.pdf(te))
        total += float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t)))
    return total


def exact_two_buyer_revenue(prior: Prior, gamma: float, signals, policy) -> float:
    """Expected revenue given a signal pair, summing the four atom/continuous cases."""
    s1, s2 = (float(x) for x in signals)
    r1, r2 = (float(x) for x in reserves_for(policy, np.array([s1, s2]), prior, gamma))
    g, h = gamma, 1.0 - gamma
    atom_atom = float(_eager_pair(s1, s2, r1, r2))
    atom_cont = _integrate(prior, lambda y: _eager_pair(s1, y, r1, r2), (r2, s1, r1))
    cont_atom = _integrate(prior, lambda x: _eager_pair(x, s2, r1, r2), (r1, s2, r2))
    F1, F2 = float(prior.cdf(r1)), float(prior.cdf(r2))
    cont_cont = r1 * (1.0 - F1) * F2 + r2 * F1 * (1.0 - F2)

    def one_wins(y):
        m = np.maximum(r1, y)
        return np.where(y >= r2, (1.0 - np.asarray(prior.cdf(m))) * m, 0.0)

    def two_wins(x):
        m = np.maximum(r2, x)
        return np.where(x >= r1, (1.0 - np.asarray(prior.cdf(m))) * m, 0.0)

    cont_cont += _integrate(prior, one_wins, (r1, r2)) + _integrate(prior, two_wins, (r1, r2))
    return h * h * atom_atom + h * g * atom_cont + g * h * cont_atom + g * g * cont_cont


# ------------------------------------------------------ full surplus demo


@dataclass(frozen=True)
class FullSurplusReport:
    alpha: float
    gamma: float
    epsilon: float
    q1: float
    q2: float
    c1: float
    c2: float
    payments: dict  # (value, signal) -> payment
    utilities: dict  # (true value, report) -> interim utility
    revenue: float
    expected_value: float
    ic: dict
    ir: dict

    @property
    def all_pass(self) -> bool:
        return all(self.ic.values()) and all(self.ir.values()) and \
            abs(self.revenue - (self.expected_value - self.epsilon)) <= 1e-12

    def render(self) -> str:
        lines = [f"alpha={self.alpha:.12g} gamma={self.gamma:.12g} epsilon={self.epsilon:.12g}",
                 f"q1={self.q1:.12g} q2={self.q2:.12g} c1={self.c1:.12g} c2={self.c2:.12g}",
                 "payments (value, signal) -> p"]
        for (v, s), p in sorted(self.payments.items()):
            lines.append(f"  p({v},{s}) = {p:.12g}")
        lines.append("interim utility U(value; report)")
        for (v, r), u in sorted(self.utilities.items()):
            lines.append(f"  U({v};{r}) = {u:.12g}")
        for k, ok in self.ic.items():
            lines.append(f"IC {k}: {ok}")
        for k, ok in self.ir.items():
            lines.append(f"IR {k}: {ok}")
        lines.append(f"revenue = {self.revenue:.12g} (E[v] - epsilon = "
                     f"{self.expected_value - self.epsilon:.12g})")
        lines.append(f"all checks pass: {self.all_pass}")
        return "\n".join(lines)


def full_surplus_demo(alpha: float, gamma: float, epsilon: float) -> FullSurplusReport:
    """Allocate always and charge signal-dependent payments that leave each
    truthful type exactly epsilon, on the two-point prior {1 w.p. alpha, 2}.

    The signal equals the value with probability 1 - gamma, otherwise it is an
    independent prior draw.
    """
    for name, x in (("alpha", alpha), ("epsilon", epsilon)):
        if not 0.0 < x < 1.0:
            raise DomainError(f"{name} must lie in (0, 1)")
    if not 0.0 < gamma <= 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    q1 = 1.0 - gamma + gamma * alpha  # P(s = 1 | v = 1)
    q2 = gamma * alpha  # P(s = 1 | v = 2)
    if abs(q1 - q2) < 1e-15:
        raise SingularityError("signal is independent of the value; the lottery system is singular")
    # solve q1 c1 + (1 - q1) c2 = 1 and q2 c1 + (1 - q2) c2 = 0
    det = q1 * (1.0 - q2) - q2 * (1.0 - q1)
    c1 = (1.0 - q2) / det
    c2 = -q2 / det
    w = {1: c1, 2: c2}
    pay = {}
    for s in (1, 2):
        pay[(1, s)] = 1.0 - epsilon + 2.0 * (1.0 - w[s])
        pay[(2, s)] = 2.0 - epsilon + 2.0 * w[s]
    p_s1 = {1: q1, 2: q2}

    def interim(v, report):
        return sum(p * (v - pay[(report, s)]) for s, p in ((1, p_s1[v]), (2, 1.0 - p_s1[v])))

    util = {(v, r): interim(v, r) for v in (1, 2) for r in (1, 2)}
    ic = {"U(1;1) > U(1;2)": util[(1, 1)] > util[(1, 2)],
          "U(2;2) > U(2;1)": util[(2, 2)] > util[(2, 1)]}
    ir = {"U(1;1) > 0": util[(1, 1)] > 0, "U(2;2) > 0": util[(2, 2)] > 0}
    prior_v = {1: alpha, 2: 1.0 - alpha}
    revenue = sum(prior_v[v] * (p_s1[v] if s == 1 else 1.0 - p_s1[v]) * pay[(v, s)]
                  for v in (1, 2) for s in (1, 2))
    return FullSurplusReport(alpha, gamma, epsilon, q1, q2, c1, c2, pay, util, revenue,
                             alpha + 2.0 * (1.0 - alpha), ic, ir)

"""Prior families on a compact support [a, b] and the quantities built from them.

Every family exposes vectorized ``cdf``, ``pdf`` and ``quantile``.  Families
with unbounded support are cut at the ``1 - tail`` quantile and renormalized,
so every grid routine downstream can work on a compact interval.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError, SingularityError

DEFAULT_TAIL = 1e-6
_EDGE_TOL = 1e-12


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


class Prior(ABC):
    """Continuous value distribution on [a, b] with positive interior density."""

    @property
    @abstractmethod
    def a(self) -> float: ...

    @property
    @abstractmethod
    def b(self) -> float: ...

    @abstractmethod
    def _cdf(self, v: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _pdf(self, v: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _ppf(self, q: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def token(self) -> str:
        """Text form accepted by :func:`parse_prior`."""

    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where the density may jump (component support edges)."""
        return ()

    def _check_values(self, v) -> np.ndarray:
        arr = np.asarray(v, dtype=float)
        span = _EDGE_TOL * max(1.0, abs(self.b - self.a))
        if np.any(arr < self.a - span) or np.any(arr > self.b + span) or np.any(np.isnan(arr)):
            raise DomainError(f"value outside support [{self.a}, {self.b}]")
        return np.clip(arr, self.a, self.b)

    def cdf(self, v):
        arr = self._check_values(v)
        out = np.clip(self._cdf(arr), 0.0, 1.0)
        out = np.where(arr >= self.b, 1.0, np.where(arr <= self.a, 0.0, out))
        return _scalar_or_array(v, out)

    def pdf(self, v):
        arr = self._check_values(v)
        return _scalar_or_array(v, self._pdf(arr))

    def quantile(self, q):
        arr = np.asarray(q, dtype=float)
        if np.any(arr < -_EDGE_TOL) or np.any(arr > 1 + _EDGE_TOL) or np.any(np.isnan(arr)):
            raise DomainError("probability outside [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        out = np.clip(self._ppf(arr), self.a, self.b)
        out = np.where(arr <= 0.0, self.a, np.where(arr >= 1.0, self.b, out))
        return _scalar_or_array(q, out)

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform sampling."""
        return self.quantile(rng.random(size))


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class Uniform(Prior):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DomainError("uniform needs lo < hi")

    a = property(lambda self: self.lo)
    b = property(lambda self: self.hi)

    def _cdf(self, v):
        return (v - self.lo) / (self.hi - self.lo)

    def _pdf(self, v):
        return np.full_like(v, 1.0 / (self.hi - self.lo))

    def _ppf(self, q):
        return self.lo + q * (self.hi - self.lo)

    def token(self):
        return f"uniform:{self.lo:g},{self.hi:g}"


@dataclass(frozen=True)
class Beta(Prior):
    alpha: float
    beta: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or not self.hi > self.lo:
            raise DomainError("beta needs alpha, beta > 0 and lo < hi")

    a = property(lambda self: self.lo)
    b = property(lambda self: self.hi)

    @cached_property
    def _dist(self):
        return stats.beta(self.alpha, self.beta, loc=self.lo, scale=self.hi - self.lo)

    def _cdf(self, v):
        return self._dist.cdf(v)

    def _pdf(self, v):
        return self._dist.pdf(v)

    def _ppf(self, q):
        return self._dist.ppf(q)

    def token(self):
        tail = "" if (self.lo, self.hi) == (0.0, 1.0) else f",{self.lo:g},{self.hi:g}"
        return f"beta:{self.alpha:g},{self.beta:g}{tail}"


@dataclass(frozen=True)
class Exponential(Prior):
    """Exponential(rate) cut at the ``1 - tail`` quantile."""

    rate: float = 1.0
    tail: float = DEFAULT_TAIL

    def __post_init__(self):
        if self.rate <= 0 or not 0 < self.tail < 1:
            raise DomainError("exponential needs rate > 0 and tail in (0, 1)")

    a = property(lambda self: 0.0)

    @cached_property
    def b(self):
        return -math.log(self.tail) / self.rate

    @cached_property
    def _mass(self):
        return 1.0 - self.tail

    def _cdf(self, v):
        return -np.expm1(-self.rate * v) / self._mass

    def _pdf(self, v):
        return self.rate * np.exp(-self.rate * v) / self._mass

    def _ppf(self, q):
        return -np.log1p(-q * self._mass) / self.rate

    def token(self):
        return f"exponential:{self.rate:g}"


@dataclass(frozen=True)
class Lognormal(Prior):
    """exp(N(mu, sigma^2)) cut at the ``1 - tail`` quantile."""

    mu: float = 0.0
    sigma: float = 1.0
    tail: float = DEFAULT_TAIL

    def __post_init__(self):
        if self.sigma <= 0 or not 0 < self.tail < 1:
            raise DomainError("lognormal needs sigma > 0 and tail in (0, 1)")

    a = property(lambda self: 0.0)

    @cached_property
    def _dist(self):
        return stats.lognorm(self.sigma, scale=math.exp(self.mu))

    @cached_property
    def b(self):
        return float(self._dist.ppf(1.0 - self.tail))

    @cached_property
    def _mass(self):
        return float(self._dist.cdf(self.b))

    def _cdf(self, v):
        return self._dist.cdf(v) / self._mass

    def _pdf(self, v):
        return self._dist.pdf(v) / self._mass

    def _ppf(self, q):
        return self._dist.ppf(q * self._mass)

    def token(self):
        return f"lognormal:{self.mu:g},{self.sigma:g}"


@dataclass(frozen=True)
class TruncatedNormal(Prior):
    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.sigma <= 0 or not self.hi > self.lo:
            raise DomainError("truncated normal needs sigma > 0 and lo < hi")

    a = property(lambda self: self.lo)
    b = property(lambda self: self.hi)

    @cached_property
    def _dist(self):
        za = (self.lo - self.mu) / self.sigma
        zb = (self.hi - self.mu) / self.sigma
        return stats.truncnorm(za, zb, loc=self.mu, scale=self.sigma)

    def _cdf(self, v):
        return self._dist.cdf(v)

    def _pdf(self, v):
        return self._dist.pdf(v)

    def _ppf(self, q):
        return self._dist.ppf(q)

    def token(self):
        return f"truncnormal:{self.mu:g},{self.sigma:g},{self.lo:g},{self.hi:g}"


@dataclass(frozen=True)
class Mixture(Prior):
    weights: tuple
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.components) or len(w) == 0:
            raise DomainError("mixture needs one weight per component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("mixture weights must be positive and sum to 1")

    @cached_property
    def a(self):
        return min(c.a for c in self.components)

    @cached_property
    def b(self):
        return max(c.b for c in self.components)

    def _each(self, v, method):
        total = np.zeros_like(v)
        for w, comp in zip(self.weights, self.components):
            inside = (v >= comp.a) & (v <= comp.b)
            x = np.clip(v, comp.a, comp.b)
            if method == "cdf":
                part = np.where(v < comp.a, 0.0, np.where(v > comp.b, 1.0, comp._cdf(x)))
            else:
                part = np.where(inside, comp._pdf(x), 0.0)
            total = total + w * part
        return total

    def _cdf(self, v):
        return self._each(v, "cdf")

    def _pdf(self, v):
        return self._each(v, "pdf")

    def _ppf(self, q):
        lo = np.full_like(q, self.a)
        hi = np.full_like(q, self.b)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self._cdf(mid) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def breakpoints(self):
        edges = {c.a for c in self.components} | {c.b for c in self.components}
        inner = {e for e in edges if self.a < e < self.b}
        for comp in self.components:
            inner |= set(comp.breakpoints())
        return tuple(sorted(inner))

    def token(self):
        return "mix:" + "+".join(f"{w:g}*{c.token()}" for w, c in zip(self.weights, self.components))


# ---------------------------------------------------------- virtual values


def _phi(prior: Prior, v: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Unchecked ``v - (1/gamma - F(v)) / f(v)``; -inf where the density vanishes."""
    v = np.asarray(v, dtype=float)
    F = np.asarray(prior.cdf(v))
    f = np.asarray(prior.pdf(v))
    num = 1.0 / gamma - F
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(v - num / f, dtype=float)
    zero = np.asarray(f) <= 0
    if np.any(zero):
        out = np.where(zero & (np.asarray(num) <= 0), v, np.where(zero, -np.inf, out))
    return out


def _checked_phi(prior, v, gamma):
    out = _phi(prior, np.asarray(v, dtype=float), gamma)
    if np.any(np.isinf(out)):
        raise SingularityError("density vanishes at an evaluation point")
    return _scalar_or_array(v, out)


def prior_virtual(prior: Prior, v):
    """v - (1 - F(v)) / f(v)."""
    return _checked_phi(prior, v, 1.0)


def gamma_virtual(prior: Prior, gamma: float, v):
    """Virtual value of the sub-probability gamma*F: v - (1/gamma - F(v)) / f(v)."""
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    return _checked_phi(prior, v, gamma)


# ------------------------------------------------------- revenue primitive


def _support_nodes(prior: Prior, nodes: int) -> np.ndarray:
    """Union of value-uniform and quantile-uniform nodes plus density breakpoints."""
    grid = np.concatenate(
        [np.linspace(prior.a, prior.b, nodes), prior.quantile(np.linspace(0.0, 1.0, nodes))]
    )
    return np.unique(np.concatenate([grid, prior.breakpoints()]))


@dataclass(frozen=True)
class _HTable:
    t: np.ndarray
    tf: np.ndarray  # t * f(t), one-sided at breakpoints
    surv: np.ndarray  # 1 - F(t)
    cum: np.ndarray  # cumulative integral of tf - surv up to each node


@lru_cache(maxsize=64)
def _h_table(prior: Prior, nodes: int) -> _HTable:
    t = _support_nodes(prior, nodes)
    dens = prior.pdf(t)
    bps = prior.breakpoints()
    if bps:
        # duplicate each breakpoint so both one-sided density limits enter the trapezoid
        eps = 1e-12 * max(1.0, prior.b - prior.a)
        idx = np.searchsorted(t, bps)
        left = prior.pdf(np.clip(np.asarray(bps) - eps, prior.a, prior.b))
        right = prior.pdf(np.clip(np.asarray(bps) + eps, prior.a, prior.b))
        t = np.insert(t, idx, bps)
        dens = np.insert(dens, idx, left)
        dens[idx + np.arange(len(bps)) + 1] = right
    tf = t * dens
    surv = 1.0 - prior.cdf(t)
    g = tf - surv
    steps = 0.5 * (g[1:] + g[:-1]) * np.diff(t)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    return _HTable(t, tf, surv, cum)


def revenue_H(prior: Prior, x, nodes: int = 4001):
    """Composite-trapezoid value of int_a^x t dF - int_a^x (1 - F) dt - a.

    The node set holds ``nodes`` value-uniform and ``nodes`` quantile-uniform
    points; the last partial cell ends exactly at ``x``.
    """
    xs = prior._check_values(x)
    tab = _h_table(prior, int(nodes))
    k = np.clip(np.searchsorted(tab.t, xs, side="right") - 1, 0, len(tab.t) - 1)
    xf = xs * prior.pdf(xs)
    xs_surv = 1.0 - prior.cdf(xs)
    part = 0.5 * ((tab.tf[k] - tab.surv[k]) + (xf - xs_surv)) * (xs - tab.t[k])
    out = tab.cum[k] + part - prior.a
    return _scalar_or_array(x, out)


def check_regular(prior: Prior, grid_size: int = 2000) -> bool:
    """True iff the prior virtual value is non-decreasing on interior grid points."""
    if grid_size < 2:
        raise DomainError("grid_size must be at least 2")
    v = np.linspace(prior.a, prior.b, grid_size + 2)[1:-1]
    phi = _phi(prior, v)
    return bool(np.all(np.diff(phi) >= -1e-9))


# ------------------------------------------------------ irregular mixtures


def irregular_mixture(variant: str = "centered") -> Mixture:
    """0.8 truncated normal on [0.5, 0.52] + 0.2 Uniform(0, 1).

    ``variant="centered"`` puts the normal's mean 0.51 inside the window (std 0.05);
    ``variant="offset"`` uses mean 0.1, std 0.04, far below it.
    """
    params = {"centered": (0.51, 0.05), "offset": (0.1, 0.04)}
    if variant not in params:
        raise DomainError(f"unknown variant {variant!r}")
    mu, sd = params[variant]
    return Mixture((0.8, 0.2), (TruncatedNormal(mu, sd, 0.5, 0.52), Uniform(0.0, 1.0)))


def ironing_demo_mixture() -> Mixture:
    """Two truncated normals on [0, 2], weights 0.8 / 0.2."""
    return Mixture(
        (0.8, 0.2), (TruncatedNormal(0.1, 0.04, 0.0, 2.0), TruncatedNormal(1.9, 1.8, 0.0, 2.0))
    )


# ------------------------------------------------------------ token parser


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, what: str):
        raise ConfigError(f"prior token {self.text!r}: {what} at position {self.pos}")

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def word(self) -> str:
        start = self.pos
        while self.peek().isalpha():
            self.pos += 1
        if start == self.pos:
            self.error("expected family name")
        return self.text[start:self.pos].lower()

    def number(self) -> float:
        start = self.pos
        text = self.text
        n = len(text)
        i = self.pos
        if i < n and text[i] in "+-":
            i += 1
        while i < n and (text[i].isdigit() or text[i] == "."):
            i += 1
        if i < n and text[i] in "eE":
            j = i + 1
            if j < n and text[j] in "+-":
                j += 1
            if j < n and text[j].isdigit():
                i = j
                while i < n and text[i].isdigit():
                    i += 1
        try:
            value = float(text[start:i])
        except ValueError:
            self.error("expected number")
        self.pos = i
        return value

    def numbers(self) -> list[float]:
        out = [self.number()]
        while self.peek() == ",":
            self.pos += 1
            out.append(self.number())
        return out


_ARITY = {
    "uniform": (2,),
    "beta": (2, 4),
    "exponential": (1,),
    "exp": (1,),
    "lognormal": (2,),
    "truncnormal": (4,),
}


def _build(family: str, args: list[float], sc: _Scanner, start: int) -> Prior:
    if family not in _ARITY:
        sc.pos = start
        sc.error(f"unknown family {family!r}")
    if len(args) not in _ARITY[family]:
        sc.pos = start
        sc.error(f"{family} takes {' or '.join(map(str, _ARITY[family]))} parameters, got {len(args)}")
    try:
        if family == "uniform":
            return Uniform(*args)
        if family == "beta":
            return Beta(*args)
        if family in ("exponential", "exp"):
            return Exponential(args[0])
        if family == "lognormal":
            return Lognormal(*args)
        return TruncatedNormal(*args)
    except DomainError as exc:
        sc.pos = start
        sc.error(str(exc))


def _component(sc: _Scanner) -> Prior:
    start = sc.pos
    family = sc.word()
    sc.expect(":")
    if family == "mix":
        sc.pos = start
        sc.error("nested mixtures are not supported")
    return _build(family, sc.numbers(), sc, start)


def parse_prior(token: str) -> Prior:
    """Parse ``family:p1,p2[,a,b]`` or ``mix:w1*tok1+w2*tok2``."""
    sc = _Scanner(token.strip())
    start = sc.pos
    family = sc.word()
    sc.expect(":")
    if family == "mix":
        weights, comps = [], []
        while True:
            weights.append(sc.number())
            sc.expect("*")
            comps.append(_component(sc))
            if sc.peek() != "+":
                break
            sc.pos += 1
        prior: Prior
        try:
            prior = Mixture(tuple(weights), tuple(comps))
        except DomainError as exc:
            sc.pos = start
            sc.error(str(exc))
    else:
        prior = _build(family, sc.numbers(), sc, start)
    if sc.pos != len(sc.text):
        sc.error("unexpected trailing text")
    return prior

"""Ironed virtual values of the hallucination posterior.

Three routes live here:

* ``truncated_iron``: Myerson ironing of gamma*F restricted to the quantile
  window [0, gamma*F(t)].
* ``ironed_virtual``: the closed form assembled from truncated ironing below
  the signal, a flat at phi_F(T) on [s, T) and the prior virtual value above T.
* ``monteiro_oracle``: an independent check that convexifies the revenue
  primitive of the posterior (atom included) in quantile coordinates.

``VirtualBatch`` evaluates the closed form for many (signal, value) pairs at
once and backs the Monte-Carlo optimal auction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .distributions import Prior, _phi, _scalar_or_array, check_regular, revenue_H
from .errors import DomainError, NoSolutionError, PreconditionError
from .hull import lower_hull, prefix_hull_parents
from .posterior import HallucinationPosterior

T_TOL = 1e-10
T_MAX_ITER = 60


def _check_gamma(gamma: float, allow_one: bool = False):
    if not (0.0 < gamma < 1.0 or (allow_one and gamma == 1.0)):
        raise DomainError("gamma out of range")


# --------------------------------------------------------- truncated ironing


def quantile_integral(prior: Prior, gamma: float, q: np.ndarray, method: str = "trapezoid"):
    """J(q) = int_0^q phi_{gamma F}((gamma F)^{-1}(r)) dr on an increasing grid starting at 0.

    ``trapezoid`` is the cumulative trapezoid rule; cells touching a node where
    the integrand is infinite (vanishing density) fall back to the exact
    antiderivative, which is minus the revenue curve a - v(q) * (1 - q).
    ``exact`` uses that antiderivative everywhere.
    """
    q = np.asarray(q, dtype=float)
    v = prior.quantile(np.clip(q / gamma, 0.0, 1.0))
    exact = prior.a - v * (1.0 - q)
    if method == "exact":
        return exact
    if method != "trapezoid":
        raise DomainError(f"unknown method {method!r}")
    phi = _phi(prior, v, gamma)
    steps = 0.5 * (phi[1:] + phi[:-1]) * np.diff(q)
    bad = ~np.isfinite(steps)
    if np.any(bad):
        steps[bad] = np.diff(exact)[bad]
    return np.concatenate([[0.0], np.cumsum(steps)])


@dataclass
class QuantileHull:
    """Lower convex hull of J over a uniform quantile grid on [0, gamma*F(t)]."""

    prior: Prior
    gamma: float
    t: float
    q: np.ndarray
    values: np.ndarray  # prior quantile at q / gamma
    J: np.ndarray
    vertices: np.ndarray
    slopes: np.ndarray  # one per hull edge

    def slope_at_quantile(self, qx):
        """Slope of the hull edge [q_i, q_{i+1}) holding qx (last edge is closed)."""
        qv = self.q[self.vertices]
        e = np.clip(np.searchsorted(qv, qx, side="right") - 1, 0, len(self.slopes) - 1)
        return self.slopes[e]

    def __call__(self, v):
        """IRON_{[a,t]}[gamma F](v) as the raw hull slope."""
        qx = self.gamma * np.asarray(self.prior.cdf(v))
        return _scalar_or_array(v, self.slope_at_quantile(qx))

    def hull_values(self) -> np.ndarray:
        """Hull evaluated on the grid (linear between vertices)."""
        qv = self.q[self.vertices]
        return np.interp(self.q, qv, self.J[self.vertices])


def truncated_iron(prior: Prior, gamma: float, t: float, grid_size: int = 2000,
                   method: str = "trapezoid") -> QuantileHull:
    _check_gamma(gamma, allow_one=True)
    if grid_size < 100:
        raise DomainError("grid_size must be at least 100")
    if not t > prior.a:
        raise DomainError("truncation point must exceed the support minimum")
    prior._check_values(t)
    top = gamma * float(prior.cdf(t))
    q = np.linspace(0.0, top, grid_size)
    J = quantile_integral(prior, gamma, q, method)
    vertices = lower_hull(q, J)
    qv, Jv = q[vertices], J[vertices]
    slopes = np.diff(Jv) / np.diff(qv)
    values = prior.quantile(np.clip(q / gamma, 0.0, 1.0))
    values[-1] = t
    return QuantileHull(prior, gamma, t, q, values, J, vertices, slopes)


# ------------------------------------------------------------- mu and T


def mu(prior: Prior, gamma: float, s, x):
    """Auxiliary map whose first root on (s, b] is the flat's right end T."""
    _check_gamma(gamma)
    s_arr = np.asarray(s, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    Hx = np.asarray(revenue_H(prior, x_arr))
    Hs = np.asarray(revenue_H(prior, s_arr))
    Fx = np.asarray(prior.cdf(x_arr))
    Fs = np.asarray(prior.cdf(s_arr))
    phi = _phi(prior, x_arr)
    with np.errstate(invalid="ignore"):
        out = (gamma * (Hx - phi * Fx) + gamma * phi * Fs - (1.0 - gamma) * phi
               - gamma * Hs + (1.0 - gamma) * s_arr)
    return float(out) if np.ndim(out) == 0 else out


def compute_T(prior: Prior, gamma: float, s, tol: float = T_TOL, max_iter: int = T_MAX_ITER):
    """Smallest root of mu_s on (s, b] by bisection; vectorized over s."""
    _check_gamma(gamma)
    if not tol > 0:
        raise DomainError("tol must be positive")
    s_arr = np.atleast_1d(prior._check_values(s)).astype(float)
    if np.any(s_arr >= prior.b):
        raise DomainError("signal must lie below the support maximum")
    b = prior.b
    at_s = np.asarray(mu(prior, gamma, s_arr, s_arr))
    at_b = np.asarray(mu(prior, gamma, s_arr, np.full_like(s_arr, b)))
    degenerate = ~(at_s > 0)
    if np.any(degenerate):
        warnings.warn("mu_s(s) <= 0 at numerical precision; returning T = s", RuntimeWarning)
    lo = s_arr.copy()
    hi = np.full_like(s_arr, b)
    live = ~degenerate & (at_b <= 0)
    for _ in range(max_iter):
        if not np.any(live & (hi - lo > tol)):
            break
        mid = 0.5 * (lo + hi)
        pos = np.asarray(mu(prior, gamma, s_arr, mid)) > 0
        step = live & (hi - lo > tol)
        lo = np.where(step & pos, mid, lo)
        hi = np.where(step & ~pos, mid, hi)
    T = np.where(degenerate, s_arr, np.where(at_b > 0, b, 0.5 * (lo + hi)))
    return float(T[0]) if np.ndim(s) == 0 else T


# ------------------------------------------------------- piecewise virtual


class PieceKind(Enum):
    FOLLOW_GAMMA = "follow_gamma"
    CONSTANT = "constant"
    FOLLOW_PRIOR = "follow_prior"


@dataclass
class Piece:
    lo: float
    hi: float
    kind: PieceKind
    value: float = math.nan  # only for CONSTANT


@dataclass
class PiecewiseVirtual:
    """Ironed virtual value as tagged pieces tiling [a, b].

    Pieces are half-open [lo, hi) except the last, which is closed.
    """

    prior: Prior
    gamma: float
    signal: float
    threshold: float
    pieces: list[Piece]
    _los: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._los = np.array([p.lo for p in self.pieces])

    def _piece_values(self, piece: Piece, v):
        if piece.kind is PieceKind.CONSTANT:
            return np.full_like(v, piece.value)
        g = self.gamma if piece.kind is PieceKind.FOLLOW_GAMMA else 1.0
        return _phi(self.prior, v, g)

    def __call__(self, v):
        arr = self.prior._check_values(v)
        flat = np.atleast_1d(arr)
        idx = np.clip(np.searchsorted(self._los, flat, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(flat)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = self._piece_values(self.pieces[i], flat[sel])
        return float(out[0]) if np.ndim(v) == 0 else out.reshape(np.shape(arr))

    def left_limit(self, v: float) -> float:
        """Value approached from the left of v (v > a)."""
        for p in self.pieces:
            if p.lo < v <= p.hi:
                return float(self._piece_values(p, np.array([v]))[0])
        raise DomainError("no piece ends at or after v")

    def pseudo_inverse(self, z: float) -> float:
        """inf{v in [a, b] : psi(v) >= z}."""
        top = float(self(self.prior.b))
        if z > top:
            raise NoSolutionError(f"target {z} exceeds the maximum {top}")
        for p in self.pieces:
            if p.kind is PieceKind.CONSTANT:
                if p.value >= z:
                    return p.lo
                continue
            g = self.gamma if p.kind is PieceKind.FOLLOW_GAMMA else 1.0
            f = lambda x: float(_phi(self.prior, np.array([x]), g)[0])  # noqa: E731
            if f(p.lo) >= z:
                return p.lo
            if f(p.hi) < z:
                continue
            lo, hi = p.lo, p.hi
            while hi - lo > 1e-13 * max(1.0, abs(hi)):
                mid = 0.5 * (lo + hi)
                if f(mid) >= z:
                    hi = mid
                else:
                    lo = mid
            return hi
        return self.prior.b

    def is_monotone(self, grid_size: int = 4000, slack: float = 1e-9) -> bool:
        v = np.linspace(self.prior.a, self.prior.b, grid_size + 2)[1:-1]
        vals = self(v)
        ok = np.isfinite(vals)
        return bool(np.all(np.diff(vals[ok]) >= -slack))


def _refine_flats(prior, gamma, pieces: list[Piece]) -> list[Piece]:
    """Move flat endpoints to where the followed virtual value meets the flat level.

    On the grid the hull touches J only at nodes; the true ironing interval
    starts and ends where phi_{gamma F} crosses the flat value, which lies
    inside the neighboring follow cells.
    """
    phi = lambda x: float(_phi(prior, np.array([x]), gamma)[0])  # noqa: E731

    def crossing(lo, hi, c):
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if phi(mid) >= c:
                hi = mid
            else:
                lo = mid
        return hi

    for i, p in enumerate(pieces):
        if p.kind is not PieceKind.CONSTANT:
            continue
        c = p.value
        if i > 0 and pieces[i - 1].kind is PieceKind.FOLLOW_GAMMA:
            prev = pieces[i - 1]
            if phi(p.lo) > c:
                cut = prev.lo if phi(prev.lo) >= c else crossing(prev.lo, p.lo, c)
                prev.hi = p.lo = cut
        if i + 1 < len(pieces) and pieces[i + 1].kind is PieceKind.FOLLOW_GAMMA:
            nxt = pieces[i + 1]
            if phi(p.hi) < c:
                cut = nxt.hi if phi(nxt.hi) <= c else crossing(p.hi, nxt.hi, c)
                p.hi = nxt.lo = cut
    return [p for p in pieces if p.hi > p.lo]


def pre_signal_pieces(prior: Prior, gamma: float, s: float, grid_size: int = 2000,
                      method: str = "trapezoid") -> list[Piece]:
    """IRON_{[a,s]}[gamma F] on [a, s) as tagged pieces.

    Hull edges spanning more than one grid interval become flats; runs of
    single-interval edges follow phi_{gamma F}.
    """
    hull = truncated_iron(prior, gamma, s, grid_size, method)
    pieces: list[Piece] = []
    verts = hull.vertices
    for e in range(len(verts) - 1):
        i, j = int(verts[e]), int(verts[e + 1])
        lo, hi = float(hull.values[i]), float(hull.values[j])
        if j - i > 1:
            pieces.append(Piece(lo, hi, PieceKind.CONSTANT, float(hull.slopes[e])))
        elif pieces and pieces[-1].kind is PieceKind.FOLLOW_GAMMA:
            pieces[-1].hi = hi
        else:
            pieces.append(Piece(lo, hi, PieceKind.FOLLOW_GAMMA))
    pieces[0].lo = prior.a
    pieces[-1].hi = s
    return _refine_flats(prior, gamma, pieces)


@lru_cache(maxsize=256)
def _is_regular(prior: Prior) -> bool:
    return check_regular(prior, 2000)


def ironed_virtual(prior: Prior, gamma: float, s: float, grid_size: int = 2000,
                   method: str = "trapezoid") -> PiecewiseVirtual:
    """Closed-form ironed virtual value of the posterior with signal s."""
    _check_gamma(gamma)
    prior._check_values(s)
    if not _is_regular(prior):
        raise PreconditionError("prior is not regular; use monteiro_oracle instead")
    a, b = prior.a, prior.b
    pieces: list[Piece] = []
    if s > a:
        pieces.extend(pre_signal_pieces(prior, gamma, s, grid_size, method))
    if s < b:
        T = compute_T(prior, gamma, s)
        level = float(_phi(prior, np.array([T]))[0])
        if T >= b:
            pieces.append(Piece(s, b, PieceKind.CONSTANT, level))
        else:
            if T > s:
                pieces.append(Piece(s, T, PieceKind.CONSTANT, level))
            pieces.append(Piece(T, b, PieceKind.FOLLOW_PRIOR))
    else:
        T = b
        pieces.append(Piece(b, b, PieceKind.FOLLOW_PRIOR))
    return PiecewiseVirtual(prior, gamma, s, T, pieces)


def pseudo_inverse(psi: PiecewiseVirtual, z: float) -> float:
    return psi.pseudo_inverse(z)


# -------------------------------------------------------------- the oracle


@dataclass
class OracleHull:
    """Lower hull of the posterior's revenue primitive in quantile coordinates."""

    post: HallucinationPosterior
    nodes: np.ndarray  # value grid, signal included once
    cloud_q: np.ndarray  # quantile of each cloud point (the signal contributes two)
    cloud_h: np.ndarray
    node_point: np.ndarray  # cloud index of each node's point (right point at the signal)
    vertices: np.ndarray
    slopes: np.ndarray

    def _quantile(self, x):
        p = self.post
        return p.gamma * np.asarray(p.prior.cdf(x)) + np.where(np.asarray(x) >= p.signal, 1.0 - p.gamma, 0.0)

    def one_sided(self, x):
        """(left, right) slopes of the hull at each x; inf beyond the end vertices."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        qv = self.cloud_q[self.vertices]
        Q = self._quantile(xs)
        atom = xs == self.post.signal
        Q = np.where(atom, Q - 0.5 * (1.0 - self.post.gamma), Q)
        ext = np.concatenate([[-np.inf], self.slopes, [np.inf]])
        left = ext[np.searchsorted(qv, Q, side="left")]
        right = ext[np.searchsorted(qv, Q, side="right")]
        right = np.where(atom, left, right)
        return left, right

    def node_slopes(self):
        """(left, right) slopes at the grid nodes, located by cloud index."""
        pos = np.searchsorted(self.vertices, self.node_point, side="right") - 1
        is_vertex = self.vertices[pos] == self.node_point
        ext = np.concatenate([[-np.inf], self.slopes, [np.inf]])
        right = ext[pos + 1]
        left = np.where(is_vertex, ext[pos], right)
        # at the signal both sides take the edge spanning the atom's quantile gap
        atom = self.nodes == self.post.signal
        right = np.where(atom, left, right)
        return left, right

    def __call__(self, x):
        """ell(x): slope of the hull edge immediately left of the quantile of x."""
        left, _ = self.one_sided(x)
        return float(left[0]) if np.ndim(x) == 0 else left


def monteiro_oracle(post: HallucinationPosterior, grid_size: int = 2000,
                    h_nodes: int = 4001) -> OracleHull:
    if grid_size < 500:
        raise DomainError("grid_size must be at least 500")
    prior, g, s = post.prior, post.gamma, post.signal
    a, b = prior.a, prior.b
    y = np.concatenate([np.linspace(a, b, grid_size),
                        prior.quantile(np.linspace(0.0, 1.0, grid_size)), [s]])
    y = np.unique(y)
    tol = 1e-10 * (b - a)
    y = y[np.concatenate([[True], np.diff(y) > tol])]
    y = np.unique(np.append(y[np.abs(y - s) > tol], s))
    F = np.asarray(prior.cdf(y))
    H = np.asarray(revenue_H(prior, y, nodes=h_nodes))
    below = y < s
    at = int(np.searchsorted(y, s))
    q = np.where(below, g * F, g * F + 1.0 - g)
    h = np.where(below, g * H - (1.0 - g) * y, g * H)
    # the signal gets a left-limit point and an atom point
    cloud_q = np.insert(q, at, g * F[at])
    cloud_h = np.insert(h, at, g * H[at] - (1.0 - g) * s)
    node_point = np.arange(len(y)) + (np.arange(len(y)) >= at)
    vertices = lower_hull(cloud_q, cloud_h)
    slopes = np.diff(cloud_h[vertices]) / np.diff(cloud_q[vertices])
    return OracleHull(post, y, cloud_q, cloud_h, node_point, vertices, slopes)


def interval_gap(values: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Distance from each value to the closed interval [min(left, right), max(left, right)]."""
    lo = np.minimum(left, right)
    hi = np.maximum(left, right)
    with np.errstate(invalid="ignore"):
        gap = np.maximum(lo - values, values - hi)
    return np.where(np.isnan(gap), 0.0, np.maximum(gap, 0.0))


def oracle_gap(psi_values: np.ndarray, oracle: OracleHull) -> np.ndarray:
    """Per-node distance between a candidate virtual value and the oracle's subdifferential."""
    left, right = oracle.node_slopes()
    return interval_gap(np.asarray(psi_values, dtype=float), left, right)


# ---------------------------------------------------------------- CSV rows


def virtual_value_rows(prior: Prior, gamma: float, s: float, grid_size: int = 2000):
    """Rows (v, pre_iron, ironed, oracle) on the oracle's value grid; pre_iron is None at s."""
    psi = ironed_virtual(prior, gamma, s, grid_size)
    oracle = monteiro_oracle(HallucinationPosterior(prior, gamma, s), grid_size)
    v = oracle.nodes
    pre = np.where(v < s, _phi(prior, v, gamma), _phi(prior, v))
    ell = oracle(v)
    ironed = psi(v)
    return [(float(x), None if x == s else float(p), float(i), float(o))
            for x, p, i, o in zip(v, pre, ironed, ell)]


# ------------------------------------------------------------ batch route


class VirtualBatch:
    """Vectorized closed-form ironed virtual values for many signals at once.

    One lower-hull pass over a fine quantile grid of J records each point's
    monotone-chain predecessor.  The truncated hull for any signal is then a
    root path in that tree plus one chord to the signal's own quantile, found
    by binary lifting.
    """

    def __init__(self, prior: Prior, gamma: float, grid_size: int = 20001):
        _check_gamma(gamma)
        if not _is_regular(prior):
            raise PreconditionError("prior is not regular")
        self.prior, self.gamma = prior, gamma
        K = int(grid_size)
        self.u = np.linspace(0.0, 1.0, K)
        self.q = gamma * self.u
        self.v = prior.quantile(self.u)
        self.J = quantile_integral(prior, gamma, self.q, "exact")
        parent = prefix_hull_parents(self.q, self.J)
        parent[0] = 0
        self.parent = parent
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = (self.J - self.J[parent]) / (self.q - self.q[parent])
        slope[0] = -np.inf
        self.slope = slope
        levels = max(1, int(math.ceil(math.log2(K))) + 1)
        up = [parent]
        for _ in range(levels - 1):
            up.append(up[-1][up[-1]])
        self.up = up

    def _lift(self, start, pred):
        """Highest node on the root path of ``start`` satisfying ``pred`` (which holds at start)."""
        w = start.copy()
        for table in reversed(self.up):
            cand = table[w]
            ok = (cand >= 1) & pred(cand)
            w = np.where(ok, cand, w)
        return w

    @property
    def _t_table(self):
        # mu_s(x) = A(x) + phi_F(x) * B(s) + C(s); tabulate A and phi_F once
        if not hasattr(self, "_tt"):
            prior, g = self.prior, self.gamma
            x = np.unique(np.concatenate([np.linspace(prior.a, prior.b, len(self.u)), self.v]))
            phi = _phi(prior, x)
            F = np.asarray(prior.cdf(x))
            # phi is -inf where f vanishes; F is 0 there too and the product is 0
            with np.errstate(invalid="ignore"):
                A = g * (np.asarray(revenue_H(prior, x)) - np.where(F > 0, phi * F, 0.0))
            self._tt = (x, A, phi)
        return self._tt

    def thresholds(self, s) -> np.ndarray:
        """T for each signal from the tabulated split of mu_s, linear within a cell."""
        prior, g = self.prior, self.gamma
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x, A, phi = self._t_table
        B = g * np.asarray(prior.cdf(s)) - (1.0 - g)
        C = -g * np.asarray(revenue_H(prior, s)) + (1.0 - g) * s
        at_s = np.asarray(mu(prior, g, s, s))
        n = len(x)
        lo = np.searchsorted(x, s, side="right")  # first node strictly above s
        hi = np.full_like(lo, n - 1)
        with np.errstate(invalid="ignore"):
            at_b = A[-1] + phi[-1] * B + C
            # bisection on node index for the first node with mu <= 0
            lo = np.minimum(lo, n - 1)
            first_neg = A[lo] + phi[lo] * B + C <= 0
            left, right = lo.copy(), hi.copy()
            for _ in range(int(math.ceil(math.log2(n))) + 1):
                mid = (left + right) // 2
                neg = A[mid] + phi[mid] * B + C <= 0
                right = np.where(neg, mid, right)
                left = np.where(neg, left, np.minimum(mid + 1, right))
            idx = np.where(first_neg, lo, right)
            x1 = x[idx]
            m1 = A[idx] + phi[idx] * B + C
            prev = idx - 1
            use_s = first_neg | (x[np.maximum(prev, 0)] < s)
            x0 = np.where(use_s, s, x[np.maximum(prev, 0)])
            m0 = np.where(use_s, at_s, A[np.maximum(prev, 0)] + phi[np.maximum(prev, 0)] * B + C)
            T = x0 + (x1 - x0) * m0 / (m0 - m1)
        T = np.where(np.isfinite(T), T, x1)
        T = np.where(at_b > 0, prior.b, T)
        return np.where(at_s > 0, np.clip(T, s, prior.b), s)

    def _chord(self, s):
        """Per-signal anchor u0, chord slope to the signal's quantile and whether it is a flat."""
        prior, g = self.prior, self.gamma
        Fs = np.asarray(prior.cdf(s))
        Qs = g * Fs
        k = np.searchsorted(self.u, Fs, side="left") - 1
        kk = np.maximum(k, 0)
        JP = prior.a - s * (1.0 - Qs)

        def popped(w):
            return JP <= self.J[w] + self.slope[w] * (Qs - self.q[w])

        start_pop = (kk >= 1) & popped(kk)
        w = self._lift(kk, lambda c: popped(c))
        u0 = np.where(start_pop, self.parent[w], kk)
        with np.errstate(divide="ignore", invalid="ignore"):
            chord = (JP - self.J[u0]) / (Qs - self.q[u0])
        return u0, chord, u0 < kk, k

    def evaluate(self, v, s, T=None):
        """psi(v) for paired arrays of values and signals."""
        prior, g = self.prior, self.gamma
        v = np.asarray(v, dtype=float)
        s = np.asarray(s, dtype=float)
        T = self.thresholds(s) if T is None else np.asarray(T, dtype=float)
        out = np.asarray(_phi(prior, np.maximum(v, T)), dtype=float)
        pre = v < s
        if np.any(pre):
            u0, chord, flat, _ = self._chord(s[pre])
            vp = v[pre]
            uv = np.asarray(prior.cdf(vp))
            on_chord = uv >= self.u[u0]
            start_up = self.u[self.parent[u0]] > uv
            w = self._lift(u0, lambda c: self.u[self.parent[c]] > uv)
            w = np.where(start_up, self.parent[w], u0)
            single = (w - self.parent[w]) == 1
            phig = _phi(prior, vp, g)
            res = np.where(single, phig, self.slope[w])
            res = np.where(on_chord, np.where(flat, chord, phig), res)
            out[pre] = res
        return out

    def signal_left_limit(self, s):
        u0, chord, flat, _ = self._chord(np.asarray(s, dtype=float))
        return np.where(flat, chord, _phi(self.prior, np.asarray(s, dtype=float), self.gamma))

    def _solve(self, lo, hi, z, gamma):
        f_lo = _phi(self.prior, lo, gamma)
        done = f_lo >= z
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            ok = _phi(self.prior, mid, gamma) >= z
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return np.where(done, lo, hi)

    def inverse(self, z, s, T=None):
        """inf{v : psi_s(v) >= z} for paired arrays; z must not exceed psi_s(b)."""
        prior, g = self.prior, self.gamma
        z = np.asarray(z, dtype=float)
        s = np.asarray(s, dtype=float)
        T = self.thresholds(s) if T is None else np.asarray(T, dtype=float)
        level = _phi(prior, T)
        out = np.full_like(z, np.nan)
        above = z > level
        if np.any(above):
            out[above] = self._solve(T[above], np.full(int(above.sum()), prior.b), z[above], 1.0)
        rest = ~above
        if np.any(rest):
            sr, zr = s[rest], z[rest]
            u0, chord, flat, k = self._chord(sr)
            left_lim = np.where(flat, chord, _phi(prior, sr, g))
            res = np.where(k < 0, prior.a, sr)
            pre = (zr <= left_lim) & (k >= 0)
            if np.any(pre):
                sp, zp = sr[pre], zr[pre]
                u0p, chp, flp = u0[pre], chord[pre], flat[pre]
                use_chord = (u0p == 0) | (self.slope[u0p] < zp)
                w = self._lift(u0p, lambda c: self.slope[c] >= zp)
                par = self.parent[w]
                single = (w - par) == 1
                lo_edge = np.where(use_chord, self.v[u0p], self.v[par])
                hi_edge = np.where(use_chord, sp, self.v[w])
                is_flat = np.where(use_chord, flp, ~single)
                solved = self._solve(lo_edge.copy(), hi_edge.copy(), zp, g)
                res_pre = np.where(is_flat, lo_edge, solved)
                tmp = res.copy()
                tmp[pre] = res_pre
                res = tmp
            out[rest] = res
        return out

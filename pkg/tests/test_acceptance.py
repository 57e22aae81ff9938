"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
The lines are also repeated in pytest's terminal summary.
"""
import math
import tempfile
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

from conftest import report
from signalmech.auctions import KUncapped, SignalEager, exact_two_buyer_revenue, full_surplus_demo, mc_compare
from signalmech.cli import (
    DEFAULT_GAMMAS, five_regime_mixture, ironing_counterexample, main, regime_count_rows,
)
from signalmech.distributions import Beta, Exponential, Lognormal, Uniform, irregular_mixture
from signalmech.ironing import compute_T, ironed_virtual, monteiro_oracle, oracle_gap
from signalmech.posterior import HallucinationPosterior
from signalmech.pricing import (
    brute_force_price, is_regime_subsequence, optimal_price, optimal_prices, regime_sequence,
)

MC_SAMPLES = 100_000
MC_SEED = 0


def test_c1_closed_form_matches_oracle():
    start = time.perf_counter()
    worst, where = 0.0, None
    for prior in (Uniform(0, 1), Exponential(1.0), Beta(1, 2), Beta(5, 1)):
        for gamma in (0.5, 0.75, 0.9, 0.95):
            for q in (0.25, 0.5, 0.75):
                s = float(prior.quantile(q))
                psi = ironed_virtual(prior, gamma, s, 2000)
                oracle = monteiro_oracle(HallucinationPosterior(prior, gamma, s), 2000)
                gap = float(oracle_gap(psi(oracle.nodes), oracle).max())
                if gap > worst:
                    worst, where = gap, (prior.token(), gamma, q)
    elapsed = time.perf_counter() - start
    ok = worst <= 5e-3 and elapsed < 60
    report("C1 closed-form ironed virtual value = generalized-hull oracle (48 cases)", ok,
           f"max gap {worst:.2e} at {where}, {elapsed:.1f}s")
    assert ok


def test_c2_beta12_posted_prices():
    targets = {0.1: (0.33, 0.01), 0.5: (0.50, 0.005), 0.8: (0.56, 0.01), 0.95: (0.95, 0.005)}
    got = {s: optimal_price(Beta(1, 2), 0.77, s)[0] for s in targets}
    ok = all(abs(got[s] - p) <= tol for s, (p, tol) in targets.items())
    report("C2 Beta(1,2), gamma=0.77 optimal prices", ok,
           ", ".join(f"p*({s})={got[s]:.4f}" for s in targets))
    assert ok


def test_c3_exponential_anchor():
    value = float(ironed_virtual(Exponential(1.0), 0.95, 5.0)(5.0))
    ok = abs(value - 4.952) <= 0.01
    report("C3 Exponential(1), gamma=0.95, s=5 ironed virtual value", ok,
           f"{value:.5f} vs 4.952 +- 0.01")
    assert ok


def test_c4_uniform_threshold():
    T = compute_T(Uniform(0, 1), 0.75, 0.4)
    want = (0.4 + math.sqrt(11.2)) / 6
    ok = abs(T - want) <= 1e-8
    report("C4 Uniform(0,1), gamma=0.75, s=0.4 threshold", ok, f"|T - closed form| = {abs(T - want):.1e}")
    assert ok


def test_c5_regimes_agree_with_brute_force():
    worst, bad_order = 0.0, []
    for prior in (Uniform(0, 1), Beta(1, 2), Beta(5, 1), Exponential(1.0)):
        step = (prior.b - prior.a) / 1999
        s = np.linspace(prior.a, prior.b, 200)
        for gamma in (0.6, 0.75, 0.77, 0.9):
            prices, codes = optimal_prices(prior, gamma, s)
            brute = np.array([brute_force_price(HallucinationPosterior(prior, gamma, float(x)))
                              for x in s])
            worst = max(worst, float(np.max(np.abs(prices - brute)) / step))
            if not is_regime_subsequence(regime_sequence(codes)):
                bad_order.append((prior.token(), gamma))
    ok = worst <= 1.0 and not bad_order
    report("C5 four-regime price = brute force within one grid step; regimes in order", ok,
           f"max diff {worst:.3f} grid steps, out-of-order {bad_order}")
    assert ok


def test_c6_one_uncapped_beats_signal_eager_exactly():
    start = time.perf_counter()
    worst, where = np.inf, None
    for prior in (Uniform(0, 1), Beta(5, 1)):
        grid = np.linspace(prior.a, prior.b, 30)
        for gamma in (0.3, 0.6, 0.9):
            for s1 in grid:
                for s2 in grid:
                    pair = (float(s1), float(s2))
                    d = (exact_two_buyer_revenue(prior, gamma, pair, KUncapped(1))
                         - exact_two_buyer_revenue(prior, gamma, pair, SignalEager()))
                    if d < worst:
                        worst, where = d, (prior.token(), gamma, pair)
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-6 and elapsed < 300
    report("C6 exact two-buyer revenue: 1-uncapped >= signal eager on 30x30 grids", ok,
           f"min difference {worst:.2e} at {where}, {elapsed:.1f}s")
    assert ok


@lru_cache(maxsize=None)
def _sweep(token: str):
    from signalmech.distributions import parse_prior
    prior = parse_prior(token)
    return [mc_compare(prior, g, 2, MC_SAMPLES, MC_SEED + i) for i, g in enumerate(DEFAULT_GAMMAS)]


LOGNORMALS = ("lognormal:0,1.3", "lognormal:0,1.5", "lognormal:0,1.8")


def test_c7a_hybrid_dip_lognormal():
    runs = _sweep("lognormal:0,1.8")
    ratios = [c.ratio("hybrid") for c in runs]
    low = min(ratios)
    ok = 0.78 <= low <= 0.86
    report("C7a lognormal sigma=1.8 hybrid minimum ratio in [0.78, 0.86]", ok,
           f"min {low:.4f} at gamma={DEFAULT_GAMMAS[int(np.argmin(ratios))]}")
    assert ok


def test_c7b_best_k_uncapped_near_optimal():
    worst, where = np.inf, None
    for token in LOGNORMALS:
        for c in _sweep(token):
            r = c.ratio(c.best_k)
            if r < worst:
                worst, where = r, (token, c.gamma)
    ok = worst >= 0.97
    report("C7b best k-uncapped >= 0.97 of optimal, all lognormals and gammas", ok,
           f"min {worst:.4f} at {where}")
    assert ok


def test_c7c_best_k_dominates_hybrid():
    worst, where = np.inf, None
    for token in ("beta:5,1", *LOGNORMALS):
        for c in _sweep(token):
            margin = (c.ratio(c.best_k) - c.ratio("hybrid")
                      + 2 * c.ratio_diff_stderr(c.best_k, "hybrid"))
            if margin < worst:
                worst, where = margin, (token, c.gamma)
    ok = worst >= 0
    report("C7c best k-uncapped >= hybrid - 2 stderr", ok, f"min margin {worst:.2e} at {where}")
    assert ok


def test_c7d_optimal_dominates_eager():
    worst, where = np.inf, None
    for token in ("beta:5,1", *LOGNORMALS):
        for c in _sweep(token):
            for name in c.revenues:
                if name == "optimal":
                    continue
                margin = c.mean("optimal") - c.mean(name) + 3 * c.diff_stderr("optimal", name)
                margin /= c.mean("optimal")
                if margin < worst:
                    worst, where = margin, (token, c.gamma, name)
    ok = worst >= 0
    report("C7d optimal auction >= every eager variant (3 stderr slack)", ok,
           f"min relative margin {worst:.2e} at {where}")
    assert ok


def test_c8_counterexamples():
    _, gap = ironing_counterexample(irregular_mixture(), 0.9, 0.53, 2000)
    _, count = regime_count_rows(five_regime_mixture(), 0.75, 2000)
    ok = gap > 0.01 and count >= 5
    report("C8 irregular-prior ironing gap > 0.01 and >= 5 price regimes", ok,
           f"gap {gap:.4f}, regimes {count}")
    assert ok


def test_c9_full_surplus():
    rng = np.random.default_rng(2024)
    worst, all_ok = 0.0, True
    for _ in range(20):
        alpha, gamma, eps = rng.uniform(0.01, 0.99, 3)
        rep = full_surplus_demo(alpha, gamma, eps)
        worst = max(worst, abs(rep.revenue - (2 - alpha - eps)))
        all_ok &= all(rep.ic.values()) and all(rep.ir.values())
    ok = worst <= 1e-12 and all_ok
    report("C9 full-surplus mechanism: revenue = E[v] - eps, IC and IR hold", ok,
           f"max revenue error {worst:.1e}, IC/IR all {all_ok}")
    assert ok


COMMANDS = {
    "virtual-values": ["--prior", "beta:5,1", "--gamma", "0.75", "--signal", "0.8"],
    "price-curve": ["--prior", "beta:1,2", "--gamma", "0.77", "--sigma", "0.1"],
    "revenue-ratio": ["--prior", "beta:5,1", "--gamma", "0.3,0.8", "--samples", "5000", "--seed", "7"],
    "counterexamples": [],
    "full-surplus": ["--alpha", "0.3", "--gamma", "0.6", "--epsilon", "0.05"],
}


def test_c10_determinism():
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for cmd, args in COMMANDS.items():
            outputs = []
            for run in range(2):
                stem = Path(tmp) / f"{cmd}-{run}"
                assert main([cmd, *args, "--out", str(stem)]) == 0
                files = sorted(Path(tmp).glob(f"{cmd}-{run}*"))
                outputs.append([f.read_bytes() for f in files])
            if outputs[0] != outputs[1] or not outputs[0]:
                mismatched.append(cmd)
    ok = not mismatched
    report("C10 identical seed gives byte-identical output for every command", ok,
           f"mismatched {mismatched}")
    assert ok


if __name__ == "__main__":
    failures = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failures += 1
    raise SystemExit(1 if failures else 0)

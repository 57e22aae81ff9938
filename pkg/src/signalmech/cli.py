"""Command-line experiments; every command writes CSV (full-surplus writes a text report)."""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from .auctions import full_surplus_demo, mc_compare
from .distributions import Mixture, Beta, irregular_mixture, parse_prior
from .errors import ConfigError, DomainError, PreconditionError, SingularityError
from .ironing import monteiro_oracle, oracle_gap, truncated_iron, virtual_value_rows
from .posterior import HallucinationPosterior
from .pricing import brute_force_price, count_segments, price_curve_rows

SCHEMA = 1
DEFAULT_GAMMAS = tuple(float(g) for g in np.round(np.linspace(0.05, 0.95, 13), 6))
PRICE_CURVE_POINTS = 200


@dataclass(frozen=True)
class ExperimentConfig:
    prior: str | None = None
    gamma: tuple[float, ...] | None = None
    sigma: float = 0.1
    signal: float | None = None
    buyers: int = 2
    samples: int = 100_000
    seed: int = 0
    grid: int = 2000
    out: str | None = None
    alpha: float = 0.5
    epsilon: float = 0.1
    regime_gamma: float = 0.75

    def validate(self) -> "ExperimentConfig":
        if self.gamma is not None and not all(0.0 < g < 1.0 for g in self.gamma):
            raise ConfigError("every gamma must lie in (0, 1)")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.buyers < 1:
            raise ConfigError("buyers must be at least 1")
        if self.grid < 1000:
            raise ConfigError("grid must be at least 1000")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.prior is not None:
            parse_prior(self.prior)
        return self


def _as_gammas(value) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, str):
        try:
            return tuple(float(x) for x in value.split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"bad gamma list {value!r}") from None
    if isinstance(value, list):
        return tuple(float(x) for x in value)
    raise ConfigError(f"bad gamma value {value!r}")


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Flat JSON file (optional) with command-line flags taking precedence."""
    data: dict = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "gamma" in data:
        data["gamma"] = _as_gammas(data["gamma"])
    try:
        return ExperimentConfig(**data).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.12g" % float(x)


def write_csv(buf: io.StringIO, meta: dict, header: list[str], rows) -> None:
    buf.write(f"# schema={SCHEMA}\n")
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v) if not isinstance(v, (list, tuple)) else ','.join(map(_fmt, v))}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")


def _emit(cfg: ExperimentConfig, text: str, suffix: str = "") -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    path = cfg.out + suffix
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _need(value, name):
    if value is None:
        raise ConfigError(f"--{name} is required for this command")
    return value


def _single_gamma(cfg: ExperimentConfig, default: float | None = None) -> float:
    gammas = cfg.gamma if cfg.gamma is not None else ((default,) if default is not None else None)
    gammas = _need(gammas, "gamma")
    if len(gammas) != 1:
        raise ConfigError("this command takes a single gamma")
    return gammas[0]


# ---------------------------------------------------------------- commands


def cmd_virtual_values(cfg: ExperimentConfig) -> None:
    prior = parse_prior(_need(cfg.prior, "prior"))
    g = _single_gamma(cfg)
    s = float(_need(cfg.signal, "signal"))
    rows = virtual_value_rows(prior, g, s, cfg.grid)
    buf = io.StringIO()
    write_csv(buf, {"command": "virtual-values", "prior": prior.token(), "gamma": g,
                    "signal": s, "grid": cfg.grid},
              ["v", "pre_iron", "ironed", "oracle"], rows)
    _emit(cfg, buf.getvalue())


def cmd_price_curve(cfg: ExperimentConfig) -> None:
    prior = parse_prior(_need(cfg.prior, "prior"))
    g = _single_gamma(cfg)
    rows = price_curve_rows(prior, g, cfg.sigma, PRICE_CURVE_POINTS, cfg.grid)
    buf = io.StringIO()
    write_csv(buf, {"command": "price-curve", "prior": prior.token(), "gamma": g,
                    "sigma": cfg.sigma, "grid": cfg.grid, "signals": PRICE_CURVE_POINTS},
              ["s", "p_hall", "p_noise", "p_hall_noise", "regime"], rows)
    _emit(cfg, buf.getvalue())


def revenue_ratio_rows(prior, gammas, n_buyers, n_samples, seed):
    rows = []
    for i, g in enumerate(gammas):
        cmp = mc_compare(prior, g, n_buyers, n_samples, seed + i)
        ks = [cmp.ratio(f"k_uncapped_{k}") for k in range(n_buyers + 1)]
        rows.append([g, cmp.ratio("signal_eager"), cmp.ratio("k_uncapped_0"), *ks,
                     max(ks), cmp.ratio("hybrid"), cmp.hybrid_pick])
    return rows


def cmd_revenue_ratio(cfg: ExperimentConfig) -> None:
    prior = parse_prior(_need(cfg.prior, "prior"))
    gammas = cfg.gamma if cfg.gamma is not None else DEFAULT_GAMMAS
    rows = revenue_ratio_rows(prior, gammas, cfg.buyers, cfg.samples, cfg.seed)
    header = ["gamma", "ratio_signal_eager", "ratio_monopoly_eager",
              *[f"ratio_k_uncapped_{k}" for k in range(cfg.buyers + 1)],
              "ratio_best_k_uncapped", "ratio_hybrid", "hybrid_pick"]
    buf = io.StringIO()
    write_csv(buf, {"command": "revenue-ratio", "prior": prior.token(), "buyers": cfg.buyers,
                    "samples": cfg.samples, "seed": cfg.seed, "gammas": list(gammas),
                    "signal_marginal": "prior",
                    "seed_rule": "gamma index i uses seed+i"}, header, rows)
    _emit(cfg, buf.getvalue())


def ironing_counterexample(prior, gamma: float, s: float, grid: int):
    """Rows (v, truncated iron of gamma F, oracle slope, gap) on [a, s) and the max gap."""
    oracle = monteiro_oracle(HallucinationPosterior(prior, gamma, s), grid)
    hull = truncated_iron(prior, gamma, s, grid)
    v = oracle.nodes
    below = v < s
    iron = hull(v)
    gap = oracle_gap(iron, oracle)
    ell = oracle(v)
    rows = [(x, i, o, d) for x, i, o, d in zip(v[below], iron[below], ell[below], gap[below])]
    return rows, float(gap[below].max())


def regime_count_rows(prior, gamma: float, grid: int, n_signals: int = PRICE_CURVE_POINTS):
    signals = np.linspace(prior.a, prior.b, n_signals)
    prices = np.array([brute_force_price(HallucinationPosterior(prior, gamma, float(s)), grid)
                       for s in signals])
    step = (prior.b - prior.a) / (grid - 1)
    count = count_segments(signals, prices, 2.0 * step)
    return list(zip(signals, prices)), count


def five_regime_mixture() -> Mixture:
    return Mixture((0.75, 0.25), (Beta(4.0, 6.0), Beta(4.0, 1.0)))


def cmd_counterexamples(cfg: ExperimentConfig) -> None:
    prior = parse_prior(cfg.prior) if cfg.prior else irregular_mixture()
    g = _single_gamma(cfg, 0.9)
    s = cfg.signal if cfg.signal is not None else 0.53
    rows, gap = ironing_counterexample(prior, g, s, cfg.grid)
    buf = io.StringIO()
    write_csv(buf, {"command": "counterexamples", "part": "ironing", "prior": prior.token(),
                    "gamma": g, "signal": s, "grid": cfg.grid, "max_gap": gap},
              ["v", "iron_gamma", "oracle", "gap"], rows)
    mix = five_regime_mixture()
    rows2, count = regime_count_rows(mix, cfg.regime_gamma, cfg.grid)
    buf2 = io.StringIO()
    write_csv(buf2, {"command": "counterexamples", "part": "regimes", "prior": mix.token(),
                     "gamma": cfg.regime_gamma, "grid": cfg.grid, "regime_count": count},
              ["s", "p_star"], rows2)
    if cfg.out is None:
        sys.stdout.write(buf.getvalue() + buf2.getvalue())
    else:
        _emit(cfg, buf.getvalue(), ".ironing.csv")
        _emit(cfg, buf2.getvalue(), ".regimes.csv")


def cmd_full_surplus(cfg: ExperimentConfig) -> None:
    g = _single_gamma(cfg, 0.5)
    report = full_surplus_demo(cfg.alpha, g, cfg.epsilon)
    _emit(cfg, report.render() + "\n")


COMMANDS = {
    "virtual-values": cmd_virtual_values,
    "price-curve": cmd_price_curve,
    "revenue-ratio": cmd_revenue_ratio,
    "counterexamples": cmd_counterexamples,
    "full-surplus": cmd_full_surplus,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signalmech", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat JSON file; flags override its values")
        p.add_argument("--prior", help="prior token, e.g. beta:1,2 or mix:0.5*uniform:0,1+0.5*exp:2")
        p.add_argument("--gamma", help="hallucination probability, or a comma list for revenue-ratio")
        p.add_argument("--sigma", type=float)
        p.add_argument("--signal", type=float)
        p.add_argument("--buyers", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--grid", type=int)
        p.add_argument("--out", help="output path (stem for counterexamples); stdout if omitted")
        if name == "full-surplus":
            p.add_argument("--alpha", type=float)
            p.add_argument("--epsilon", type=float)
        if name == "counterexamples":
            p.add_argument("--regime-gamma", dest="regime_gamma", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PreconditionError, SingularityError) as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error for us
        import os
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())

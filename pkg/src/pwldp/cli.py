"""Command-line driver: solve, price, and compare-against-benchmark runs.

A single JSON config file describes the market, the utility, the solver
settings and (optionally) a claim and the output format.  Numeric fields
accept plain decimals or percent-suffixed strings ("1.5%" -> 0.015).  Output
is plot-ready CSV or JSON; identical config and seed give byte-identical
files.  Exit codes: 0 success, 1 tolerance failure (compare), 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import oracle
from .dp import policy_at, solve
from .hfunc import HFunc, approximate_utility
from .lattice import crr_spec, table_spec
from .multifactor import (
    HestonSpec,
    TwoFactorGBMSpec,
    correlated_lattice,
    solve_heston,
    solve_two_factor,
)
from .pricing import indifference_price, shift_terminal


class ConfigError(ValueError):
    """Raised for malformed or incomplete run configs (exit code 2)."""


# -- config parsing ---------------------------------------------------------


def parse_number(x):
    """Accept plain numbers or percent-suffixed strings ('1%' -> 0.01)."""
    if isinstance(x, str):
        s = x.strip()
        if s.endswith("%"):
            try:
                return float(s[:-1]) / 100.0
            except ValueError as exc:
                raise ConfigError(f"bad percent literal: {x!r}") from exc
        try:
            return float(s)
        except ValueError as exc:
            raise ConfigError(f"expected a number, got {x!r}") from exc
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"expected a number, got {x!r}")
    return x


def _numify(obj):
    """Recursively convert percent-suffixed strings in a config tree."""
    if isinstance(obj, dict):
        return {k: _numify(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_numify(v) for v in obj]
    if isinstance(obj, str) and obj.strip().endswith("%"):
        return parse_number(obj)
    return obj


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return _numify(raw)


def _require(cfg: dict, section: str) -> dict:
    if section not in cfg or not isinstance(cfg[section], dict):
        raise ConfigError(f"missing or malformed '{section}' section")
    return cfg[section]


def _get(section: dict, key: str, default=None, required: bool = False):
    if key not in section:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    return section[key]


def _num(section: dict, key: str, default=None, required: bool = False):
    val = _get(section, key, default=default, required=required)
    return None if val is None else parse_number(val)


# -- section builders -------------------------------------------------------


def build_utility(cfg: dict) -> HFunc:
    sec = _require(cfg, "utility")
    family = _get(sec, "family", required=True)
    if family == "custom":
        try:
            return HFunc(sec["xs"], sec["vs"], parse_number(sec["slope_left"]))
        except KeyError as exc:
            raise ConfigError(f"custom utility needs field {exc}") from exc
    w_min = _num(sec, "w_min", required=True)
    w_max = _num(sec, "w_max", required=True)
    n_points = int(_num(sec, "n_points", required=True))
    if family == "crra":
        gamma = _num(sec, "gamma", required=True)
        fn = lambda w: oracle.crra_utility(w, gamma)
    elif family == "cara":
        gamma = _num(sec, "gamma", required=True)
        fn = lambda w: oracle.cara_utility(w, gamma)
    elif family == "sahara":
        alpha = _num(sec, "alpha", required=True)
        beta = _num(sec, "beta", required=True)
        fn = lambda w: oracle.sahara_utility(w, alpha, beta)
    else:
        raise ConfigError(f"unknown utility family {family!r}")
    return approximate_utility(fn, w_min, w_max, n_points)


def build_market(cfg: dict):
    """Returns (model_name, model object).  The object is a LatticeSpec for
    'crr'/'table', a TwoFactorLattice for 'mz', a HestonSpec for 'heston'."""
    sec = _require(cfg, "market")
    solver = _require(cfg, "solver")
    n = int(_num(solver, "n", required=True))
    model = _get(sec, "model", required=True)
    if model == "crr":
        return model, crr_spec(
            s0=_num(sec, "s0", required=True),
            sigma=_num(sec, "sigma", required=True),
            r=_num(sec, "r", required=True),
            T=_num(sec, "T", required=True),
            n=n,
            mu=_num(sec, "mu"),
        )
    if model == "table":
        try:
            return model, table_spec(
                s0=_num(sec, "s0", required=True),
                T=_num(sec, "T", required=True),
                u_table=_numify(sec["u"]),
                d_table=_numify(sec["d"]),
                r_table=_numify(sec["r"]),
                mu_table=_numify(sec["mu"]),
            )
        except KeyError as exc:
            raise ConfigError(f"table market needs field {exc}") from exc
    if model == "mz":
        spec = TwoFactorGBMSpec(
            s0=_num(sec, "s0", required=True),
            y0=_num(sec, "y0", required=True),
            mu_s=_num(sec, "mu_s", required=True),
            sigma_s=_num(sec, "sigma_s", required=True),
            mu_y=_num(sec, "mu_y", required=True),
            sigma_y=_num(sec, "sigma_y", required=True),
            rho=_num(sec, "rho", required=True),
            r=_num(sec, "r", required=True),
            T=_num(sec, "T", required=True),
            n=n,
        )
        return model, correlated_lattice(spec)
    if model == "heston":
        try:
            return model, HestonSpec(
                kappa=_num(sec, "kappa", required=True),
                theta=_num(sec, "theta", required=True),
                omega=_num(sec, "omega", required=True),
                rho=_num(sec, "rho", required=True),
                r=_num(sec, "r", required=True),
                T=_num(sec, "T", required=True),
                n=n,
                m_z=int(_num(sec, "m_z", required=True)),
                m_v=int(_num(sec, "m_v", required=True)),
                s0=_num(sec, "s0", required=True),
                y0=_num(sec, "y0", required=True),
                mu=_num(sec, "mu"),
                lam=_num(sec, "lam"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown market model {model!r}")


def wealth_grid(cfg: dict, U: HFunc) -> np.ndarray:
    sec = _require(cfg, "output")
    spec = _get(sec, "wealth_grid")
    if spec is None:
        grid = np.linspace(U.xs[0], U.xs[-1], 101)
    elif isinstance(spec, list):
        grid = np.array([parse_number(x) for x in spec], dtype=float)
    elif isinstance(spec, dict):
        grid = np.linspace(
            _num(spec, "min", required=True),
            _num(spec, "max", required=True),
            int(_num(spec, "points", 101)),
        )
    else:
        raise ConfigError("wealth_grid must be a list or {min, max, points}")
    if grid.min() < U.xs[0] - 1e-12 or grid.max() > U.xs[-1] + 1e-12:
        raise ConfigError(
            f"wealth grid [{grid.min()}, {grid.max()}] outside the utility's "
            f"approximation interval [{U.xs[0]}, {U.xs[-1]}]"
        )
    return grid


def build_payoff(cfg: dict):
    """Returns (payoff function, strike list, 'S'|'Y')."""
    sec = _require(cfg, "claim")
    kind = _get(sec, "type", required=True)
    on = _get(sec, "on", "S")
    if on not in ("S", "Y"):
        raise ConfigError("claim 'on' must be 'S' or 'Y'")
    strikes = _get(sec, "strikes")
    if strikes is None:
        strikes = [_num(sec, "strike", required=True)]
    else:
        strikes = [parse_number(k) for k in strikes]
    if kind == "put":
        make = lambda K: (lambda s: max(K - s, 0.0))
    elif kind == "call":
        make = lambda K: (lambda s: max(s - K, 0.0))
    elif kind == "zero":
        make = lambda K: (lambda s: 0.0)
    else:
        raise ConfigError(f"unknown claim type {kind!r}")
    return make, strikes, on


# -- solving helpers --------------------------------------------------------


def _solver_opts(cfg: dict, args) -> dict:
    sec = _require(cfg, "solver")
    eps = args.eps if args.eps is not None else _num(sec, "eps_step", 0.0)
    threads = args.threads if args.threads is not None else int(_num(sec, "threads", 1))
    return {
        "eps_step": eps,
        "prune_every": int(_num(sec, "prune_every", 1)),
        "threads": threads,
    }


def _solve_root(model, mk, U, opts, terminal_shift=None):
    """Solve any supported model down to the root.  ``terminal_shift`` maps the
    relevant terminal state to a cash payment shifting the terminal utility."""
    if model in ("crr", "table"):
        if terminal_shift is None:
            terminal = U
        else:
            terminal = lambda k: shift_terminal(U, terminal_shift(mk.price(mk.n, k)))
        return solve(mk, terminal, keep="root", **opts)
    if model == "mz":
        if terminal_shift is None:
            terminal = lambda k, l: U
        else:
            terminal = lambda k, l: shift_terminal(U, terminal_shift(mk.factor(mk.n, l)))
        return solve_two_factor(mk, terminal, keep="root", **opts)
    if model == "heston":
        if terminal_shift is None:
            terminal = lambda S, Y: U
        else:
            terminal = lambda S, Y: shift_terminal(U, terminal_shift(S))
        return solve_heston(mk, terminal, keep="root", **opts)
    raise ConfigError(f"unknown market model {model!r}")


# -- output -----------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_rows(cfg: dict, args, header: list[str], rows: list[list]) -> None:
    sec = _require(cfg, "output")
    fmt = args.format or _get(sec, "format", "csv")
    path = args.out or _get(sec, "path")
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(x) if isinstance(x, float) else x for x in row])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps(
            {"columns": header, "rows": [[float(x) if isinstance(x, float) else x for x in row] for row in rows]},
            indent=2,
        ) + "\n"
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------


def cmd_solve(cfg: dict, args) -> int:
    U = build_utility(cfg)
    model, mk = build_market(cfg)
    grid = wealth_grid(cfg, U)
    opts = _solver_opts(cfg, args)
    n = int(_num(_require(cfg, "solver"), "n", required=True))
    if model in ("crr", "table") and n == 0:
        # degenerate run: the root value is the sampled utility itself
        values = U.evaluate(grid)
        rows = [[float(w), float(v), ""] for w, v in zip(grid, values)]
        write_rows(cfg, args, ["wealth", "value_t0", "policy_t0_risky_investment"], rows)
        return 0
    surf = _solve_root(model, mk, U, opts)
    root = surf.root
    values = root.value.evaluate(grid)
    policies = policy_at(root, grid)
    rows = [[float(w), float(v), float(b)] for w, v, b in zip(grid, values, policies)]
    write_rows(cfg, args, ["wealth", "value_t0", "policy_t0_risky_investment"], rows)
    return 0


def cmd_price(cfg: dict, args) -> int:
    U = build_utility(cfg)
    model, mk = build_market(cfg)
    grid = wealth_grid(cfg, U)
    opts = _solver_opts(cfg, args)
    make, strikes, on = build_payoff(cfg)
    if model in ("crr", "table") and on != "S":
        raise ConfigError("single-factor markets only support claims on 'S'")
    base = _solve_root(model, mk, U, opts)
    header = [
        "strike", "wealth", "indifference_price", "hedge_delta",
        "benchmark_price", "benchmark_delta",
    ]
    rows: list[list] = []
    s0 = mk.s0 if model in ("crr", "table") else (mk.spec.s0 if model == "mz" else mk.s0)
    for K in strikes:
        payoff = make(K)
        star = _solve_root(model, mk, U, opts, terminal_shift=payoff)
        if model in ("crr", "table"):
            bench_p, bench_d = oracle.crr_claim_price(mk, payoff)
        else:
            bench_p = bench_d = ""
        for w in grid:
            pi = indifference_price(base, star, float(w))
            beta = policy_at(base.root, float(w))
            beta_star = policy_at(star.root, float(w) + pi)
            delta = (beta_star - beta) / s0
            rows.append([float(K), float(w), float(pi), float(delta), bench_p, bench_d])
    write_rows(cfg, args, header, rows)
    return 0


def _compare_oracle_values(cfg: dict, args, model, mk, U, grid):
    sec = _require(cfg, "compare")
    name = _get(sec, "oracle", required=True)
    msec = _require(cfg, "market")
    T = _num(msec, "T", required=True)
    usec = _require(cfg, "utility")
    if name == "merton_crra":
        gamma = _num(usec, "gamma", required=True)
        return np.array([
            oracle.merton_crra(w, mk.r_fn(0), mk.mu_fn(0, mk.s0), _num(msec, "sigma", required=True), gamma, T).value
            for w in grid
        ])
    if name == "merton_cara":
        gamma = _num(usec, "gamma", required=True)
        return np.array([
            oracle.merton_cara(w, mk.r_fn(0), mk.mu_fn(0, mk.s0), _num(msec, "sigma", required=True), gamma, T).value
            for w in grid
        ])
    if name == "sahara":
        alpha = _num(usec, "alpha", required=True)
        beta = _num(usec, "beta", required=True)
        return np.array([
            oracle.sahara(w, 0.0, mk.r_fn(0), mk.mu_fn(0, mk.s0), _num(msec, "sigma", required=True), alpha, beta, T).value
            for w in grid
        ])
    raise ConfigError(f"no benchmark named {name!r} for model {model!r}")


def cmd_compare(cfg: dict, args) -> int:
    U = build_utility(cfg)
    model, mk = build_market(cfg)
    grid = wealth_grid(cfg, U)
    opts = _solver_opts(cfg, args)
    sec = _require(cfg, "compare")
    tol = _num(sec, "tolerance", required=True)
    metric = _get(sec, "metric", "rel")
    if metric not in ("rel", "abs"):
        raise ConfigError("compare metric must be 'rel' or 'abs'")
    surf = _solve_root(model, mk, U, opts)
    engine = np.asarray(surf.root.value.evaluate(grid))
    bench = _compare_oracle_values(cfg, args, model, mk, U, grid)
    abs_dev = np.abs(engine - bench)
    rel_dev = abs_dev / np.maximum(np.abs(bench), 1e-300)
    dev = rel_dev if metric == "rel" else abs_dev
    header = ["wealth", "engine_value", "benchmark_value", "abs_deviation", "rel_deviation"]
    rows = [
        [float(w), float(e), float(b), float(a), float(r)]
        for w, e, b, a, r in zip(grid, engine, bench, abs_dev, rel_dev)
    ]
    write_rows(cfg, args, header, rows)
    worst = float(dev.max())
    summary = (
        f"max_{metric}_deviation={worst!r} mean_abs={float(abs_dev.mean())!r} "
        f"tolerance={float(tol)!r}"
    )
    print(summary, file=sys.stderr)
    return 0 if worst <= tol else 1


# -- entry point ------------------------------------------------------------


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="pwldp",
        description="Exact lattice solver for optimal investment and indifference pricing",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("price", cmd_price), ("compare", cmd_compare)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output file (defaults to config output.path or stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--eps", type=float, default=None, help="override solver.eps_step")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=0, help="seed for any simulation benchmarks")
        p.add_argument("--kraft-grouping", choices=["a", "b"], default="b")
        p.set_defaults(fn=fn)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError) as exc:
        print(f"config error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

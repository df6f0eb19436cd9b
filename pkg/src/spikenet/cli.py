"""Command-line front end.

Subcommands::

    spikenet simulate   --graph complete --n 2 --gamma 1 --replicas 1000 --seed 7
    spikenet oracle     mean|survival|beta|invariant --graph complete --n 10 --gamma 1
    spikenet experiment concentration --out results/
    spikenet validate

Settings may also come from a flat ``key=value`` file passed with
``--config``; command-line flags take precedence. Exit codes: 0 success,
1 usage error, 2 numerical failure, 3 experiment FAIL.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__, oracle
from ._io import csv_text, fmt
from .engine import (ModelParams, configuration, full_configuration, replica_batch,
                     simulate_trajectory, write_trace_csv)
from .experiments import EXPERIMENTS, ExperimentSpec, run_experiment
from .network import build_complete, build_lattice, load_adjacency
from .rng import DEFAULT_SEED, replica_stream, resolve_seed

__all__ = ["main", "load_config", "build_parser", "UsageError"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_FAIL = 0, 1, 2, 3

# config keys accepted in files; each is also a flag (dashes for underscores)
CONFIG_KEYS = (
    "graph", "n", "gamma", "replicas", "seed", "horizon", "out", "workers", "tolerance",
    "init", "max_events", "trace", "times", "t_max", "points", "ts", "ks", "event_budget",
    "cv_threshold",
)


class UsageError(Exception):
    """Bad flags, config or parameter values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().strip()}")


def load_config(path: str) -> dict:
    """Parse a flat ``key=value`` file. Blank lines and ``#`` comments are skipped."""
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or not key:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r} "
                                 f"(known: {', '.join(CONFIG_KEYS)})")
            if key in out:
                raise UsageError(f"{path}:{lineno}: key {key!r} set twice")
            out[key] = value.strip()
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--graph", help="lattice | complete | custom:<path>")
    p.add_argument("--n", help="network size N (experiments accept a comma list)")
    p.add_argument("--gamma", help="leak rate (experiments accept a comma list)")
    p.add_argument("--replicas", help="number of independent runs")
    p.add_argument("--seed", help=f"master seed (default {DEFAULT_SEED}; 'random' draws entropy)")
    p.add_argument("--horizon", help="censoring time (default: none)")
    p.add_argument("--out", help="output file (directory for experiment/validate)")
    p.add_argument("--workers", help="worker processes; outputs do not depend on it")
    p.add_argument("--tolerance", help="absolute tolerance of exact computations")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spikenet", description="Extinction times of a leaky spiking-neuron network.")
    p.add_argument("--version", action="version", version=f"spikenet {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo extinction samples -> CSV")
    _common(s)
    s.add_argument("--init", help="comma-separated labels active at time 0 (default: all)")
    s.add_argument("--max-events", dest="max_events", help="censor runs after this many events")
    s.add_argument("--trace", help="also write the event trace of replica 0 to this CSV")

    o = sub.add_parser("oracle", help="exact quantities from the Markov chain")
    o.add_argument("quantity", choices=["mean", "survival", "beta", "invariant"])
    _common(o)
    o.add_argument("--init", help="comma-separated labels active at time 0 (default: all)")
    o.add_argument("--times", help="comma-separated survival times")
    o.add_argument("--t-max", dest="t_max", help="survival grid end (default 5 x mean)")
    o.add_argument("--points", help="survival grid size (default 101)")

    e = sub.add_parser("experiment", help="run a scripted study")
    e.add_argument("name", choices=list(EXPERIMENTS))
    _common(e)
    e.add_argument("--ts", help="comma-separated times (survival-bound)")
    e.add_argument("--ks", help="comma-separated k values (ek)")
    e.add_argument("--event-budget", dest="event_budget",
                   help="largest expected total event count to simulate per cell")
    e.add_argument("--cv-threshold", dest="cv_threshold", help="CV limit (concentration)")

    v = sub.add_parser("validate", help="exact coupling and identity checks")
    _common(v)
    return p


# ---------------------------------------------------------------- parsing

def _merge(args) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _num(cfg, key, kind, default=None, required=False, lo=None, lo_open=False):
    if key not in cfg or cfg[key] in ("", None):
        if required:
            raise UsageError(f"missing required setting '{key}' (flag --{key.replace('_', '-')})")
        return default
    raw = cfg[key]
    try:
        val = kind(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None
    if kind is float and math.isnan(val):
        raise UsageError(f"{key}: NaN is not allowed")
    if lo is not None and (val <= lo if lo_open else val < lo):
        raise UsageError(f"{key} must be {'>' if lo_open else '>='} {lo}, got {raw}")
    return val


def _list(cfg, key, kind):
    if key not in cfg:
        return ()
    try:
        return tuple(kind(x) for x in str(cfg[key]).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"{key}: expected a comma-separated list, got {cfg[key]!r}") from None


def _seed(cfg) -> int:
    try:
        return resolve_seed(cfg.get("seed"))
    except ValueError:
        raise UsageError(f"seed must be a non-negative integer or 'random', got {cfg['seed']!r}") from None


def _network(cfg):
    graph = cfg.get("graph", "complete")
    if graph.startswith("custom:"):
        if "n" in cfg:
            raise UsageError("--n conflicts with a custom graph (the file defines the size)")
        path = graph[len("custom:"):]
        try:
            return load_adjacency(path), graph
        except OSError as exc:
            raise UsageError(f"cannot read adjacency file {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if graph not in ("lattice", "complete"):
        raise UsageError(f"--graph must be lattice, complete or custom:<path>, got {graph!r}")
    N = _num(cfg, "n", int, required=True, lo=0 if graph == "lattice" else 1)
    return (build_lattice(N) if graph == "lattice" else build_complete(N)), graph


def _init(cfg, net):
    labels = _list(cfg, "init", int)
    if not labels:
        return full_configuration(net), None
    try:
        return configuration(net, labels), labels
    except (KeyError, ValueError) as exc:
        raise UsageError(f"init: {exc}") from None


def _check_output(path, directory=False):
    if path is None:
        return
    target = path if directory else (os.path.dirname(os.path.abspath(path)) or ".")
    if directory and not os.path.isdir(path):
        target = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(target) or not os.access(target, os.W_OK):
        raise UsageError(f"output location {path!r} is not writable (missing or read-only directory)")


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _header(command, items):
    return [f"spikenet {__version__} {command}"] + [f"{k}={fmt(v)}" for k, v in items]


# --------------------------------------------------------------- commands

def _cmd_simulate(cfg) -> int:
    net, graph = _network(cfg)
    gamma = _num(cfg, "gamma", float, required=True, lo=0.0)
    replicas = _num(cfg, "replicas", int, default=1000, lo=1)
    horizon = _num(cfg, "horizon", float, default=math.inf, lo=0.0)
    max_events = _num(cfg, "max_events", int, lo=0)
    workers = _num(cfg, "workers", int, default=1, lo=1)
    seed = _seed(cfg)
    init, labels = _init(cfg, net)
    out, trace = cfg.get("out"), cfg.get("trace")
    _check_output(out)
    _check_output(trace)
    params = ModelParams(gamma)
    if gamma == 0 and math.isinf(horizon) and max_events is None:
        raise UsageError("gamma = 0 needs --horizon or --max-events (extinction is not certain)")
    items = [("graph", graph), ("n", net.param if net.param is not None else net.size),
             ("gamma", gamma), ("replicas", replicas), ("seed", seed), ("horizon", horizon),
             ("max_events", "none" if max_events is None else max_events),
             ("init", "all" if labels is None else " ".join(map(str, labels)))]
    batch = replica_batch(net, params, init, replicas, seed, horizon, max_events, workers)
    rows = [(r, "extinct" if not c else "censored", t, e)
            for r, (c, t, e) in enumerate(zip(batch.censored.tolist(), batch.time.tolist(),
                                               batch.events.tolist()))]
    _emit(csv_text(["replica", "status", "time", "events"], rows,
                   _header("simulate", items)), out)
    if trace is not None:
        traj = simulate_trajectory(net, params, init, replica_stream(seed, 0), horizon, max_events)
        write_trace_csv(trace, traj, _header("simulate trace (replica 0)", items))
    return EXIT_OK


def _chain(net, graph, gamma, init, labels):
    """Generator + initial law; complete graphs use the lumped count chain."""
    if graph == "complete":
        chain = oracle.count_chain_generator(net.size, gamma)
        return chain.generator, chain.init(init.count)
    try:
        return oracle.full_state_generator(net, ModelParams(gamma)), oracle.full_state_init(net, init)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cmd_oracle(cfg, quantity) -> int:
    net, graph = _network(cfg)
    gamma = _num(cfg, "gamma", float, required=True, lo=0.0, lo_open=quantity == "invariant")
    tol = _num(cfg, "tolerance", float, default=1e-10, lo=0.0, lo_open=True)
    out = cfg.get("out")
    _check_output(out)
    items = [("graph", graph), ("n", net.param if net.param is not None else net.size),
             ("gamma", gamma)]
    if quantity == "invariant":
        if graph != "complete":
            raise UsageError("the invariant measure is defined for the complete graph only")
        if net.size < 3:
            raise UsageError("the invariant measure needs n >= 3")
        mu = oracle.invariant_measure(net.size, gamma)
        rows = [(k + 1, float(m)) for k, m in enumerate(mu.mu)]
        _emit(csv_text(["k", "mu"], rows, _header("oracle invariant", items)), out)
        return EXIT_OK
    init, labels = _init(cfg, net)
    items.append(("init", "all" if labels is None else " ".join(map(str, labels))))
    if init.is_empty:
        raise UsageError("init must contain at least one active neuron")
    if gamma == 0:
        raise UsageError("gamma = 0: extinction is not certain, exact laws are undefined")
    gen, alpha = _chain(net, graph, gamma, init, labels)
    if quantity in ("mean", "beta"):
        if quantity == "mean":
            value = oracle.expected_absorption(gen, alpha)
        else:
            value = oracle.beta_quantile(gen, alpha, tol)
            items.append(("tolerance", tol))
        if out is None:
            print(fmt(float(value)))
        else:
            _emit(csv_text(["quantity", "value"], [(quantity, float(value))],
                           _header(f"oracle {quantity}", items)), out)
        return EXIT_OK
    # survival
    times = _list(cfg, "times", float)
    if times and ("t_max" in cfg or "points" in cfg):
        raise UsageError("--times conflicts with --t-max/--points")
    if not times:
        t_max = _num(cfg, "t_max", float, lo=0.0)
        points = _num(cfg, "points", int, default=101, lo=2)
        if t_max is None:
            t_max = 5.0 * oracle.expected_absorption(gen, alpha)
        times = np.linspace(0.0, t_max, points)
    times = np.asarray(times, dtype=np.float64)
    if (times < 0).any() or (np.diff(times) < 0).any():
        raise UsageError("survival times must be non-negative and non-decreasing")
    curve = oracle.survival_function(gen, alpha, times, tol)
    items.append(("tolerance", tol))
    _emit(csv_text(["t", "prob"], zip(curve.times.tolist(), curve.probs.tolist()),
                   _header("oracle survival", items)), out)
    return EXIT_OK


def _spec(cfg, name) -> ExperimentSpec:
    ns = _list(cfg, "n", int)
    gammas = _list(cfg, "gamma", float)
    if "graph" in cfg and cfg["graph"] not in EXPERIMENTS[name][0].split("+"):
        raise UsageError(f"experiment {name!r} runs on {EXPERIMENTS[name][0]}, not {cfg['graph']}")
    kw = dict(name=name, Ns=ns, seed=_seed(cfg), workers=_num(cfg, "workers", int, default=1, lo=1),
              replicas=_num(cfg, "replicas", int, lo=0),
              horizon=_num(cfg, "horizon", float, lo=0.0, lo_open=True),
              tolerance=_num(cfg, "tolerance", float, lo=0.0, lo_open=True),
              ts=_list(cfg, "ts", float), ks=_list(cfg, "ks", int),
              event_budget=_num(cfg, "event_budget", float, lo=0.0),
              cv_threshold=_num(cfg, "cv_threshold", float, lo=0.0, lo_open=True),
              out=cfg.get("out"))
    if len(gammas) == 1:
        kw["gamma"] = gammas[0]
    elif gammas:
        kw["gammas"] = gammas
    return ExperimentSpec(**kw)


def _report(res, stream):
    verdict = {True: "PASS", False: "FAIL", None: "DESCRIPTIVE"}[res.passed]
    print(f"{res.name}: {verdict} ({res.runtime_s:.1f} s)", file=stream)
    for c in res.checks:
        mark = "PASS" if c.passed else "FAIL"
        extra = f" [{c.detail}]" if c.detail else ""
        print(f"  {mark}  {c.name}: measured {c.measured:.6g}, threshold {c.threshold:.6g}{extra}",
              file=stream)
    for n in res.notes:
        print(f"  note: {n}", file=stream)


def _run_specs(specs, out) -> int:
    _check_output(out, directory=True)
    results = []
    for spec in specs:
        try:
            res = run_experiment(spec)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if out is None:
            sys.stdout.write(res.csv())
            _report(res, sys.stderr)
        else:
            _report(res, sys.stdout)
        results.append(res)
    return EXIT_FAIL if any(r.passed is False for r in results) else EXIT_OK


def _cmd_experiment(cfg, name) -> int:
    spec = _spec(cfg, name)
    return _run_specs([spec], spec.out)


def _cmd_validate(cfg) -> int:
    seed = _seed(cfg)
    tol = _num(cfg, "tolerance", float, lo=0.0, lo_open=True)
    out = cfg.get("out")
    specs = [ExperimentSpec("coupling", seed=seed, out=out),
             ExperimentSpec("lumping", tolerance=tol, out=out),
             ExperimentSpec("invariant-measure", out=out)]
    return _run_specs(specs, out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = _merge(args)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "oracle":
            return _cmd_oracle(cfg, args.quantity)
        if args.command == "experiment":
            return _cmd_experiment(cfg, args.name)
        return _cmd_validate(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except oracle.OracleError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Desk-scale studies of extinction times, with explicit PASS/FAIL checks.

Every experiment returns an :class:`ExperimentResult`: a fixed CSV schema
(``header`` + ``rows``), the checks it evaluated (measured value, threshold,
verdict) and free-form notes. :func:`run_experiment` resolves an
:class:`ExperimentSpec` against per-experiment defaults, runs it and writes
``<name>.csv`` plus a ``<name>.json`` summary.

Monte Carlo cells are preceded by a feasibility estimate on complete
graphs: the exact expected number of simulated events is compared with an
event budget, and cells that cannot finish are reported as ``infeasible``
(and fail their checks) instead of being run.
"""
from __future__ import annotations

import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import oracle
from ._backend import BACKEND
from ._io import csv_text, fmt
from .engine import (Configuration, ModelParams, configuration, full_configuration,
                     replica_batch)
from .network import Network, build_complete, build_lattice
from .rng import DEFAULT_SEED, derive_seed, replica_stream
from .stats import dkw_band, ks_to_unit_exponential, summarize
from .timeline import build_timeline, states_on_timeline

__all__ = [
    "Check",
    "ExperimentSpec",
    "ExperimentResult",
    "ConcentrationRow",
    "ExponentialityRow",
    "EXPERIMENTS",
    "exp_lattice_concentration",
    "exp_complete_exponentiality",
    "exp_survival_bound",
    "exp_ek",
    "exp_gamma_scan",
    "exp_mc_oracle",
    "exp_coupling",
    "exp_lumping",
    "exp_invariant_measure",
    "resolve_spec",
    "run_experiment",
    "write_result",
]

MIN_REPLICAS = 100
DEFAULT_EVENT_BUDGET = 5e9  # about 7 min of compiled-kernel time on one core


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    name: str
    header: list
    rows: list
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    seed: int | None = None
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool | None:
        """``None`` for descriptive experiments without checks."""
        if not self.checks:
            return None
        return all(c.passed for c in self.checks)

    def csv(self, comments=()) -> str:
        return csv_text(self.header, self.rows, comments)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "seed": self.seed,
            "rows": [dict(zip(self.header, [_jsonable(v) for v in r])) for r in self.rows],
            "pass": self.passed,
            "runtime_s": self.runtime_s,
            "checks": [{k: _jsonable(v) for k, v in asdict(c).items()} for c in self.checks],
            "notes": list(self.notes),
            "versions": _versions(),
        }


@dataclass(frozen=True)
class ConcentrationRow:
    N: int
    mean_ratio: float  # mean of tau_N / log(2N+1)
    var_ratio: float
    var_se: float
    cv: float
    replicas: int
    censored: int = 0


@dataclass(frozen=True)
class ExponentialityRow:
    N: int
    ks: float
    ks_critical: float
    oracle_sup: float
    sup_method: str
    oracle_mean: float
    oracle_beta: float
    ratio: float
    mc_mean: float
    mc_se: float
    mc_status: str


def _jsonable(v):
    if isinstance(v, (np.generic,)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _versions() -> dict:
    import scipy

    from . import __version__
    return {"spikenet": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": BACKEND}


def _gamma_key(gamma: float) -> int:
    return int(round(gamma * 1e9))


def _require_gamma(gamma: float, strict_above: float = 0.0, why: str = ""):
    if not (math.isfinite(gamma) and gamma > strict_above):
        raise ValueError(f"gamma must be > {strict_above:g}{why}, got {gamma}")


def _require_replicas(n: int):
    if n < MIN_REPLICAS:
        raise ValueError(f"statistical experiments need at least {MIN_REPLICAS} replicas, got {n}")


def _variance_se(x: np.ndarray) -> float:
    """Large-sample standard error of the unbiased sample variance."""
    n = x.size
    d = x - x.mean()
    m2 = float(d @ d) / n
    m4 = float((d ** 2) @ (d ** 2)) / n
    return math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)


def _feasibility(N: int, gamma: float, replicas: int, budget: float):
    per_run = oracle.expected_event_count(N, gamma)
    total = per_run * replicas
    return total <= budget, per_run, total


# ------------------------------------------------------------- concentration

def exp_lattice_concentration(Ns=(50, 100, 200, 400), gamma: float = 2.0, replicas: int = 2000,
                              seed: int = DEFAULT_SEED, cv_threshold: float = 0.15,
                              mean_tolerance: float = 0.15, workers: int = 1) -> ExperimentResult:
    """Extinction time of the lattice from the all-active state along an N ladder.

    Checks that the variance of ``tau_N / log(2N+1)`` does not increase (one
    inversion within 2 SE tolerated), that the coefficient of variation at the
    largest N is below ``cv_threshold`` and that the mean of
    ``tau_N / log(2N+1)`` varies by at most ``mean_tolerance`` relative to its
    value at the largest N.
    """
    _require_gamma(gamma, 1.0, " (concentration of the extinction time is only claimed for gamma > 1)")
    _require_replicas(replicas)
    Ns = sorted(int(n) for n in Ns)
    params = ModelParams(gamma)
    rows = []
    for N in Ns:
        net = build_lattice(N)
        b = replica_batch(net, params, full_configuration(net), replicas,
                          derive_seed(seed, N, _gamma_key(gamma)), workers=workers)
        tau = b.time[~b.censored]
        ratio = tau / math.log(2 * N + 1)
        s = summarize(ratio)
        rows.append(ConcentrationRow(N, s.mean, s.variance, _variance_se(ratio),
                                     math.sqrt(s.variance) / s.mean, s.count, int(b.censored.sum())))
    checks = []
    inversions = []
    for a, b in zip(rows, rows[1:]):
        if b.var_ratio > a.var_ratio:
            allowed = 2.0 * math.hypot(a.var_se, b.var_se)
            inversions.append((a.N, b.N, b.var_ratio - a.var_ratio, allowed))
    ok = not inversions or (len(inversions) == 1 and inversions[0][2] <= inversions[0][3])
    detail = "; ".join(f"N={a}->{b}: +{d:.3g} (2SE {s:.3g})" for a, b, d, s in inversions)
    checks.append(Check("variance of tau/log(2N+1) non-increasing", len(inversions), 1, ok,
                        detail or "no inversions"))
    last = rows[-1]
    checks.append(Check(f"coefficient of variation at N={last.N}", last.cv, cv_threshold,
                        last.cv < cv_threshold))
    dev = max(abs(r.mean_ratio - last.mean_ratio) / last.mean_ratio for r in rows)
    checks.append(Check("mean of tau/log(2N+1) stable across ladder (max rel. deviation)",
                        dev, mean_tolerance, dev <= mean_tolerance))
    header = ["N", "mean_ratio", "var_ratio", "var_se", "cv", "replicas", "censored"]
    return ExperimentResult("concentration", header, [tuple(asdict(r).values()) for r in rows],
                            checks)


# ------------------------------------------------------------ exponentiality

def exp_complete_exponentiality(Ns=(10, 50, 200), gamma: float = 1.0, replicas: int = 20000,
                                seed: int = DEFAULT_SEED, tolerance: float = 1e-10,
                                ks_inflation: float = 3.0,
                                event_budget: float = DEFAULT_EVENT_BUDGET,
                                workers: int = 1) -> ExperimentResult:
    """Mean-normalized extinction time on the complete graph against ``Exp(1)``.

    Oracle columns (sup-distance of the exact survival curve to ``exp(-t)``
    on ``t in [0, 4]``, exact mean, exact ``beta_N``) never depend on the
    seed. Monte Carlo columns use ``replicas`` runs per N from the all-active
    state; ``replicas = 0`` gives an oracle-only table.
    """
    _require_gamma(gamma)
    if replicas:
        _require_replicas(replicas)
    Ns = sorted(int(n) for n in Ns)
    params = ModelParams(gamma)
    rows = []
    notes = []
    for N in Ns:
        chain = oracle.count_chain_generator(N, gamma)
        init = chain.init()
        dist = oracle.exponential_sup_distance(chain.generator, init, tol=tolerance)
        beta = oracle.beta_quantile(chain.generator, init, tol=min(1e-9, tolerance * 10))
        mean = dist.mean
        ks = crit = mc_mean = mc_se = math.nan
        status = "skipped"
        if replicas:
            ok, per_run, total = _feasibility(N, gamma, replicas, event_budget)
            if ok:
                net = build_complete(N)
                b = replica_batch(net, params, full_configuration(net), replicas,
                                  derive_seed(seed, N, _gamma_key(gamma)), workers=workers)
                k = ks_to_unit_exponential(b)
                s = summarize(b)
                ks, crit, mc_mean, mc_se, status = k.statistic, k.critical_1pct, s.mean, s.se, "ok"
            else:
                status = "infeasible"
                notes.append(f"N={N}: Monte Carlo not run; expected {per_run:.3g} events per replica, "
                             f"{total:.3g} in total, above the budget of {event_budget:.3g}")
        rows.append(ExponentialityRow(N, ks, crit, dist.value, dist.method, mean, beta,
                                      mean / beta, mc_mean, mc_se, status))

    checks = []
    sups = [r.oracle_sup for r in rows]
    dec = all(b < a for a, b in zip(sups, sups[1:]))
    steps = [b - a for a, b in zip(sups, sups[1:])]
    checks.append(Check("oracle sup-distance strictly decreasing in N (largest step)",
                        max(steps, default=0.0), 0.0, dec))
    first, last = rows[0], rows[-1]
    gap_last, gap_first = abs(last.ratio - 1), abs(first.ratio - 1)
    checks.append(Check(f"|E/beta - 1| at N={last.N} below N={first.N}", gap_last, gap_first,
                        gap_last < gap_first))
    if replicas:
        for r in rows:
            if r.mc_status == "ok":
                z = abs(r.mc_mean - r.oracle_mean) / r.mc_se if r.mc_se > 0 else math.inf
                checks.append(Check(f"MC mean within 4 SE of exact mean at N={r.N}", z, 4.0, z <= 4.0))
            else:
                checks.append(Check(f"MC mean within 4 SE of exact mean at N={r.N}", math.nan, 4.0,
                                    False, "infeasible"))
        if last.mc_status == "ok":
            lim = ks_inflation * last.ks_critical
            checks.append(Check(f"KS at N={last.N} below {ks_inflation:g} x 1% critical value",
                                last.ks, lim, last.ks < lim))
        else:
            checks.append(Check(f"KS at N={last.N} below {ks_inflation:g} x 1% critical value",
                                math.nan, math.nan, False, "infeasible"))
        if len(rows) > 1:
            both = first.mc_status == "ok" and last.mc_status == "ok"
            checks.append(Check(f"KS at N={last.N} below KS at N={first.N}", last.ks, first.ks,
                                both and last.ks < first.ks, "" if both else "infeasible"))
    header = [f.name for f in fields(ExponentialityRow)]
    return ExperimentResult("exponentiality", header, [tuple(asdict(r).values()) for r in rows],
                            checks, notes)


# -------------------------------------------------------------- MC vs oracle

def exp_mc_oracle(Ns=(2, 10, 50), gammas=(0.5, 1.0, 2.0), replicas: int = 10000,
                  seed: int = DEFAULT_SEED, tolerance: float = 1e-10, dkw_level: float = 0.01,
                  event_budget: float = DEFAULT_EVENT_BUDGET, workers: int = 1) -> ExperimentResult:
    """Monte Carlo extinction times on ``K_N`` against the exact count chain.

    Per cell: the MC mean must lie within 4 SE of the exact mean, and the
    empirical survival function within the DKW band (level ``dkw_level``)
    of the exact curve, measured as the sup over all sample points.
    """
    _require_replicas(replicas)
    rows, checks, notes = [], [], []
    for N in sorted(int(n) for n in Ns):
        for gamma in gammas:
            _require_gamma(gamma)
            chain = oracle.count_chain_generator(N, gamma)
            exact = oracle.expected_absorption(chain.generator, chain.init())
            band = dkw_band(replicas, dkw_level)
            ok, per_run, total = _feasibility(N, gamma, replicas, event_budget)
            if not ok:
                notes.append(f"N={N}, gamma={gamma:g}: Monte Carlo not run; expected {per_run:.3g} "
                             f"events per replica, {total:.3g} in total, above the budget of "
                             f"{event_budget:.3g}")
                rows.append((N, gamma, exact, math.nan, math.nan, math.nan, math.nan, band,
                             "infeasible", False))
                checks.append(Check(f"N={N} gamma={gamma:g}", math.nan, 4.0, False, "infeasible"))
                continue
            net = build_complete(N)
            b = replica_batch(net, ModelParams(gamma), full_configuration(net), replicas,
                              derive_seed(seed, N, _gamma_key(gamma)), workers=workers)
            s = summarize(b)
            z = (s.mean - exact) / s.se
            x = np.sort(b.time)
            F = 1.0 - oracle.survival_function(chain.generator, chain.init(), x, tolerance).probs
            i = np.arange(1, x.size + 1)
            d = max(float((i / x.size - F).max()), float((F - (i - 1) / x.size).max()))
            passed = abs(z) <= 4.0 and d <= band
            rows.append((N, gamma, exact, s.mean, s.se, z, d, band, "ok", passed))
            checks.append(Check(f"N={N} gamma={gamma:g} mean |z|", abs(z), 4.0, abs(z) <= 4.0))
            checks.append(Check(f"N={N} gamma={gamma:g} sup|S_mc - S|", d, band, d <= band))
            if N == 2 and gamma == 1.0:
                checks.append(Check("exact E(sigma_2) at gamma=1 equals 1.25", exact, 1.25,
                                    abs(exact - 1.25) <= 1e-12))
    header = ["N", "gamma", "oracle_mean", "mc_mean", "mc_se", "z", "dkw_distance", "dkw_band",
              "mc_status", "pass"]
    return ExperimentResult("mc-oracle", header, rows, checks, notes)


# ------------------------------------------------------------ survival bound

def exp_survival_bound(N: int = 50, gammas=(1.2, 2.0), ts=(0.5, 1.0, 2.0, 3.0),
                       replicas: int = 100000, seed: int = DEFAULT_SEED,
                       workers: int = 1) -> ExperimentResult:
    """Survival of the lattice started from the single centre neuron.

    Each replica runs once up to ``max(ts)``; it is alive at ``t`` when it has
    not gone extinct by then. PASS if the empirical survival fraction stays
    below ``exp(-(gamma - 1) t) + 3 SE`` at every t.
    """
    _require_replicas(replicas)
    ts = sorted(float(t) for t in ts)
    if not ts or ts[0] < 0:
        raise ValueError("survival times must be non-negative and non-empty")
    net = build_lattice(N)
    init = configuration(net, [0])
    rows, checks = [], []
    for gamma in gammas:
        _require_gamma(gamma, 1.0, " (the branching bound is vacuous otherwise)")
        b = replica_batch(net, ModelParams(gamma), init, replicas,
                          derive_seed(seed, N, _gamma_key(gamma)), horizon=ts[-1], workers=workers)
        for t in ts:
            alive = (b.time > t) | b.censored
            p = float(alive.mean())
            se = math.sqrt(p * (1 - p) / replicas)
            bound = oracle.branching_bound(gamma, t)
            ok = p <= bound + 3 * se
            rows.append((gamma, t, p, se, bound, ok))
            checks.append(Check(f"gamma={gamma:g} t={t:g}", p, bound + 3 * se, ok))
    return ExperimentResult("survival-bound", ["gamma", "t", "empirical", "se", "bound", "pass"],
                            rows, checks)


# ------------------------------------------------------------------- E_k

def exp_ek(N: int = 10, gamma: float = 1.0, ks=(1, 2, 5), replicas: int = 100000,
           seed: int = DEFAULT_SEED, workers: int = 1) -> ExperimentResult:
    """Fraction of runs from ``{1..k}`` on ``K_N`` that die out without a single spike.

    Such a run is exactly one whose first ``k`` events are all leaks, so each
    replica is simulated for at most ``k`` events.
    """
    _require_gamma(gamma)
    _require_replicas(replicas)
    net = build_complete(N)
    rows, checks, notes = [], [], []
    for k in ks:
        k = int(k)
        target = oracle.ek_probability(N, gamma, k)
        b = replica_batch(net, ModelParams(gamma), configuration(net, range(1, k + 1)), replicas,
                          derive_seed(seed, N, _gamma_key(gamma), k), max_events=k, workers=workers)
        hit = (~b.censored) & (b.spikes == 0)
        p = float(hit.mean())
        se = math.sqrt(target * (1 - target) / replicas)
        ok = abs(p - target) <= 3 * se
        rows.append((k, p, target, se, ok))
        checks.append(Check(f"k={k}", abs(p - target), 3 * se, ok))
        if target * replicas < 10:
            notes.append(f"k={k}: fewer than 10 expected occurrences; the normal interval is unreliable")
    return ExperimentResult("ek", ["k", "empirical", "target", "se", "pass"], rows, checks, notes)


# ------------------------------------------------------------- gamma scan

def exp_gamma_scan(N: int = 50, gammas=(0.1, 0.25, 0.5, 1.0, 1.5, 2.0), replicas: int = 200,
                   horizon: float = 1000.0, seed: int = DEFAULT_SEED,
                   workers: int = 1) -> ExperimentResult:
    """Mean extinction time of the full lattice over a leak-rate grid (descriptive).

    Means are over uncensored runs; the censored fraction is reported next
    to them. Monotonicity in gamma is noted, not checked.
    """
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValueError("gamma scan needs a finite positive horizon")
    _require_replicas(replicas)
    net = build_lattice(N)
    rows = []
    gammas = sorted(float(g) for g in gammas)
    for gamma in gammas:
        _require_gamma(gamma)
        b = replica_batch(net, ModelParams(gamma), full_configuration(net), replicas,
                          derive_seed(seed, N, _gamma_key(gamma)), horizon=horizon, workers=workers)
        cens = float(b.censored.mean())
        if cens < 1.0:
            s = summarize(b)
            rows.append((gamma, s.mean, s.se, cens, replicas))
        else:
            rows.append((gamma, math.nan, math.nan, cens, replicas))
    ups = [(a[0], b[0]) for a, b in zip(rows, rows[1:])
           if b[1] - a[1] > 2 * math.hypot(a[2], b[2])]
    notes = ["mean extinction time non-increasing in gamma within 2 SE" if not ups else
             "increases beyond 2 SE between gammas " + ", ".join(f"{a:g}->{b:g}" for a, b in ups)]
    if any(r[3] > 0 for r in rows):
        notes.append("means exclude censored runs and are biased low where censoring occurs")
    return ExperimentResult("gamma-scan", ["gamma", "mean", "se", "censored_fraction", "replicas"],
                            rows, [], notes)


# ---------------------------------------------------------- exact identities

def _subset_states(tl, net, times):
    """``states[mask]`` = configurations at ``times`` started from subset ``mask``."""
    n = net.size
    states = np.zeros((1 << n, len(times)), dtype=np.int64)
    for mask in range(1, 1 << n):
        cfg = Configuration(n, mask)
        states[mask] = [c.bits for c in states_on_timeline(tl, net, cfg, times)]
    return states


def _coupling_violations(net: Network, gamma: float, timelines: int, horizon: float, seed: int):
    add = mono = 0
    n = net.size
    params = ModelParams(gamma)
    for r in range(timelines):
        tl = build_timeline(net, params, horizon, replica_stream(seed, r))
        # states only change at marks, so marks plus the end points are exhaustive
        times = np.concatenate(([0.0], tl.times, [horizon])).tolist()
        S = _subset_states(tl, net, times)
        for mask in range(1, 1 << n):
            union = np.zeros(len(times), dtype=np.int64)
            for i in range(n):
                if mask >> i & 1:
                    union |= S[1 << i]
            add += int(np.count_nonzero(S[mask] != union))
            sub = (mask - 1) & mask
            while sub:
                mono += int(np.count_nonzero(S[sub] & ~S[mask]))
                sub = (sub - 1) & mask
    return add, mono


def exp_coupling(lattice_n: int = 3, complete_n: int = 5, gamma: float = 1.0,
                 timelines: int = 100, horizon: float = 20.0,
                 seed: int = DEFAULT_SEED) -> ExperimentResult:
    """Additivity and monotonicity on shared graphical timelines.

    For every non-empty initial set ``B`` and every mark time, the
    configuration from ``B`` must equal the union of the configurations from
    its singletons, and every subset ``A`` of ``B`` must stay contained.
    """
    _require_gamma(gamma)
    rows, checks = [], []
    for graph, net in (("lattice", build_lattice(lattice_n)), ("complete", build_complete(complete_n))):
        if net.size > 12:
            raise ValueError("coupling check enumerates all subsets; use at most 12 neurons")
        key = 0 if graph == "lattice" else 1
        add, mono = _coupling_violations(net, gamma, timelines, horizon,
                                         derive_seed(seed, key, net.size))
        rows.append((graph, net.size, timelines, add, mono, add == 0 and mono == 0))
        checks.append(Check(f"{graph} additivity violations", add, 0, add == 0))
        checks.append(Check(f"{graph} monotonicity violations", mono, 0, mono == 0))
    return ExperimentResult("coupling", ["graph", "neurons", "timelines", "additivity_violations",
                                         "monotonicity_violations", "pass"], rows, checks)


def exp_lumping(Ns=(2, 3, 4), gammas=(0.5, 1.0, 2.0), tolerance: float = 1e-10,
                mean_rtol: float = 1e-10, curve_atol: float = 1e-8,
                points: int = 201) -> ExperimentResult:
    """Full-state generator against the count chain on small complete graphs.

    Compares exact means (relative error) and survival curves (sup-norm on
    ``[0, 5 mean]``).
    """
    rows, checks = [], []
    for N in Ns:
        for gamma in gammas:
            _require_gamma(gamma)
            net = build_complete(N)
            full = oracle.full_state_generator(net, ModelParams(gamma))
            finit = oracle.full_state_init(net)
            chain = oracle.count_chain_generator(N, gamma)
            m_full = oracle.expected_absorption(full, finit)
            m_count = oracle.expected_absorption(chain.generator, chain.init())
            rel = abs(m_full - m_count) / m_count
            grid = np.linspace(0.0, 5.0 * m_count, points)
            s1 = oracle.survival_function(full, finit, grid, tolerance).probs
            s2 = oracle.survival_function(chain.generator, chain.init(), grid, tolerance).probs
            sup = float(np.abs(s1 - s2).max())
            ok = rel <= mean_rtol and sup <= curve_atol
            rows.append((N, gamma, m_full, m_count, rel, sup, ok))
            checks.append(Check(f"N={N} gamma={gamma:g} mean rel. diff", rel, mean_rtol, rel <= mean_rtol))
            checks.append(Check(f"N={N} gamma={gamma:g} survival sup diff", sup, curve_atol,
                                sup <= curve_atol))
    return ExperimentResult("lumping", ["N", "gamma", "mean_full", "mean_count", "rel_diff",
                                        "survival_sup_diff", "pass"], rows, checks)


def exp_invariant_measure(Ns=(3, 10, 100, 1000), gammas=(0.5, 1.0, 2.0),
                          residual_tol: float = 1e-10, sum_tol: float = 1e-12) -> ExperimentResult:
    """Closed-form invariant measure of the modified chain against its generator.

    Also checks ``mu_N = 0`` and the lower bound ``mu_{N-1} >= 1/(2 gamma (N-1))``
    where ``gamma (N-1) > 1``.
    """
    rows, checks = [], []
    for N in Ns:
        for gamma in gammas:
            _require_gamma(gamma)
            mu = oracle.invariant_measure(N, gamma).mu
            Q = oracle.modified_chain(N, gamma).Q
            res = float(np.abs(mu @ Q).max())
            serr = abs(float(mu.sum()) - 1.0)
            bound = 1.0 / (2 * gamma * (N - 1)) if gamma * (N - 1) > 1 else math.nan
            bound_ok = math.isnan(bound) or mu[N - 2] >= bound
            ok = res <= residual_tol and serr <= sum_tol and mu[N - 1] == 0.0 and bound_ok
            rows.append((N, gamma, res, serr, float(mu[N - 2]), bound, float(mu[N - 1]), ok))
            checks.append(Check(f"N={N} gamma={gamma:g} |mu Q|_inf", res, residual_tol,
                                res <= residual_tol))
            checks.append(Check(f"N={N} gamma={gamma:g} |sum mu - 1|", serr, sum_tol, serr <= sum_tol))
            checks.append(Check(f"N={N} gamma={gamma:g} mu_N", float(mu[N - 1]), 0.0, mu[N - 1] == 0.0))
            if not math.isnan(bound):
                checks.append(Check(f"N={N} gamma={gamma:g} mu_(N-1) lower bound", float(mu[N - 2]),
                                    bound, bool(bound_ok)))
    return ExperimentResult("invariant-measure", ["N", "gamma", "residual", "sum_error",
                                                  "mu_penultimate", "lower_bound", "mu_last", "pass"],
                            rows, checks)


# ---------------------------------------------------------------- dispatch

@dataclass(frozen=True)
class ExperimentSpec:
    """What to run. ``None``/empty fields take the experiment's defaults.

    ``replicas`` doubles as the number of timelines for ``coupling``; for
    ``coupling``, ``Ns = (lattice_n, complete_n)``.
    """

    name: str
    topology: str | None = None
    Ns: tuple = ()
    gamma: float | None = None
    gammas: tuple = ()
    replicas: int | None = None
    seed: int = DEFAULT_SEED
    horizon: float | None = None
    ts: tuple = ()
    ks: tuple = ()
    cv_threshold: float | None = None
    tolerance: float | None = None
    event_budget: float | None = None
    out: str | None = None
    workers: int = 1


# name -> (topology, defaults)
EXPERIMENTS = {
    "concentration": ("lattice", dict(Ns=(50, 100, 200, 400), gamma=2.0, replicas=2000,
                                      cv_threshold=0.15)),
    "exponentiality": ("complete", dict(Ns=(10, 50, 200), gamma=1.0, replicas=20000,
                                        tolerance=1e-10, event_budget=DEFAULT_EVENT_BUDGET)),
    "mc-oracle": ("complete", dict(Ns=(2, 10, 50), gammas=(0.5, 1.0, 2.0), replicas=10000,
                                   tolerance=1e-10, event_budget=DEFAULT_EVENT_BUDGET)),
    "survival-bound": ("lattice", dict(Ns=(50,), gammas=(1.2, 2.0), ts=(0.5, 1.0, 2.0, 3.0),
                                       replicas=100000)),
    "ek": ("complete", dict(Ns=(10,), gamma=1.0, ks=(1, 2, 5), replicas=100000)),
    "gamma-scan": ("lattice", dict(Ns=(50,), gammas=(0.1, 0.25, 0.5, 1.0, 1.5, 2.0),
                                   replicas=200, horizon=1000.0)),
    "coupling": ("lattice+complete", dict(Ns=(3, 5), gamma=1.0, replicas=100, horizon=20.0)),
    "lumping": ("complete", dict(Ns=(2, 3, 4), gammas=(0.5, 1.0, 2.0), tolerance=1e-10)),
    "invariant-measure": ("complete", dict(Ns=(3, 10, 100, 1000), gammas=(0.5, 1.0, 2.0))),
}

def resolve_spec(spec: ExperimentSpec) -> ExperimentSpec:
    """Fill defaults and validate ranges before anything runs."""
    if spec.name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {spec.name!r}; choose from {', '.join(EXPERIMENTS)}")
    topo, defaults = EXPERIMENTS[spec.name]
    if spec.topology not in (None, topo):
        raise ValueError(f"experiment {spec.name!r} runs on topology {topo!r}, not {spec.topology!r}")
    upd = {"topology": topo}
    for key, val in defaults.items():
        cur = getattr(spec, key)
        if cur is None or (isinstance(cur, tuple) and not cur):
            upd[key] = val
    # a single gamma given for a grid experiment replaces the grid
    if "gammas" in defaults and spec.gamma is not None and not spec.gammas:
        upd["gammas"] = (spec.gamma,)
    s = replace(spec, **upd)
    for g in ((s.gamma,) if s.gamma is not None else ()) + tuple(s.gammas):
        if not (math.isfinite(g) and g > 0):
            raise ValueError(f"experiments require gamma > 0, got {g}")
    if s.replicas is not None and s.replicas < 0:
        raise ValueError("replicas must be >= 0")
    if s.workers < 1:
        raise ValueError("workers must be >= 1")
    if any(int(n) < 1 for n in s.Ns):
        raise ValueError("network sizes must be >= 1")
    return s


def _params(spec: ExperimentSpec) -> dict:
    _, defaults = EXPERIMENTS[spec.name]
    out = {"name": spec.name, "topology": spec.topology, "seed": spec.seed}
    for key in ("Ns", "gamma", "gammas", "replicas", "horizon", "ts", "ks", "cv_threshold",
                "tolerance", "event_budget"):
        if key in defaults or (key == "gamma" and "gammas" not in defaults and spec.gamma is not None):
            out[key] = _jsonable(getattr(spec, key))
    return out


def _dispatch(s: ExperimentSpec) -> ExperimentResult:
    w = s.workers
    if s.name == "concentration":
        return exp_lattice_concentration(s.Ns, s.gamma, s.replicas, s.seed, s.cv_threshold, workers=w)
    if s.name == "exponentiality":
        return exp_complete_exponentiality(s.Ns, s.gamma, s.replicas, s.seed, s.tolerance,
                                           event_budget=s.event_budget, workers=w)
    if s.name == "mc-oracle":
        return exp_mc_oracle(s.Ns, s.gammas, s.replicas, s.seed, s.tolerance,
                             event_budget=s.event_budget, workers=w)
    if s.name == "survival-bound":
        return exp_survival_bound(s.Ns[0], s.gammas, s.ts, s.replicas, s.seed, workers=w)
    if s.name == "ek":
        return exp_ek(s.Ns[0], s.gamma, s.ks, s.replicas, s.seed, workers=w)
    if s.name == "gamma-scan":
        return exp_gamma_scan(s.Ns[0], s.gammas, s.replicas, s.horizon, s.seed, workers=w)
    if s.name == "coupling":
        return exp_coupling(s.Ns[0], s.Ns[1], s.gamma, s.replicas, s.horizon, s.seed)
    if s.name == "lumping":
        return exp_lumping(s.Ns, s.gammas, s.tolerance)
    return exp_invariant_measure(s.Ns, s.gammas)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Resolve, run and (if ``spec.out`` is set) write ``<out>/<name>.csv`` and ``.json``.

    The CSV embeds the resolved parameters as ``#`` comment lines. The worker
    count is left out so that outputs do not depend on it.
    """
    s = resolve_spec(spec)
    t0 = time.perf_counter()
    res = _dispatch(s)
    res.runtime_s = time.perf_counter() - t0
    res.params = _params(s)
    res.seed = s.seed
    if s.out is not None:
        write_result(res, s.out)
    return res


def _comment_lines(res: ExperimentResult) -> list[str]:
    lines = [f"{k}={_fmt_param(v)}" for k, v in res.params.items()]
    lines.append("pass=" + ("n/a" if res.passed is None else fmt(res.passed)))
    return lines


def _fmt_param(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(fmt(x) for x in v)
    return fmt(v)


def write_result(res: ExperimentResult, out_dir: str | os.PathLike) -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{res.name}.csv")
    json_path = os.path.join(out_dir, f"{res.name}.json")
    text = res.csv(_comment_lines(res))
    with open(csv_path, "w", newline="") as fh:
        fh.write(text)
    with open(json_path, "w") as fh:
        json.dump(res.summary(), fh, indent=2, allow_nan=False)
        fh.write("\n")
    return csv_path, json_path

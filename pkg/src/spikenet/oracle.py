"""Exact computations on the finite chains behind the simulator.

Extinction times are absorption times of finite continuous-time Markov
chains. A :class:`SubGenerator` stores the chain restricted to its transient
states as *off-diagonal rates plus exit rates*; the diagonal is never stored
but implied as minus the total outflow. Keeping that representation all the
way through the elimination (a GTH-style scheme) means no subtraction ever
happens, so mean absorption times stay accurate to machine precision even
for strongly metastable chains whose means reach 1e50 and beyond.

Survival curves are computed by uniformization. For times far beyond the
relaxation scale the propagated vector has aligned with the slowest
eigenvector, at which point the curve continues as an exact exponential;
the switch is only taken once the alignment error is within tolerance.
"""
from __future__ import annotations

import math
import os
import warnings
from bisect import bisect_right, insort
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.stats import poisson

from ._io import write_csv
from .engine import Configuration, ModelParams
from .network import Network

__all__ = [
    "OracleError",
    "SingularSystemError",
    "ConvergenceError",
    "VacuousBoundWarning",
    "SubGenerator",
    "CountChain",
    "ModifiedChain",
    "InvariantMeasure",
    "SurvivalCurve",
    "full_state_generator",
    "full_state_init",
    "count_chain_generator",
    "expected_absorption",
    "survival_function",
    "SurvivalEvaluator",
    "beta_quantile",
    "modified_chain",
    "invariant_measure",
    "branching_bound",
    "ek_probability",
    "expected_event_count",
    "ExponentialityDistance",
    "exponential_sup_distance",
    "write_survival_csv",
    "write_measure_csv",
]

FULL_STATE_MAX_NEURONS = 20
DENSE_MAX = 2048
SPARSE_DIRECT_MAX = 100_000
RESIDUAL_TOL = 1e-12
CHUNK = 512.0  # Poisson mean per uniformization chunk
MIN_TOL = 1e-15  # absolute survival accuracy certifiable in double precision


class OracleError(ArithmeticError):
    """Numerical failure in an exact computation."""


class SingularSystemError(OracleError):
    pass


class ConvergenceError(OracleError):
    pass


class VacuousBoundWarning(UserWarning):
    pass


@dataclass(eq=False)
class SubGenerator:
    """Transient part of a CTMC with a single absorbing state.

    Attributes
    ----------
    states : sequence
        State identifiers, one per row.
    rates : scipy.sparse.csr_matrix
        Off-diagonal transition rates among transient states (zero diagonal).
    exit_rate : ndarray
        Rate from each state into the absorbing state.
    """

    states: Sequence
    rates: sp.csr_matrix
    exit_rate: np.ndarray
    _index: dict | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.rates = sp.csr_matrix(self.rates, dtype=np.float64)
        self.rates.sum_duplicates()
        self.rates.eliminate_zeros()
        self.exit_rate = np.asarray(self.exit_rate, dtype=np.float64)
        n = len(self.states)
        if self.rates.shape != (n, n) or self.exit_rate.shape != (n,):
            raise ValueError("rates / exit_rate shapes do not match the state list")
        if n == 0:
            raise ValueError("a sub-generator needs at least one transient state")
        if (self.rates.data < 0).any() or (self.exit_rate < 0).any():
            raise ValueError("transition and exit rates must be non-negative")
        if self.rates.diagonal().any():
            raise ValueError("self-loop rates must be dropped before building a sub-generator")
        if not (self.outflow > 0).all():
            bad = int(np.flatnonzero(self.outflow <= 0)[0])
            raise ValueError(f"state {self.states[bad]!r} has no outflow (trapping state)")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def outflow(self) -> np.ndarray:
        return np.asarray(self.rates.sum(axis=1)).ravel() + self.exit_rate

    def generator(self) -> sp.csr_matrix:
        """Sparse ``Q`` (transient block) with the implied diagonal filled in."""
        return (self.rates - sp.diags(self.outflow)).tocsr()

    def index_of(self, state) -> int:
        if self._index is None:
            self._index = {(s.item() if hasattr(s, "item") else s): k
                           for k, s in enumerate(self.states)}
        try:
            return self._index[state]
        except KeyError:
            raise KeyError(f"{state!r} is not a transient state") from None

    def point_mass(self, state) -> np.ndarray:
        p = np.zeros(self.n)
        p[self.index_of(state)] = 1.0
        return p


@dataclass(eq=False)
class CountChain:
    """Active-count process on the complete graph (states ``1..N``)."""

    N: int
    gamma: float
    generator: SubGenerator

    def init(self, k: int | None = None) -> np.ndarray:
        return self.generator.point_mass(self.N if k is None else k)


@dataclass(eq=False)
class ModifiedChain:
    """Count chain in which the last active neuron spikes at rate 1 + gamma and never leaks."""

    N: int
    gamma: float
    Q: np.ndarray


@dataclass
class InvariantMeasure:
    N: int
    gamma: float
    mu: np.ndarray  # mu[k - 1] for k = 1..N


@dataclass
class SurvivalCurve:
    times: np.ndarray
    probs: np.ndarray
    tolerance: float
    error_bound: float = 0.0


# ---------------------------------------------------------------- generators

def full_state_generator(net: Network, params: ModelParams) -> SubGenerator:
    """Generator on all non-empty configurations (states are bit masks).

    From configuration ``eta`` each active neuron ``i`` leaks at rate gamma
    (``eta`` minus ``i``) and spikes at rate 1 (``eta`` minus ``i`` plus the
    postsynaptic set of ``i``). Moves to the empty set become exit rate.
    """
    n = net.size
    if n > FULL_STATE_MAX_NEURONS:
        raise ValueError(
            f"full-state generator limited to {FULL_STATE_MAX_NEURONS} neurons "
            f"(got {n}); use count_chain_generator for complete graphs")
    gamma = params.gamma
    masks = np.arange(1, 1 << n, dtype=np.int64)
    exit_rate = np.zeros(len(masks))
    rows, cols, vals = [], [], []
    for i, post in enumerate(net.post_masks):
        src = masks[(masks >> i) & 1 == 1]
        cleared = src & ~np.int64(1 << i)
        targets = [(cleared | np.int64(post), 1.0)]
        if gamma > 0:
            targets.append((cleared, gamma))
        for tgt, rate in targets:
            if (tgt == src).any():
                raise AssertionError("self-transition in the full-state generator")
            dead = tgt == 0
            np.add.at(exit_rate, src[dead] - 1, rate)
            rows.append(src[~dead] - 1)
            cols.append(tgt[~dead] - 1)
            vals.append(np.full(int((~dead).sum()), rate))
    rows = np.concatenate(rows)
    R = sp.coo_matrix((np.concatenate(vals), (rows, np.concatenate(cols))),
                      shape=(len(masks), len(masks))).tocsr()
    gen = SubGenerator(masks, R, exit_rate)
    gen._index = None
    return gen


def full_state_init(net: Network, cfg: Configuration | None = None) -> np.ndarray:
    """Point mass on ``cfg`` (default: all neurons active) for a full-state generator."""
    bits = (1 << net.size) - 1 if cfg is None else cfg.bits
    if bits == 0:
        raise ValueError("the empty configuration is absorbing, not transient")
    p = np.zeros((1 << net.size) - 1)
    p[bits - 1] = 1.0
    return p


def count_chain_generator(N: int, gamma: float) -> CountChain:
    """Active-count chain of the complete graph ``K_N``.

    From ``k`` active: a leak (total rate ``k*gamma``) leads to ``k - 1``,
    with ``k = 1`` leaking into extinction; a spike (total rate ``k``) leads
    to ``N - 1``. Spikes from ``N - 1`` are self-loops and are dropped. For
    ``N = 1`` the lone neuron's spike also empties the network.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    gamma = ModelParams(gamma).gamma
    states = list(range(1, N + 1))
    exit_rate = np.zeros(N)
    if N == 1:
        exit_rate[0] = 1.0 + gamma
        return CountChain(N, gamma, SubGenerator(states, sp.csr_matrix((1, 1)), exit_rate))
    rows, cols, vals = [], [], []

    def add(src, dst, rate):
        if rate > 0 and src != dst:
            rows.append(src - 1)
            cols.append(dst - 1)
            vals.append(rate)

    for k in range(1, N + 1):
        if k == 1:
            exit_rate[0] = gamma
        else:
            add(k, k - 1, k * gamma)
        add(k, N - 1, float(k))
    R = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    return CountChain(N, gamma, SubGenerator(states, R, exit_rate))


# ------------------------------------------------------------- linear algebra

class _GTHFactor:
    """Subtraction-free LU of ``-Q`` from (off-diagonal rates, exit rates).

    Eliminating pivot ``k`` adds ``R[i,k] R[k,j] / d_k`` to the remaining
    off-diagonal rates and ``R[i,k] s_k / d_k`` to the exit rates; pivots are
    recomputed as (remaining outflow + exit). For non-negative right-hand
    sides the triangular solves only add non-negative terms.
    """

    def __init__(self, gen: SubGenerator):
        R = gen.rates.toarray()
        s = gen.exit_rate.copy()
        n = gen.n
        d = np.empty(n)
        for k in range(n):
            dk = R[k, k + 1:].sum() + s[k]
            if not dk > 0:
                raise SingularSystemError(
                    f"absorption unreachable from state {gen.states[k]!r}")
            d[k] = dk
            col = R[k + 1:, k]
            nz = np.flatnonzero(col)
            if nz.size:
                rows = nz + k + 1
                row = R[k, k + 1:]
                R[np.ix_(rows, np.arange(k + 1, n))] += np.outer(col[nz] / dk, row)
                R[rows, rows] = 0.0
                s[rows] += col[nz] * (s[k] / dk)
        self.R = R
        self.d = d
        self.n = n

    def solve(self, b: np.ndarray) -> np.ndarray:
        R, d, n = self.R, self.d, self.n
        y = np.array(b, dtype=np.float64)
        for k in range(n - 1):
            if y[k]:
                y[k + 1:] += R[k + 1:, k] * (y[k] / d[k])
        x = np.empty(n)
        for k in range(n - 1, -1, -1):
            x[k] = (y[k] + R[k, k + 1:] @ x[k + 1:]) / d[k]
        return x


class _SparseFactor:
    def __init__(self, gen: SubGenerator):
        self.A = (-gen.generator()).tocsc()
        self.n = gen.n
        self._lu = None
        if self.n <= SPARSE_DIRECT_MAX:
            try:
                self._lu = spla.splu(self.A)
            except RuntimeError as exc:
                raise SingularSystemError(str(exc)) from None

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if self._lu is not None:
            x = self._lu.solve(b)
        else:
            ilu = spla.spilu(self.A, drop_tol=1e-6, fill_factor=20)
            M = spla.LinearOperator(self.A.shape, ilu.solve)
            x, info = spla.gmres(self.A, b, M=M, rtol=1e-14, atol=0.0, restart=100, maxiter=2000)
            if info != 0:
                raise ConvergenceError(f"iterative solve did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("absorption unreachable (singular system)")
        return x


def _factor(gen: SubGenerator):
    cached = getattr(gen, "_factor_cache", None)
    if cached is None:
        cached = _GTHFactor(gen) if gen.n <= DENSE_MAX else _SparseFactor(gen)
        gen._factor_cache = cached
    return cached


def _backward_error(gen: SubGenerator, x: np.ndarray, b: np.ndarray) -> float:
    A = -gen.generator()
    r = b - A @ x
    normA = float(abs(A).sum(axis=1).max())
    denom = normA * float(np.abs(x).max()) + float(np.abs(b).max())
    return float(np.abs(r).max()) / denom if denom > 0 else 0.0


def _as_init(gen: SubGenerator, init) -> np.ndarray:
    p = np.asarray(init, dtype=np.float64)
    if p.shape != (gen.n,):
        raise ValueError(f"initial distribution must have length {gen.n}")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must be non-negative and sum to 1")
    return p


def absorption_moments(gen: SubGenerator, reward=None) -> np.ndarray:
    """Per-state expected accumulated ``reward`` rate until absorption (default: time)."""
    b = np.ones(gen.n) if reward is None else np.asarray(reward, dtype=np.float64)
    if (b < 0).any():
        raise ValueError("rewards must be non-negative")
    x = _factor(gen).solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("absorption unreachable (non-finite solution)")
    err = _backward_error(gen, x, b)
    if err > RESIDUAL_TOL:
        raise ConvergenceError(f"relative residual {err:.3g} above {RESIDUAL_TOL}")
    return x


def expected_absorption(gen: SubGenerator, init, reward=None) -> float:
    """Mean absorption time from the initial distribution ``init``.

    ``reward`` optionally replaces the unit time rate by a per-state rate,
    e.g. the total event rate to get the expected number of events.
    """
    p = _as_init(gen, init)
    return float(p @ absorption_moments(gen, reward))


def expected_event_count(N: int, gamma: float, k: int | None = None) -> float:
    """Expected number of simulated events before extinction on ``K_N`` from ``k`` active.

    Counts every spike and leak, including spikes that leave the active count
    unchanged.
    """
    chain = count_chain_generator(N, gamma)
    rate = np.arange(1, N + 1) * (1.0 + chain.gamma)
    return expected_absorption(chain.generator, chain.init(k), reward=rate)


# ------------------------------------------------------------------ survival

class SurvivalEvaluator:
    """Evaluates ``P(absorption > t)`` for arbitrary ``t`` with caching.

    Uniformization runs in chunks of Poisson mean :data:`CHUNK`; checkpoints
    are kept so later queries restart from the closest earlier time. Once
    the propagated vector is aligned with the slowest eigenvector (checked
    against an absolute error budget of ``tol / 2``), larger times use the
    closed-form exponential continuation.
    """

    def __init__(self, gen: SubGenerator, init, tol: float = 1e-10, max_matvecs: int = 10**7):
        if not tol > 0:
            raise ValueError("tolerance must be positive")
        if tol < MIN_TOL:
            raise ConvergenceError(f"tolerance {tol:.3g} is below what double precision can "
                                   f"certify (minimum {MIN_TOL:g})")
        self.gen = gen
        self.alpha = _as_init(gen, init)
        self.tol = float(tol)
        self.max_matvecs = int(max_matvecs)
        out = gen.outflow
        self.rate = float(out.max())
        self.P = (sp.identity(gen.n, format="csr")
                  + gen.generator() / self.rate).tocsr()
        self.P.data = np.maximum(self.P.data, 0.0)
        self.tol_step = self.tol * 1e-5
        self.err = 0.0
        self.matvecs = 0
        self.cp_t = [0.0]
        self.cp_v = [np.ones(gen.n)]
        self.slow = None  # (t_switch, alpha . v(t_switch))
        self.decay = None
        self.slow_vec = None
        self._slow_failed = False

    @property
    def error_bound(self) -> float:
        return self.err + (self._slow_dev if self.slow is not None else 0.0)

    def _advance(self, v, dt):
        m = dt * self.rate
        if m <= 0:
            return v
        q = poisson.isf(self.tol_step, m)
        if not np.isfinite(q):
            raise ConvergenceError("Poisson truncation point not computable at this tolerance")
        R = int(q) + 1
        w = poisson.pmf(np.arange(R + 1), m)
        acc = w[0] * v
        term = v
        for j in range(1, R + 1):
            term = self.P @ term
            acc += w[j] * term
        self.matvecs += R
        self.err += float(poisson.sf(R, m)) * float(v.max())
        if self.matvecs > self.max_matvecs:
            raise ConvergenceError(
                f"uniformization exceeded {self.max_matvecs} matrix-vector products")
        return acc

    def _slow_mode(self):
        if self.slow_vec is not None or self._slow_failed:
            return self.slow_vec is not None
        fac = _factor(self.gen)
        u = np.ones(self.gen.n)
        for _ in range(2000):
            x = fac.solve(u)
            unew = x / x.max()
            if np.abs(unew - u).max() <= 1e-15:
                u = unew
                break
            u = unew
        else:
            self._slow_failed = True
            return False
        x = fac.solve(u)
        self.decay = float(u.sum() / x.sum())
        self.slow_vec = u
        return True

    def _try_switch(self, tau, v):
        if not self._slow_mode():
            return False
        r = self.slow_vec
        c = float(r @ v) / float(r @ r)
        dev = 2.0 * float(np.abs(v - c * r).max())
        if self.err + dev <= self.tol / 2:
            self._slow_dev = dev
            self.slow = (tau, float(self.alpha @ v))
            return True
        return False

    def __call__(self, t: float) -> float:
        t = float(t)
        if t < 0 or math.isnan(t):
            raise ValueError("times must be >= 0")
        if self.slow is not None and t >= self.slow[0]:
            return self.slow[1] * math.exp(-self.decay * (t - self.slow[0]))
        idx = bisect_right(self.cp_t, t) - 1
        tau, v = self.cp_t[idx], self.cp_v[idx]
        h_max = CHUNK / self.rate
        while tau < t:
            if (self.slow is None and not self._slow_failed
                    and (t - tau) > 4 * h_max and tau > 0 and self._try_switch(tau, v)):
                self._store(tau, v)
                return self(t)
            if t - tau <= h_max:
                v = self._advance(v, t - tau)
                tau = t
            else:
                v = self._advance(v, h_max)
                tau = tau + h_max
                self._store(tau, v)
        self._store(tau, v)
        return float(self.alpha @ v)

    def _store(self, tau, v):
        k = bisect_right(self.cp_t, tau)
        if k and self.cp_t[k - 1] == tau:
            return
        self.cp_t.insert(k, tau)
        self.cp_v.insert(k, v)
        if len(self.cp_t) > 4096:  # keep memory bounded on long scans
            del self.cp_t[1:len(self.cp_t) // 2]
            del self.cp_v[1:len(self.cp_v) // 2]


def survival_function(gen: SubGenerator, init, times, tol: float = 1e-10) -> SurvivalCurve:
    """``P(absorption > t)`` on an increasing grid, accurate to ``tol`` absolute."""
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or (times < 0).any() or (np.diff(times) < 0).any():
        raise ValueError("times must be a non-decreasing grid of non-negative values")
    ev = SurvivalEvaluator(gen, init, tol)
    probs = np.array([ev(t) for t in times])
    # round-off guard; changes values by far less than tol
    probs = np.clip(np.minimum.accumulate(probs), 0.0, 1.0)
    if ev.error_bound > tol:
        raise ConvergenceError(f"survival error bound {ev.error_bound:.3g} exceeds {tol:.3g}")
    return SurvivalCurve(times, probs, tol, ev.error_bound)


def beta_quantile(gen: SubGenerator, init, tol: float = 1e-9) -> float:
    """The time ``beta`` with ``P(absorption > beta) = exp(-1)``, by bisection.

    ``tol`` bounds the absolute error of the survival evaluations; the
    bracket itself is narrowed to a few ulps.
    """
    target = math.exp(-1.0)
    ev = SurvivalEvaluator(gen, init, min(1e-10, tol / 10))
    hi = expected_absorption(gen, init)
    lo = 0.0
    for _ in range(2000):
        if ev(hi) < target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError("could not bracket the exp(-1) quantile")
    if ev.slow is not None and lo >= ev.slow[0]:
        t0, a0 = ev.slow
        return t0 + math.log(a0 / target) / ev.decay
    # bisect down to a few ulps; evaluations restart from cached checkpoints
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 4 * np.spacing(hi):
            return mid
        s = ev(mid)
        if s == target:
            return mid
        if ev.slow is not None and mid >= ev.slow[0]:
            t0, a0 = ev.slow
            return t0 + math.log(a0 / target) / ev.decay
        if s > target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("bisection for the exp(-1) quantile did not converge")


# ------------------------------------------- distance to the exponential law

class _MPFactor:
    """Sparse subtraction-free LU of ``-Q`` in multiprecision (mpmath).

    Same elimination as :class:`_GTHFactor` but on dict-of-dict rows, so the
    cost follows the fill-in; for count chains it stays linear in ``N``.
    """

    def __init__(self, gen: SubGenerator):
        import mpmath

        mpf = mpmath.mpf
        n = gen.n
        R = gen.rates.tocsr()
        rows = [dict() for _ in range(n)]
        cols = [set() for _ in range(n)]
        for i in range(n):
            for j, v in zip(R.indices[R.indptr[i]:R.indptr[i + 1]],
                            R.data[R.indptr[i]:R.indptr[i + 1]]):
                rows[i][int(j)] = mpf(float(v))
                cols[int(j)].add(i)
        s = [mpf(float(v)) for v in gen.exit_rate]
        d = [None] * n
        lower = [None] * n  # lower[k] = {i: R_ik} for i > k
        for k in range(n):
            upper = {j: v for j, v in rows[k].items() if j > k}
            dk = mpmath.fsum(upper.values()) + s[k]
            if not dk > 0:
                raise SingularSystemError(f"absorption unreachable from state {gen.states[k]!r}")
            d[k] = dk
            rows[k] = upper
            below = {i: rows[i][k] for i in cols[k] if i > k}
            lower[k] = below
            for i, rik in below.items():
                f = rik / dk
                ri = rows[i]
                del ri[k]
                for j, rkj in upper.items():
                    if j != i:
                        if j in ri:
                            ri[j] += f * rkj
                        else:
                            ri[j] = f * rkj
                            cols[j].add(i)
                s[i] += f * s[k]
        self.n, self.d, self.upper, self.lower = n, d, rows, lower

    def solve(self, b):
        n, d = self.n, self.d
        y = list(b)
        for k in range(n):
            if y[k]:
                f = y[k] / d[k]
                for i, rik in self.lower[k].items():
                    y[i] += rik * f
        x = [None] * n
        for k in range(n - 1, -1, -1):
            acc = y[k]
            for j, rkj in self.upper[k].items():
                acc += rkj * x[j]
            x[k] = acc / d[k]
        return x

    def solve_transposed(self, b):
        n, d = self.n, self.d
        z = list(b)
        for k in range(n):
            z[k] = z[k] / d[k]
            for j, rkj in self.upper[k].items():
                z[j] += rkj * z[k]
        y = z
        for k in range(n - 1, -1, -1):
            acc = y[k]
            for i, rik in self.lower[k].items():
                acc += rik / d[k] * y[i]
            y[k] = acc
        return y


def _dominant_pole(gen: SubGenerator, alpha: np.ndarray, dps: int):
    """``(c, lam, mean)`` with ``P(T > t) = c exp(-lam t) + fast terms``, at ``dps`` digits."""
    import mpmath

    with mpmath.workdps(dps):
        eps = mpmath.mpf(10) ** (-(dps - 8))
        fac = _MPFactor(gen)

        def power(step):
            u = [mpmath.mpf(1)] * gen.n
            for _ in range(200):
                x = step(u)
                m = max(x)
                unew = [xi / m for xi in x]
                delta = max(abs(a - b) for a, b in zip(unew, u))
                u = unew
                if delta <= eps:
                    return u
            raise ConvergenceError("inverse iteration for the slowest mode did not converge")

        r = power(fac.solve)
        left = power(fac.solve_transposed)
        x = fac.solve(r)
        lam = mpmath.fsum(r) / mpmath.fsum(x)
        a = [mpmath.mpf(float(v)) for v in alpha]
        c = (mpmath.fsum(ai * ri for ai, ri in zip(a, r)) * mpmath.fsum(left)
             / mpmath.fsum(li * ri for li, ri in zip(left, r)))
        mean = mpmath.fsum(ai * mi for ai, mi in zip(a, fac.solve([mpmath.mpf(1)] * gen.n)))
        return c, lam, mean


@dataclass
class ExponentialityDistance:
    """``max_t |P(T / E T > t) - exp(-t)|`` over a grid, with the method used."""

    value: float
    method: str  # "uniformization" or "pole-expansion"
    mean: float
    grid: np.ndarray


def exponential_sup_distance(gen: SubGenerator, init, grid=None, tol: float = 1e-10,
                             method: str = "auto") -> ExponentialityDistance:
    """Sup-distance between the mean-normalized survival curve and ``exp(-t)``.

    Uniformization in double precision is used while the distance is well
    above ``tol``. Below that, the survival curve is evaluated through its
    dominant pole computed in multiprecision; this is only done when the
    remaining (fast) modes are negligible at the smallest positive grid time,
    which is checked with the second-slowest decay rate. ``method`` may force
    ``"uniformization"`` or ``"pole-expansion"``.
    """
    if method not in ("auto", "uniformization", "pole-expansion"):
        raise ValueError(f"unknown method {method!r}")
    grid = np.linspace(0.0, 4.0, 401) if grid is None else np.asarray(grid, dtype=np.float64)
    alpha = _as_init(gen, init)
    mean = expected_absorption(gen, alpha)
    curve = survival_function(gen, alpha, grid * mean, tol)
    value = float(np.abs(curve.probs - np.exp(-grid)).max())
    if method == "uniformization" or (method == "auto" and value > 1e3 * tol):
        return ExponentialityDistance(value, "uniformization", mean, grid)

    positive = grid[grid > 0]
    if positive.size == 0 or gen.n > DENSE_MAX:
        if method == "pole-expansion":
            raise ValueError("pole expansion needs a positive grid point and a dense-size chain")
        return ExponentialityDistance(value, "uniformization", mean, grid)
    dps = int(math.log10(max(mean, 10.0))) + 60
    A = -gen.generator().toarray()
    re = np.sort(np.linalg.eigvals(A).real)
    gap = re[1] if re.size > 1 else math.inf
    t_min = float(positive.min()) * mean
    # fast terms scaled by a generous eigenvector-conditioning allowance
    if not gap * t_min >= (dps + 40) * math.log(10):
        if method == "pole-expansion":
            raise OracleError("fast modes are not negligible on this grid; "
                              "the dominant-pole expansion does not apply")
        return ExponentialityDistance(value, "uniformization", mean, grid)
    import mpmath

    c, lam, m = _dominant_pole(gen, alpha, dps)
    with mpmath.workdps(dps):
        best = mpmath.mpf(0)
        for t in grid.tolist():
            if t == 0:
                continue  # survival is exactly 1 at the origin
            dev = abs(c * mpmath.exp(-lam * m * t) - mpmath.exp(-mpmath.mpf(t)))
            best = max(best, dev)
    return ExponentialityDistance(float(best), "pole-expansion", mean, grid)


# ------------------------------------------------ modified chain and measure

def modified_chain(N: int, gamma: float) -> ModifiedChain:
    """Rate matrix of the non-absorbing count chain on ``1..N``.

    Row 1: ``1 -> N-1`` at rate ``1 + gamma``. Rows ``2..N-2``: leak ``k*gamma``
    to ``k-1`` and spike ``k`` to ``N-1``. Row ``N-1``: leak ``(N-1)*gamma``
    to ``N-2``. Row ``N``: ``N*(1+gamma)`` to ``N-1``.
    """
    if N < 3:
        raise ValueError("the modified chain needs N >= 3")
    gamma = ModelParams(gamma).gamma
    Q = np.zeros((N, N))

    def put(src, dst, rate):
        Q[src - 1, dst - 1] += rate
        Q[src - 1, src - 1] -= rate

    put(1, N - 1, 1.0 + gamma)
    for k in range(2, N - 1):
        put(k, k - 1, k * gamma)
        put(k, N - 1, float(k))
    put(N - 1, N - 2, (N - 1) * gamma)
    put(N, N - 1, N * (1.0 + gamma))
    if np.abs(Q.sum(axis=1)).max() > 1e-9 * max(1.0, np.abs(Q).max()):
        raise AssertionError("modified chain rows do not sum to zero")
    return ModifiedChain(N, gamma, Q)


def invariant_measure(N: int, gamma: float) -> InvariantMeasure:
    """Closed-form invariant law of :func:`modified_chain`.

    ``mu_n`` is proportional to ``(1+gamma)^(n-1) / (n gamma^(n-1))`` for
    ``n <= N-1`` and ``mu_N = 0``; terms are built in log space.
    """
    if N < 3:
        raise ValueError("the invariant measure is defined for N >= 3")
    gamma = ModelParams(gamma).gamma
    if gamma == 0:
        raise ValueError("gamma must be > 0 for the invariant measure")
    n = np.arange(1, N)
    logs = (n - 1) * (math.log1p(gamma) - math.log(gamma)) - np.log(n)
    w = np.exp(logs - logs.max())
    mu = np.zeros(N)
    mu[:N - 1] = w / w.sum()
    return InvariantMeasure(N, gamma, mu)


# ------------------------------------------------------------ closed forms

def branching_bound(gamma: float, t: float) -> float:
    """``exp(-(gamma - 1) t)``: survival bound from the dominating branching process.

    Informative only for ``gamma > 1``; otherwise a :class:`VacuousBoundWarning`
    is issued and the (>= 1) value is still returned.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if gamma <= 1:
        warnings.warn(f"bound is vacuous for gamma = {gamma} <= 1", VacuousBoundWarning,
                      stacklevel=2)
    return math.exp(-(gamma - 1.0) * t)


def ek_probability(N: int, gamma: float, k: int) -> float:
    """Probability that ``k`` active neurons on ``K_N`` all leak before any spike."""
    if not 1 <= k <= N:
        raise ValueError("need 1 <= k <= N")
    return (gamma / (1.0 + gamma)) ** k


# ---------------------------------------------------------------- export

def write_survival_csv(path: str | os.PathLike, curve: SurvivalCurve, comments=()) -> None:
    write_csv(path, ["t", "prob"], zip(curve.times.tolist(), curve.probs.tolist()), comments)


def write_measure_csv(path: str | os.PathLike, measure: InvariantMeasure, comments=()) -> None:
    rows = [(k + 1, float(m)) for k, m in enumerate(measure.mu)]
    write_csv(path, ["k", "mu"], rows, comments)

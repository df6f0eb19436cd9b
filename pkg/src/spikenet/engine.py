"""Continuous-time simulation of the active/quiescent neuron system.

Each active neuron carries two exponential clocks, a spike clock of rate 1
and a leak clock of rate ``gamma``. A leak silences the neuron. A spike
silences it and activates all of its postsynaptic neurons. Quiescent
neurons do nothing until a presynaptic neuron spikes.

The event loop itself lives in a compiled kernel with a pure-Python twin
(see :mod:`spikenet._backend`); this module wraps it with typed inputs and
outputs, replica management and trace recording.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _pykernels
from ._backend import BACKEND, CENSORED, EXTINCT, kernels
from .network import Network
from .rng import replica_bitgen

__all__ = [
    "Configuration",
    "ModelParams",
    "EventRecord",
    "ExtinctionOutcome",
    "ReplicaBatch",
    "Trajectory",
    "BACKEND",
    "configuration",
    "full_configuration",
    "step",
    "simulate_extinction",
    "simulate_trajectory",
    "survival_probe",
    "run_replicas",
    "replica_batch",
    "write_trace_csv",
]


@dataclass(frozen=True)
class Configuration:
    """Set of active neurons stored as a bit vector over internal indices."""

    width: int
    bits: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("configuration width must be positive")
        if self.bits < 0 or self.bits >> self.width:
            raise ValueError("configuration bits exceed the network width")

    @classmethod
    def from_indices(cls, width: int, indices: Iterable[int]) -> "Configuration":
        bits = 0
        for i in indices:
            if not 0 <= i < width:
                raise ValueError(f"neuron index {i} out of range for width {width}")
            bits |= 1 << i
        return cls(width, bits)

    @classmethod
    def full(cls, width: int) -> "Configuration":
        return cls(width, (1 << width) - 1)

    @classmethod
    def empty(cls, width: int) -> "Configuration":
        return cls(width, 0)

    @property
    def count(self) -> int:
        return bin(self.bits).count("1")

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    @property
    def active(self) -> tuple:
        """Sorted indices of active neurons."""
        b = self.bits
        out = []
        i = 0
        while b:
            if b & 1:
                out.append(i)
            b >>= 1
            i += 1
        return tuple(out)

    def __contains__(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def __or__(self, other: "Configuration") -> "Configuration":
        self._check(other)
        return Configuration(self.width, self.bits | other.bits)

    def __and__(self, other: "Configuration") -> "Configuration":
        self._check(other)
        return Configuration(self.width, self.bits & other.bits)

    def issubset(self, other: "Configuration") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    __le__ = issubset

    def to_array(self) -> np.ndarray:
        return np.array([(self.bits >> i) & 1 for i in range(self.width)], dtype=np.uint8)

    def _check(self, other):
        if self.width != other.width:
            raise ValueError("configurations of different widths")


@dataclass(frozen=True)
class ModelParams:
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not math.isfinite(g) or g < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class EventRecord:
    time: float
    neuron: int
    kind: str  # "spike" | "leak"
    active_count: int = -1


@dataclass(frozen=True)
class ExtinctionOutcome:
    """Result of one run.

    ``time`` is the extinction time when ``status == "extinct"``; for a
    censored run it is the horizon, or the time of the last simulated event
    when the event budget ran out first.
    """

    status: str
    time: float
    events: int
    spikes: int = 0

    @property
    def extinct(self) -> bool:
        return self.status == "extinct"


@dataclass
class ReplicaBatch:
    """Column-oriented replica outcomes, ordered by replica index."""

    status: np.ndarray  # int8, 0 = extinct, 1 = censored
    time: np.ndarray
    events: np.ndarray
    spikes: np.ndarray

    def __len__(self):
        return len(self.time)

    @property
    def censored(self) -> np.ndarray:
        return self.status == CENSORED

    def outcomes(self) -> list[ExtinctionOutcome]:
        return [
            ExtinctionOutcome("extinct" if s == EXTINCT else "censored", float(t), int(e), int(sp))
            for s, t, e, sp in zip(self.status, self.time, self.events, self.spikes)
        ]


@dataclass
class Trajectory:
    outcome: ExtinctionOutcome
    events: list


def configuration(net: Network, labels: Iterable[int]) -> Configuration:
    """Configuration with the neurons carrying ``labels`` active."""
    return Configuration.from_indices(net.size, net.indices(labels))


def full_configuration(net: Network) -> Configuration:
    return Configuration.full(net.size)


def _successor(net: Network, bits: int, i: int, spike: bool) -> int:
    bits &= ~(1 << i)
    if spike:
        bits |= net.post_masks[i]
    return bits


def step(net: Network, params: ModelParams, cfg: Configuration, rng: np.random.Generator,
         t: float = 0.0) -> tuple[EventRecord, Configuration]:
    """Draw the next event from ``cfg`` and apply it.

    Three uniforms are consumed, in order: waiting time, acting neuron
    (uniform over the sorted active set), event kind.
    """
    _check_cfg(net, cfg)
    k = cfg.count
    if k == 0:
        raise ValueError("step() called on the absorbing (all-quiescent) state")
    u = rng.random(3)
    unit = 1.0 + params.gamma
    gap = -math.log1p(-u[0]) / (k * unit)
    i = cfg.active[int(u[1] * k)]
    spike = bool(u[2] < 1.0 / unit)
    new = Configuration(cfg.width, _successor(net, cfg.bits, i, spike))
    return EventRecord(t + gap, net.labels[i], "spike" if spike else "leak", new.count), new


def _check_cfg(net, cfg):
    if not isinstance(cfg, Configuration):
        raise TypeError("expected a Configuration")
    if cfg.width != net.size:
        raise ValueError(f"configuration width {cfg.width} != network size {net.size}")


def _prepare(net, params, init, horizon, max_events):
    _check_cfg(net, init)
    horizon = float(horizon)
    if math.isnan(horizon) or horizon < 0:
        raise ValueError("horizon must be >= 0 (inf for none)")
    budget = -1 if max_events is None else int(max_events)
    if max_events is not None and budget < 0:
        raise ValueError("max_events must be >= 0")
    if params.gamma == 0 and math.isinf(horizon) and budget < 0 and not init.is_empty:
        raise ValueError("gamma = 0 needs a finite horizon or an event budget: "
                         "extinction is not guaranteed without leaks")
    indptr, indices = net.post_csr
    return indptr, indices, list(init.active), horizon, budget


def _outcome(res):
    status, t, events, spikes = res
    return ExtinctionOutcome("extinct" if status == EXTINCT else "censored",
                             float(t), int(events), int(spikes))


def simulate_extinction(net: Network, params: ModelParams, init: Configuration,
                        rng: np.random.Generator, horizon: float = math.inf,
                        max_events: int | None = None) -> ExtinctionOutcome:
    """Run the process from ``init`` until extinction or censoring.

    The run is censored when the next event would fall after ``horizon``
    (reported time = horizon) or when ``max_events`` events have been
    simulated without extinction.
    """
    ip, ix, start, horizon, budget = _prepare(net, params, init, horizon, max_events)
    return _outcome(kernels.run_extinction(ip, ix, start, params.gamma, horizon, budget,
                                           rng.bit_generator))


def simulate_trajectory(net: Network, params: ModelParams, init: Configuration,
                        rng: np.random.Generator, horizon: float = math.inf,
                        max_events: int | None = None) -> Trajectory:
    """Like :func:`simulate_extinction` but also records every event.

    Always runs the Python kernel; it consumes the stream exactly like the
    compiled one, so the outcome is identical to :func:`simulate_extinction`
    with an equally seeded stream.
    """
    ip, ix, start, horizon, budget = _prepare(net, params, init, horizon, max_events)
    trace = []
    res = _pykernels.run_extinction(ip, ix, start, params.gamma, horizon, budget,
                                    rng.bit_generator, trace)
    labels = net.labels
    events = [EventRecord(t, labels[i], "spike" if sp else "leak", k) for t, i, sp, k in trace]
    return Trajectory(_outcome(res), events)


def survival_probe(net: Network, params: ModelParams, init: Configuration, t: float,
                   rng: np.random.Generator) -> bool:
    """Whether any neuron is still active at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return not simulate_extinction(net, params, init, rng, horizon=t).extinct


def _run_chunk(args):
    ip, ix, start, gamma, horizon, budget, seed, lo, hi = args
    run = kernels.run_extinction
    out = np.empty((hi - lo, 4), dtype=np.float64)
    for r in range(lo, hi):
        out[r - lo] = run(ip, ix, start, gamma, horizon, budget, replica_bitgen(seed, r))
    return lo, out


def replica_batch(net: Network, params: ModelParams, init: Configuration, replica_count: int,
                  master_seed: int, horizon: float = math.inf, max_events: int | None = None,
                  workers: int = 1) -> ReplicaBatch:
    """Independent replicas as arrays; replica ``r`` uses stream ``(master_seed, r)``.

    Results are identical for every ``workers`` value.
    """
    if replica_count < 1:
        raise ValueError("replica_count must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    ip, ix, start, horizon, budget = _prepare(net, params, init, horizon, max_events)
    base = (ip, ix, start, params.gamma, horizon, budget, int(master_seed))
    n = int(replica_count)
    table = np.empty((n, 4), dtype=np.float64)
    if workers == 1 or n < 2 * workers:
        table[:] = _run_chunk(base + (0, n))[1]
    else:
        nchunks = min(n, 4 * workers)
        edges = np.linspace(0, n, nchunks + 1).astype(int)
        jobs = [base + (int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for lo, out in pool.map(_run_chunk, jobs):
                table[lo:lo + len(out)] = out
    return ReplicaBatch(table[:, 0].astype(np.int8), table[:, 1].copy(),
                        table[:, 2].astype(np.int64), table[:, 3].astype(np.int64))


def run_replicas(net: Network, params: ModelParams, init: Configuration, replica_count: int,
                 master_seed: int, horizon: float = math.inf, max_events: int | None = None,
                 workers: int = 1) -> list[ExtinctionOutcome]:
    return replica_batch(net, params, init, replica_count, master_seed, horizon,
                         max_events, workers).outcomes()


def write_trace_csv(path: str | os.PathLike, trajectory: Trajectory,
                    comments: Sequence[str] = ()) -> None:
    """Dump events as ``time,neuron,kind,active_count``."""
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "neuron", "kind", "active_count"])
        for ev in trajectory.events:
            w.writerow([f"{ev.time:.17g}", ev.neuron, ev.kind, ev.active_count])

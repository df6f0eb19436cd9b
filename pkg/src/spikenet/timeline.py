"""Graphical construction: one realization of all clocks, every initial state.

Each neuron owns a rate-1 Poisson stream of spike marks and a rate-``gamma``
stream of leak marks on ``[0, horizon]``. Reading the marks in time order, a
leak mark silences its neuron and a spike mark fires its neuron only if the
neuron is active at that moment. Running several initial configurations
over the same timeline couples them, which is what makes additivity and
monotonicity exact, per-realization statements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import Configuration, ExtinctionOutcome, ModelParams
from .network import Network

__all__ = [
    "GraphicalTimeline",
    "build_timeline",
    "evolve_on_timeline",
    "states_on_timeline",
    "extinction_on_timeline",
]

LEAK = 0
SPIKE = 1


@dataclass(frozen=True, eq=False)
class GraphicalTimeline:
    """Poisson marks for every neuron.

    ``times``/``neurons``/``kinds`` hold all marks merged and sorted by
    ``(time, neuron, kind)`` with leak before spike on exact ties.
    """

    horizon: float
    gamma: float
    spike_marks: tuple
    leak_marks: tuple
    times: np.ndarray
    neurons: np.ndarray
    kinds: np.ndarray

    @property
    def size(self) -> int:
        return len(self.spike_marks)


def build_timeline(net: Network, params: ModelParams, horizon: float,
                   rng: np.random.Generator) -> GraphicalTimeline:
    """Sample spike marks (rate 1) and leak marks (rate gamma) per neuron.

    Neurons are visited in index order; for each one the spike marks are
    drawn before the leak marks.
    """
    horizon = float(horizon)
    if not (np.isfinite(horizon) and horizon > 0):
        raise ValueError("timeline horizon must be finite and positive")
    spikes, leaks = [], []
    for _ in range(net.size):
        spikes.append(np.sort(rng.uniform(0.0, horizon, rng.poisson(horizon))))
        if params.gamma > 0:
            leaks.append(np.sort(rng.uniform(0.0, horizon, rng.poisson(params.gamma * horizon))))
        else:
            leaks.append(np.empty(0))
    times = np.concatenate(spikes + leaks)
    neurons = np.concatenate([np.full(len(a), i, dtype=np.intp) for i, a in enumerate(spikes)]
                             + [np.full(len(a), i, dtype=np.intp) for i, a in enumerate(leaks)])
    kinds = np.concatenate([np.full(len(a), SPIKE, dtype=np.int8) for a in spikes]
                           + [np.full(len(a), LEAK, dtype=np.int8) for a in leaks])
    order = np.lexsort((kinds, neurons, times))
    return GraphicalTimeline(horizon, params.gamma, tuple(spikes), tuple(leaks),
                             times[order], neurons[order], kinds[order])


def _check(timeline, net, init):
    if timeline.size != net.size:
        raise ValueError("timeline and network sizes differ")
    if init.width != net.size:
        raise ValueError("configuration width does not match the network")


def states_on_timeline(timeline: GraphicalTimeline, net: Network, init: Configuration,
                       times: Sequence[float]) -> list[Configuration]:
    """Configurations at each of the (non-decreasing) query ``times``."""
    _check(timeline, net, init)
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("query times must be non-decreasing")
    if times and times[-1] > timeline.horizon:
        raise ValueError(f"query time {times[-1]} beyond timeline horizon {timeline.horizon}")
    masks = net.post_masks
    mt = timeline.times.tolist()
    mn = timeline.neurons.tolist()
    mk = timeline.kinds.tolist()
    bits = init.bits
    out = []
    m = 0
    for t in times:
        while m < len(mt) and mt[m] <= t and bits:
            i = mn[m]
            if bits >> i & 1:
                bits &= ~(1 << i)
                if mk[m] == SPIKE:
                    bits |= masks[i]
            m += 1
        out.append(Configuration(init.width, bits))
    return out


def evolve_on_timeline(timeline: GraphicalTimeline, net: Network, init: Configuration,
                       t: float) -> Configuration:
    return states_on_timeline(timeline, net, init, [t])[0]


def extinction_on_timeline(timeline: GraphicalTimeline, net: Network,
                           init: Configuration) -> ExtinctionOutcome:
    """First time the configuration empties; censored at the horizon otherwise.

    ``events`` counts effective marks (those hitting an active neuron).
    """
    _check(timeline, net, init)
    bits = init.bits
    if not bits:
        return ExtinctionOutcome("extinct", 0.0, 0, 0)
    masks = net.post_masks
    events = spikes = 0
    for t, i, kind in zip(timeline.times.tolist(), timeline.neurons.tolist(),
                          timeline.kinds.tolist()):
        if bits >> i & 1:
            bits &= ~(1 << i)
            events += 1
            if kind == SPIKE:
                bits |= masks[i]
                spikes += 1
            if not bits:
                return ExtinctionOutcome("extinct", t, events, spikes)
    return ExtinctionOutcome("censored", timeline.horizon, events, spikes)

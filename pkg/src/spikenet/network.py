"""Interaction graphs for the spiking-neuron particle system.

A :class:`Network` stores, for every neuron, the set of its presynaptic
neurons. Neurons carry integer labels (``-N..N`` on the lattice, ``1..N`` on
the complete graph) but are addressed internally by contiguous indices
``0..size-1`` so that configurations can be stored as bit vectors.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Network",
    "build_lattice",
    "build_complete",
    "from_presynaptic",
    "load_adjacency",
    "postsynaptic",
]

KINDS = ("lattice", "complete", "custom")


@dataclass(frozen=True, eq=False)
class Network:
    """Directed presynaptic structure over a finite set of neurons.

    Attributes
    ----------
    size : int
        Number of neurons.
    labels : tuple of int
        Label of the neuron stored at each internal index.
    presynaptic : tuple of frozenset of int
        ``presynaptic[i]`` holds the *indices* of the neurons feeding neuron ``i``.
    kind : str
        One of ``"lattice"``, ``"complete"``, ``"custom"``.
    param : int or None
        The ``N`` the lattice / complete graph was built from.
    """

    size: int
    labels: tuple
    presynaptic: tuple
    kind: str = "custom"
    param: int | None = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("a network needs at least one neuron")
        if len(self.labels) != self.size or len(self.presynaptic) != self.size:
            raise ValueError("labels and presynaptic sets must have one entry per neuron")
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}")
        index = {}
        for i, lab in enumerate(self.labels):
            if lab in index:
                raise ValueError(f"duplicate neuron label {lab}")
            index[lab] = i
        for i, pre in enumerate(self.presynaptic):
            for j in pre:
                if not 0 <= j < self.size:
                    raise ValueError(f"neuron {self.labels[i]}: presynaptic index {j} out of range")
                if j == i:
                    raise ValueError(f"neuron {self.labels[i]}: self-loops are not allowed")
        object.__setattr__(self, "_index", index)

    def __repr__(self):
        return f"Network(kind={self.kind!r}, size={self.size})"

    def index(self, label: int) -> int:
        """Internal index of the neuron with the given label."""
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"no neuron labelled {label!r}") from None

    def label(self, index: int) -> int:
        return self.labels[index]

    def indices(self, labels: Iterable[int]) -> list[int]:
        return [self.index(lab) for lab in labels]

    @cached_property
    def postsynaptic_sets(self) -> tuple:
        """``postsynaptic_sets[i]`` = indices ``j`` with ``i`` in ``presynaptic[j]``."""
        post = [set() for _ in range(self.size)]
        for j, pre in enumerate(self.presynaptic):
            for i in pre:
                post[i].add(j)
        return tuple(frozenset(s) for s in post)

    @cached_property
    def post_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Postsynaptic lists in CSR form ``(indptr, indices)``, indices sorted."""
        indptr = np.zeros(self.size + 1, dtype=np.intp)
        cols = []
        for i, s in enumerate(self.postsynaptic_sets):
            cols.extend(sorted(s))
            indptr[i + 1] = len(cols)
        return indptr, np.asarray(cols, dtype=np.intp)

    @cached_property
    def post_masks(self) -> tuple:
        """Postsynaptic sets as integer bit masks (bit ``j`` set for neuron ``j``)."""
        masks = []
        for s in self.postsynaptic_sets:
            m = 0
            for j in s:
                m |= 1 << j
            masks.append(m)
        return tuple(masks)

    def is_symmetric(self) -> bool:
        return all(
            (i in self.presynaptic[j]) == (j in self.presynaptic[i])
            for i in range(self.size)
            for j in range(self.size)
        )


def build_lattice(N: int) -> Network:
    """Nearest-neighbour segment on labels ``-N..N``.

    Interior neurons listen to both neighbours, the two boundary neurons to
    their single neighbour. ``N = 0`` gives one isolated neuron.
    """
    N = _as_count(N, "N")
    size = 2 * N + 1
    pre = []
    for i in range(size):
        s = set()
        if i > 0:
            s.add(i - 1)
        if i < size - 1:
            s.add(i + 1)
        pre.append(frozenset(s))
    return Network(size, tuple(range(-N, N + 1)), tuple(pre), "lattice", N)


def build_complete(N: int) -> Network:
    """Complete digraph on labels ``1..N`` without self-loops."""
    N = _as_count(N, "N")
    if N == 0:
        raise ValueError("the complete graph needs N >= 1 neurons")
    everyone = frozenset(range(N))
    pre = tuple(everyone - {i} for i in range(N))
    return Network(N, tuple(range(1, N + 1)), pre, "complete", N)


def from_presynaptic(presynaptic: Sequence[Sequence[int]] | dict,
                     labels: Sequence[int] | None = None) -> Network:
    """Build a custom network from presynaptic lists given by *label*.

    Parameters
    ----------
    presynaptic : mapping or sequence
        Either ``{label: [pre labels]}`` or a sequence whose ``k``-th entry
        lists the presynaptic labels of ``labels[k]``.
    labels : sequence of int, optional
        Neuron labels when ``presynaptic`` is a sequence; defaults to ``0..n-1``.

    Duplicated entries inside one presynaptic list are rejected.
    """
    if isinstance(presynaptic, dict):
        labels = list(presynaptic)
        lists = [presynaptic[lab] for lab in labels]
    else:
        lists = list(presynaptic)
        labels = list(range(len(lists))) if labels is None else list(labels)
    if len(labels) != len(lists):
        raise ValueError("one presynaptic list per label is required")
    index = {}
    for k, lab in enumerate(labels):
        if lab in index:
            raise ValueError(f"duplicate neuron label {lab}")
        index[lab] = k
    pre = []
    for lab, lst in zip(labels, lists):
        lst = list(lst)
        if len(set(lst)) != len(lst):
            raise ValueError(f"neuron {lab}: duplicate presynaptic entries {lst}")
        try:
            pre.append(frozenset(index[j] for j in lst))
        except KeyError as exc:
            raise ValueError(f"neuron {lab}: unknown presynaptic neuron {exc.args[0]}") from None
    return Network(len(labels), tuple(labels), tuple(pre), "custom", None)


def load_adjacency(path: str | os.PathLike) -> Network:
    """Read a plain-text adjacency file.

    Each non-blank line reads ``i: j1 j2 ...`` and declares the presynaptic
    neurons of ``i``. ``#`` starts a comment. Every referenced neuron must
    have its own line.
    """
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, sep, tail = line.partition(":")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'i: j1 j2 ...'")
            try:
                lab = int(head)
                pre = [int(tok) for tok in tail.split()]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: neuron labels must be integers") from None
            if lab in entries:
                raise ValueError(f"{path}:{lineno}: neuron {lab} declared twice")
            entries[lab] = pre
    if not entries:
        raise ValueError(f"{path}: no neurons declared")
    return from_presynaptic(entries)


def postsynaptic(net: Network, i: int) -> set[int]:
    """Labels of the neurons that ``i`` (a label) projects onto."""
    idx = net.index(i)
    return {net.labels[j] for j in net.postsynaptic_sets[idx]}


def _as_count(N, name):
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise TypeError(f"{name} must be an integer")
    if N < 0:
        raise ValueError(f"{name} must be >= 0")
    return int(N)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikenet.network import (build_complete, build_lattice, from_presynaptic, load_adjacency,
                              postsynaptic)


def pre_labels(net, label):
    return {net.label(j) for j in net.presynaptic[net.index(label)]}


def test_lattice_n1():
    net = build_lattice(1)
    assert net.labels == (-1, 0, 1)
    assert pre_labels(net, 0) == {-1, 1}
    assert pre_labels(net, 1) == {0}
    assert pre_labels(net, -1) == {0}


def test_lattice_n0_single_neuron():
    net = build_lattice(0)
    assert net.size == 1 and net.labels == (0,)
    assert net.presynaptic == (frozenset(),)


def test_lattice_n2():
    net = build_lattice(2)
    assert net.size == 5
    assert pre_labels(net, 2) == {1}
    assert pre_labels(net, 0) == {-1, 1}
    assert pre_labels(net, -2) == {-1}


def test_lattice_sizes_sweep():
    for N in range(101):
        assert build_lattice(N).size == 2 * N + 1


def test_complete_examples():
    assert build_complete(1).presynaptic == (frozenset(),)
    net = build_complete(3)
    assert pre_labels(net, 1) == {2, 3}
    assert pre_labels(net, 2) == {1, 3}
    assert pre_labels(net, 3) == {1, 2}
    net2 = build_complete(2)
    assert pre_labels(net2, 1) == {2} and pre_labels(net2, 2) == {1}


def test_complete_rejects_zero():
    with pytest.raises(ValueError):
        build_complete(0)


def test_negative_sizes_rejected():
    with pytest.raises(ValueError):
        build_lattice(-1)
    with pytest.raises(TypeError):
        build_lattice(1.5)


@pytest.mark.parametrize("net", [build_lattice(4), build_complete(6), build_lattice(0)])
def test_symmetry(net):
    assert net.is_symmetric()
    for i in net.labels:
        assert postsynaptic(net, i) == pre_labels(net, i)


def test_postsynaptic_examples():
    assert postsynaptic(build_lattice(1), 0) == {-1, 1}
    assert postsynaptic(build_complete(3), 2) == {1, 3}
    custom = from_presynaptic({1: [], 2: [1]})
    assert postsynaptic(custom, 1) == {2}
    assert postsynaptic(custom, 2) == set()
    assert not custom.is_symmetric()


def test_postsynaptic_invalid_label():
    with pytest.raises((KeyError, ValueError)):
        postsynaptic(build_complete(3), 7)


def test_custom_rejects_bad_input():
    with pytest.raises(ValueError, match="duplicate"):
        from_presynaptic({1: [2, 2], 2: []})
    with pytest.raises(ValueError):
        from_presynaptic({1: [1]})  # self-loop
    with pytest.raises(ValueError, match="unknown"):
        from_presynaptic({1: [5]})


def test_csr_matches_sets():
    net = build_lattice(3)
    indptr, indices = net.post_csr
    for i in range(net.size):
        assert set(indices[indptr[i]:indptr[i + 1]].tolist()) == set(net.postsynaptic_sets[i])
        mask = net.post_masks[i]
        assert {j for j in range(net.size) if mask >> j & 1} == set(net.postsynaptic_sets[i])


def test_load_adjacency(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# ring\n1: 3\n2: 1\n3: 2   # last\n\n")
    net = load_adjacency(p)
    assert net.kind == "custom" and net.size == 3
    assert pre_labels(net, 1) == {3}
    assert postsynaptic(net, 1) == {2}


def test_load_adjacency_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1: 2\n2 1\n")
    with pytest.raises(ValueError, match=":2:"):
        load_adjacency(p)
    p.write_text("1: x\n")
    with pytest.raises(ValueError, match=":1:"):
        load_adjacency(p)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12).flatmap(lambda n: st.lists(
    st.sets(st.integers(0, n - 1), max_size=n), min_size=n, max_size=n)))
def test_random_custom_networks_valid(lists):
    n = len(lists)
    lists = [sorted(s - {i}) for i, s in enumerate(lists)]
    net = from_presynaptic(lists)
    for i, pre in enumerate(net.presynaptic):
        assert i not in pre
        assert all(0 <= j < n for j in pre)
    # postsynaptic is the transpose of presynaptic
    for i in range(n):
        for j in range(n):
            assert (i in net.presynaptic[j]) == (j in net.postsynaptic_sets[i])

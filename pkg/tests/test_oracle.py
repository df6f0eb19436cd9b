import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from spikenet import oracle
from spikenet.engine import ModelParams, full_configuration, replica_batch
from spikenet.network import build_complete, build_lattice, from_presynaptic
from spikenet.stats import dkw_band


def chain(N, gamma):
    c = oracle.count_chain_generator(N, gamma)
    return c.generator, c.init()


def exact_count_chain_mean(N, gamma):
    """Mean extinction time from N active, by Gaussian elimination over the rationals."""
    g = Fraction(gamma)
    n = N
    A = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, N + 1):
        r = k - 1
        if k == N:
            A[r][r] = N * (1 + g)
            if N > 1:
                A[r][N - 2] -= N * (1 + g)
            continue
        out = k * g
        if k > 1:
            A[r][k - 2] -= k * g
        if k != N - 1:
            out += k
            A[r][N - 2] -= k
        A[r][r] += out
    b = [Fraction(1)] * n
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        b[c], b[piv] = b[piv], b[c]
        for r in range(c + 1, n):
            if A[r][c]:
                f = A[r][c] / A[c][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
                b[r] -= f * b[c]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        x[r] = (b[r] - sum(A[r][j] * x[j] for j in range(r + 1, n))) / A[r][r]
    return x[N - 1]


# ---------------------------------------------------------------- examples

def test_single_neuron_full_state():
    net = build_complete(1)
    gen = oracle.full_state_generator(net, ModelParams(1.0))
    assert gen.n == 1 and gen.exit_rate[0] == 2.0
    assert oracle.expected_absorption(gen, oracle.full_state_init(net)) == pytest.approx(0.5, rel=1e-15)


def test_complete_two_full_state():
    net = build_complete(2)
    gen = oracle.full_state_generator(net, ModelParams(1.0))
    assert oracle.expected_absorption(gen, oracle.full_state_init(net)) == pytest.approx(1.25, rel=1e-14)


def test_full_state_size_cap():
    with pytest.raises(ValueError, match="count_chain"):
        oracle.full_state_generator(build_lattice(10), ModelParams(1.0))


def test_count_chain_small():
    gen, _ = chain(1, 1.0)
    assert gen.n == 1 and gen.exit_rate[0] == 2.0
    gen, init = chain(2, 1.0)
    Q = gen.generator().toarray()
    # state order 1, 2: from 2 rate 4 to 1; from 1 leak 1 to absorption (spike is a self-loop)
    assert Q.tolist() == [[-1.0, 0.0], [4.0, -4.0]]
    assert gen.exit_rate.tolist() == [1.0, 0.0]
    assert oracle.expected_absorption(gen, init) == pytest.approx(1.25, rel=1e-15)
    assert oracle.expected_absorption(gen, gen.point_mass(1)) == pytest.approx(1.0, rel=1e-15)


def test_generator_conservative():
    net = build_lattice(2)
    gen = oracle.full_state_generator(net, ModelParams(0.7))
    Q = gen.generator()
    assert np.array_equal(-Q.diagonal(), gen.outflow)
    assert np.allclose(np.asarray(Q.sum(axis=1)).ravel() + gen.exit_rate, 0.0, atol=1e-14)


@pytest.mark.parametrize("N", [3, 10, 30, 50])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_mean_matches_exact_rational_solve(N, gamma):
    gen, init = chain(N, gamma)
    exact = float(exact_count_chain_mean(N, gamma))
    assert oracle.expected_absorption(gen, init) == pytest.approx(exact, rel=1e-13)


# frozen values of E(sigma_N) and beta_N for the complete graph
FROZEN = {
    (10, 0.5): (2351.002380952382, 2351.0025222953077, 0.0007596643792152635),
    (10, 1.0): (67.50396825396825, 67.50653290163788, 0.01812250032502416),
    (10, 2.0): (6.149586123511905, 6.160797788501256, 0.10083175841366199),
    (50, 1.0): (11739040243626.898, 11739040243624.252, 1.8604844515458881e-13),
    (50, 2.0): (9072309.47200903, 9072309.472007062, 1.5960075550047748e-07),
    (200, 0.5): (4.460438230879923e+92, 4.460438230876621e+92, 8.599935737330531e-93),
    (200, 1.0): (4.058134610721342e+57, 4.058134610718322e+57, 7.086255577884224e-58),
    (200, 2.0): (5.594525651003462e+32, 5.594525650999305e+32, 3.423740687355414e-33),
}


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_means_and_beta(key):
    mean, beta, dist = FROZEN[key]
    gen, init = chain(*key)
    assert oracle.expected_absorption(gen, init) == pytest.approx(mean, rel=1e-12)
    assert oracle.beta_quantile(gen, init) == pytest.approx(beta, rel=1e-9)


@pytest.mark.parametrize("key", [(10, 1.0), (10, 2.0), (50, 2.0), (50, 1.0), (200, 1.0)])
def test_frozen_sup_distance(key):
    gen, init = chain(*key)
    d = oracle.exponential_sup_distance(gen, init)
    assert d.value == pytest.approx(FROZEN[key][2], rel=1e-5)


def test_sup_distance_methods_agree():
    gen, init = chain(30, 1.0)
    a = oracle.exponential_sup_distance(gen, init, method="uniformization").value
    b = oracle.exponential_sup_distance(gen, init, method="pole-expansion").value
    assert abs(a - b) <= 1e-12


def test_sup_distance_pole_expansion_guard():
    gen, init = chain(5, 1.0)
    with pytest.raises(oracle.OracleError):
        oracle.exponential_sup_distance(gen, init, method="pole-expansion")


def test_survival_examples():
    gen, init = chain(1, 1.0)
    c = oracle.survival_function(gen, init, [0.0, 0.5])
    assert c.probs[0] == 1.0
    assert abs(c.probs[1] - math.exp(-1.0)) <= 1e-10


def test_survival_matches_matrix_exponential():
    gen, init = chain(10, 1.0)
    Q = gen.generator().toarray()
    ts = [0.0, 1.0, 10.0, 67.5, 300.0]
    got = oracle.survival_function(gen, init, ts).probs
    ref = [float(init @ expm(Q * t) @ np.ones(gen.n)) for t in ts]
    assert np.abs(got - ref).max() <= 1e-10


def test_survival_far_tail_slow_mode():
    gen, init = chain(50, 1.0)
    mean = oracle.expected_absorption(gen, init)
    ev = oracle.SurvivalEvaluator(gen, init)
    s = ev(mean)
    assert ev.slow is not None
    assert s == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_survival_rejects_decreasing_times():
    gen, init = chain(3, 1.0)
    with pytest.raises(ValueError):
        oracle.survival_function(gen, init, [1.0, 0.5])


def test_beta_examples():
    gen, init = chain(1, 1.0)
    assert oracle.beta_quantile(gen, init) == pytest.approx(0.5, abs=1e-12)
    gen, init = chain(1, 0.0)
    assert oracle.beta_quantile(gen, init) == pytest.approx(1.0, abs=1e-12)
    gen, init = chain(2, 1.0)
    b = oracle.beta_quantile(gen, init)
    s = oracle.survival_function(gen, init, [b]).probs[0]
    assert abs(s - math.exp(-1.0)) <= 1e-9


def test_singular_system_reported():
    rates = sp.csr_matrix(np.array([[0, 1.0, 0], [1.0, 0, 0], [0, 0, 0]]))
    gen = oracle.SubGenerator((0, 1, 2), rates, np.array([0, 0, 1.0]))
    with pytest.raises(oracle.SingularSystemError):
        oracle.expected_absorption(gen, [1.0, 0, 0])


def test_subgenerator_validation():
    with pytest.raises(ValueError, match="outflow"):
        oracle.SubGenerator((0, 1), sp.csr_matrix((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        oracle.SubGenerator((0,), sp.csr_matrix(np.array([[-1.0]])), np.array([1.0]))


# ---------------------------------------------------------------- lumping

@pytest.mark.parametrize("N", [2, 3, 4])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_lumping(N, gamma):
    net = build_complete(N)
    full = oracle.full_state_generator(net, ModelParams(gamma))
    finit = oracle.full_state_init(net)
    gen, init = chain(N, gamma)
    m1 = oracle.expected_absorption(full, finit)
    m2 = oracle.expected_absorption(gen, init)
    assert abs(m1 - m2) <= 1e-10 * m2
    grid = np.linspace(0, 5 * m2, 101)
    s1 = oracle.survival_function(full, finit, grid).probs
    s2 = oracle.survival_function(gen, init, grid).probs
    assert np.abs(s1 - s2).max() <= 1e-8


# ------------------------------------------------------------ MC cross-checks

def test_lattice_full_state_vs_mc():
    net = build_lattice(1)
    gen = oracle.full_state_generator(net, ModelParams(1.0))
    exact = oracle.expected_absorption(gen, oracle.full_state_init(net))
    b = replica_batch(net, ModelParams(1.0), full_configuration(net), 100000, 51)
    se = b.time.std(ddof=1) / math.sqrt(len(b))
    assert abs(b.time.mean() - exact) <= 4 * se


def test_survival_curve_within_dkw_band_of_mc():
    net = build_complete(2)
    gen, init = chain(2, 1.0)
    n = 100000
    x = np.sort(replica_batch(net, ModelParams(1.0), full_configuration(net), n, 52).time)
    F = 1.0 - oracle.survival_function(gen, init, x).probs
    i = np.arange(1, n + 1)
    d = max((i / n - F).max(), (F - (i - 1) / n).max())
    assert d <= dkw_band(n, 0.01)


# ------------------------------------------------- modified chain and measure

def test_modified_chain_n3():
    Q = oracle.modified_chain(3, 1.0).Q
    assert Q.tolist() == [[-2.0, 2.0, 0.0], [2.0, -2.0, 0.0], [0.0, 6.0, -6.0]]


@pytest.mark.parametrize("N", [3, 10, 100])
def test_modified_chain_rows(N):
    g = 0.7
    Q = oracle.modified_chain(N, g).Q
    assert np.abs(Q.sum(axis=1)).max() <= 1e-12
    assert Q[0, N - 2] == pytest.approx(1 + g)
    assert Q[N - 1, N - 2] == pytest.approx(N * (1 + g))
    assert Q[N - 2, N - 3] == pytest.approx((N - 1) * g)
    for k in range(2, N - 1):
        assert Q[k - 1, k - 2] == pytest.approx(k * g)
        assert Q[k - 1, N - 2] == pytest.approx(k)
    mu = oracle.invariant_measure(N, g).mu
    assert np.abs(mu @ Q).max() <= 1e-10


def test_modified_chain_rejects_small_n():
    with pytest.raises(ValueError):
        oracle.modified_chain(2, 1.0)


def test_invariant_measure_examples():
    mu = oracle.invariant_measure(3, 1.0).mu
    assert mu.tolist() == pytest.approx([0.5, 0.5, 0.0], abs=1e-15)
    with pytest.raises(ValueError):
        oracle.invariant_measure(5, 0.0)
    with pytest.raises(ValueError):
        oracle.invariant_measure(2, 1.0)


@pytest.mark.parametrize("N", [10, 100, 1000])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_invariant_measure_bound(N, gamma):
    mu = oracle.invariant_measure(N, gamma).mu
    assert mu[N - 1] == 0.0
    assert abs(mu.sum() - 1) <= 1e-12
    assert (mu >= 0).all()
    assert mu[N - 2] >= 1 / (2 * gamma * (N - 1))


# ------------------------------------------------------------ closed forms

def test_branching_bound():
    with pytest.warns(oracle.VacuousBoundWarning):
        assert oracle.branching_bound(1.0, 7.0) == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert oracle.branching_bound(2.0, 0.0) == 1.0
        assert oracle.branching_bound(2.0, 3.0) == pytest.approx(0.049787068367863944)
    with pytest.raises(ValueError):
        oracle.branching_bound(2.0, -1.0)


def test_ek_probability():
    assert oracle.ek_probability(10, 1.0, 1) == 0.5
    assert oracle.ek_probability(10, 1.0, 2) == 0.25
    assert oracle.ek_probability(10, 1.0, 5) == 0.03125
    with pytest.raises(ValueError):
        oracle.ek_probability(3, 1.0, 4)


def test_expected_event_count_small():
    # K_1: one event; K_2 at gamma=1 from 2: 1 + (events from 1) = 1 + 2
    assert oracle.expected_event_count(1, 1.0) == pytest.approx(1.0)
    assert oracle.expected_event_count(2, 1.0) == pytest.approx(3.0)


# ------------------------------------------------------------ trends

@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_exponentiality_trend(gamma):
    d10 = oracle.exponential_sup_distance(*chain(10, gamma)).value
    d100 = oracle.exponential_sup_distance(*chain(100, gamma)).value
    assert d100 < d10


def test_ratio_trend():
    def gap(N):
        gen, init = chain(N, 1.0)
        return abs(oracle.beta_quantile(gen, init) / oracle.expected_absorption(gen, init) - 1)
    assert gap(100) < gap(10)


# ------------------------------------------------------------ properties

@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.lists(st.sets(st.integers(0, n - 1), max_size=n), min_size=n, max_size=n),
    st.floats(0.1, 3.0))))
def test_random_networks_conservative_and_monotone(data):
    lists, gamma = data
    lists = [sorted(s - {i}) for i, s in enumerate(lists)]
    net = from_presynaptic(lists)
    gen = oracle.full_state_generator(net, ModelParams(gamma))
    Q = gen.generator()
    row = np.asarray(Q.sum(axis=1)).ravel() + gen.exit_rate
    assert np.abs(row).max() <= 1e-12 * gen.outflow.max()
    init = oracle.full_state_init(net)
    m = oracle.expected_absorption(gen, init)
    c = oracle.survival_function(gen, init, np.linspace(0, 4 * m, 21))
    assert (np.diff(c.probs) <= 0).all() and c.probs[0] == 1.0 and (c.probs >= 0).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.floats(0.05, 5.0))
def test_count_chain_mean_positive_and_beta_consistent(N, gamma):
    gen, init = chain(N, gamma)
    m = oracle.expected_absorption(gen, init)
    b = oracle.beta_quantile(gen, init)
    assert m > 0 and b > 0
    s = oracle.survival_function(gen, init, [b]).probs[0]
    assert abs(s - math.exp(-1)) <= 1e-9


def test_csv_exports(tmp_path):
    gen, init = chain(3, 1.0)
    curve = oracle.survival_function(gen, init, [0.0, 1.0])
    oracle.write_survival_csv(tmp_path / "s.csv", curve, ["n=3"])
    assert (tmp_path / "s.csv").read_text().splitlines()[:3] == ["# n=3", "t,prob", "0,1"]
    oracle.write_measure_csv(tmp_path / "m.csv", oracle.invariant_measure(3, 1.0))
    assert (tmp_path / "m.csv").read_text().splitlines() == ["k,mu", "1,0.5", "2,0.5", "3,0"]

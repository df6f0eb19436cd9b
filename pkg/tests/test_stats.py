import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikenet import oracle
from spikenet.engine import ModelParams, full_configuration, replica_batch
from spikenet.network import build_complete
from spikenet.rng import make_stream
from spikenet.stats import (dkw_band, empirical_beta, empirical_survival, ks_to_unit_exponential,
                            summarize)


def test_summarize_examples():
    s = summarize([2, 2, 2])
    assert (s.mean, s.variance, s.count) == (2.0, 0.0, 3)
    s = summarize([0, 1])
    assert s.mean == 0.5 and s.variance == 0.5
    assert s.se == pytest.approx(math.sqrt(0.5 / 2))


def test_summarize_exponential_mean():
    x = make_stream(1).exponential(0.5, 100000)
    s = summarize(x)
    assert abs(s.mean - 0.5) <= 3 * s.se


def test_summarize_censoring():
    s = summarize([1.0, 2.0, 10.0], censored=[False, False, True])
    assert s.count == 2 and s.censored_count == 1 and s.mean == 1.5
    with pytest.raises(ValueError):
        summarize([1.0, 2.0], censored=[True, True])
    with pytest.raises(ValueError):
        summarize([])


def test_summarize_large_offset():
    rng = make_stream(2)
    x = 1e9 + rng.random(1000)
    s = summarize(x)
    ref_mean = math.fsum(x) / x.size
    ref_var = math.fsum((v - ref_mean) ** 2 for v in x) / (x.size - 1)
    assert s.mean == pytest.approx(ref_mean, rel=1e-12)
    assert s.variance == pytest.approx(ref_var, rel=1e-12)


def test_summarize_replica_batch():
    net = build_complete(3)
    b = replica_batch(net, ModelParams(1.0), full_configuration(net), 200, 3, horizon=2.0)
    s = summarize(b)
    assert s.count + s.censored_count == 200 and s.censored_count == int(b.censored.sum())


def test_ks_null_rarely_rejects():
    rejections = 0
    for seed in range(200):
        r = ks_to_unit_exponential(make_stream(seed).exponential(1.0, 10000), normalize=False)
        rejections += r.reject_at_1pct
    assert rejections <= 4  # about 2 expected at the 1% level


def test_ks_constant_samples():
    r = ks_to_unit_exponential(np.ones(1000))
    assert r.statistic >= 1 - math.exp(-1) - 1e-12


def test_ks_scale_misfit():
    x = make_stream(4).exponential(0.5, 10000)
    assert ks_to_unit_exponential(x, normalize=False).reject_at_1pct
    assert not ks_to_unit_exponential(x, normalize=True).reject_at_1pct
    assert not ks_to_unit_exponential(x, normalize=0.5).reject_at_1pct


def test_ks_errors_and_censoring():
    with pytest.raises(ValueError):
        ks_to_unit_exponential([])
    with pytest.raises(ValueError, match="censored"):
        ks_to_unit_exponential([1.0, 2.0, 3.0], censored=[False, True, False])
    r = ks_to_unit_exponential([1.0, 2.0, 3.0], censored=[False, True, False],
                               censored_policy="drop")
    assert r.n == 2 and r.dropped == 1 and r.censored_policy == "drop"
    assert 0 <= r.statistic <= 1
    assert r.critical_1pct == pytest.approx(1.628 / math.sqrt(2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=60), st.randoms())
def test_ks_order_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    a = ks_to_unit_exponential(xs).statistic
    assert a == ks_to_unit_exponential(ys).statistic
    assert 0 <= a <= 1


def test_empirical_beta_exponential():
    for scale in (1.0, 0.5):
        q = empirical_beta(make_stream(5).exponential(scale, 100000))
        assert q.ci_low <= scale <= q.ci_high
        assert q.ci_low <= q.value <= q.ci_high
        assert q.rank == math.ceil((1 - math.exp(-1)) * 100000)


def test_empirical_beta_small_sample_rejected():
    with pytest.raises(ValueError):
        empirical_beta(np.ones(19))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=20, max_size=80), st.floats(0.1, 10))
def test_empirical_beta_scale_equivariant(xs, c):
    x = np.asarray(xs)
    a = empirical_beta(x)
    b = empirical_beta(c * x)
    assert b.value == c * a.value


def test_empirical_beta_matches_oracle():
    net = build_complete(2)
    b = replica_batch(net, ModelParams(1.0), full_configuration(net), 100000, 6)
    q = empirical_beta(b)
    cc = oracle.count_chain_generator(2, 1.0)
    beta = oracle.beta_quantile(cc.generator, cc.init())
    assert q.ci_low <= beta <= q.ci_high


def test_dkw_band():
    assert dkw_band(100000, 0.01) == pytest.approx(0.00515, abs=5e-6)
    assert dkw_band(400, 0.05) == pytest.approx(dkw_band(100, 0.05) / 2)
    for bad in (1.0, 0.0, -0.5):
        with pytest.raises(ValueError):
            dkw_band(100, bad)
    with pytest.raises(ValueError):
        dkw_band(0, 0.01)


def test_empirical_survival():
    s = empirical_survival([1.0, 2.0, 3.0, 4.0], [0.0, 2.0, 4.0])
    assert s.tolist() == [1.0, 0.5, 0.0]

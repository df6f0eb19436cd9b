import json
import math

import pytest

from spikenet.experiments import (EXPERIMENTS, ExperimentSpec, exp_complete_exponentiality,
                                  exp_ek, exp_gamma_scan, exp_lattice_concentration,
                                  exp_mc_oracle, exp_survival_bound, resolve_spec,
                                  run_experiment)


def test_resolve_defaults_and_guards():
    s = resolve_spec(ExperimentSpec("concentration"))
    assert s.Ns == (50, 100, 200, 400) and s.gamma == 2.0 and s.replicas == 2000
    assert resolve_spec(ExperimentSpec("mc-oracle", gamma=1.0)).gammas == (1.0,)
    with pytest.raises(ValueError, match="unknown experiment"):
        resolve_spec(ExperimentSpec("nope"))
    with pytest.raises(ValueError):
        resolve_spec(ExperimentSpec("ek", gamma=0.0))
    with pytest.raises(ValueError):
        resolve_spec(ExperimentSpec("ek", topology="lattice"))
    assert set(EXPERIMENTS) >= {"concentration", "exponentiality", "survival-bound", "ek",
                                "gamma-scan"}


def test_gamma_zero_rejected_before_simulation():
    with pytest.raises(ValueError):
        run_experiment(ExperimentSpec("gamma-scan", gammas=(0.0, 1.0)))


def test_ek_schema_and_determinism(tmp_path):
    spec = ExperimentSpec("ek", replicas=2000, seed=3, out=str(tmp_path / "a"))
    r1 = run_experiment(spec)
    r2 = run_experiment(ExperimentSpec("ek", replicas=2000, seed=3, out=str(tmp_path / "b")))
    t1 = (tmp_path / "a" / "ek.csv").read_text()
    assert t1 == (tmp_path / "b" / "ek.csv").read_text()
    body = [line for line in t1.splitlines() if not line.startswith("#")]
    assert body[0] == "k,empirical,target,se,pass"
    assert [row[2] for row in r1.rows] == [0.5, 0.25, 0.03125]
    summary = json.loads((tmp_path / "a" / "ek.json").read_text())
    assert {"name", "params", "seed", "rows", "pass", "runtime_s"} <= set(summary)
    assert summary["seed"] == 3 and summary["pass"] == r1.passed
    assert r1.rows == r2.rows


def test_ek_rare_event_note():
    r = exp_ek(N=10, gamma=0.05, ks=(10,), replicas=100, seed=1)
    assert any("fewer than 10" in n for n in r.notes)


def test_workers_do_not_change_csv(tmp_path):
    a = run_experiment(ExperimentSpec("survival-bound", replicas=500, workers=1, out=str(tmp_path / "1")))
    b = run_experiment(ExperimentSpec("survival-bound", replicas=500, workers=2, out=str(tmp_path / "2")))
    assert (tmp_path / "1" / "survival-bound.csv").read_bytes() == \
        (tmp_path / "2" / "survival-bound.csv").read_bytes()
    assert a.rows == b.rows


def test_concentration_guards_and_rows():
    with pytest.raises(ValueError, match="gamma > 1"):
        exp_lattice_concentration(gamma=1.0)
    with pytest.raises(ValueError, match="replicas"):
        exp_lattice_concentration(replicas=50)
    r = exp_lattice_concentration(Ns=(10, 20), replicas=200, seed=2)
    assert [row[0] for row in r.rows] == [10, 20]
    for row in r.rows:
        assert all(math.isfinite(v) for v in row[1:5]) and row[2] >= 0
    assert r == exp_lattice_concentration(Ns=(10, 20), replicas=200, seed=2) or \
        r.rows == exp_lattice_concentration(Ns=(10, 20), replicas=200, seed=2).rows
    assert len(r.checks) == 3


def test_survival_bound_t0_and_guard():
    r = exp_survival_bound(N=20, gammas=(2.0,), ts=(0.0, 1.0), replicas=500, seed=1)
    g, t, p, se, bound, ok = r.rows[0]
    assert (t, p, bound, ok) == (0.0, 1.0, 1.0, True)
    with pytest.raises(ValueError):
        exp_survival_bound(gammas=(1.0,), replicas=500)


def test_exponentiality_oracle_columns_seed_free():
    a = exp_complete_exponentiality(Ns=(5, 10), gamma=1.0, replicas=200, seed=1)
    b = exp_complete_exponentiality(Ns=(5, 10), gamma=1.0, replicas=200, seed=2)
    for ra, rb in zip(a.rows, b.rows):
        assert ra[3:8] == rb[3:8]
        assert ra[1] != rb[1]


def test_exponentiality_marks_infeasible_cells():
    r = exp_complete_exponentiality(Ns=(10, 50), gamma=1.0, replicas=200, seed=1)
    assert r.rows[1][-1] == "infeasible"
    assert math.isnan(r.rows[1][1])
    assert r.passed is False
    assert any("N=50" in n for n in r.notes)


def test_exponentiality_oracle_only():
    r = exp_complete_exponentiality(Ns=(10, 50, 200), gamma=2.0, replicas=0)
    assert r.passed is True
    assert all(row[-1] == "skipped" for row in r.rows)


def test_mc_oracle_small():
    r = exp_mc_oracle(Ns=(2,), gammas=(1.0,), replicas=2000, seed=4)
    assert r.passed
    assert any("1.25" in c.name for c in r.checks)


def test_gamma_scan_descriptive():
    with pytest.raises(ValueError):
        exp_gamma_scan(horizon=math.inf)
    r = exp_gamma_scan(N=20, gammas=(0.1, 2.0), replicas=100, horizon=20.0, seed=1)
    assert r.passed is None
    low, high = r.rows
    assert low[3] > 0.5 and high[3] == 0.0

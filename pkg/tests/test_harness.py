from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from walksieve.blocks import build_generator_system
from walksieve.errors import CapacityError, ParameterError, StructuralError
from walksieve.harness import (
    COLUMNS,
    ExperimentConfig,
    ResultRow,
    emit_results,
    make_start,
    parse_rows,
    resolve_b,
    rows_to_csv,
    rows_to_json,
    run_alon_roichman,
    run_sieve_experiment,
    theta_free_start,
    wilson_interval,
)
from walksieve.instances import contains_target, detect, make_coloring_instance
from walksieve.walk import WalkConfig, exact_survival_probability, simulate


# Wilson intervals ---------------------------------------------------------------------


@pytest.mark.parametrize("x,n", [(0, 10), (3, 10), (10, 10), (517, 1000), (1, 100000)])
def test_wilson_matches_scipy(x, n):
    ref = stats.binomtest(x, n).proportion_ci(confidence_level=0.99, method="wilson")
    lo, hi = wilson_interval(x, n, 0.99)
    assert lo == pytest.approx(ref.low, abs=1e-12) and hi == pytest.approx(ref.high, abs=1e-12)


def test_wilson_empty():
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_wilson_coverage_calibration(two_block_gens):
    """The 99% interval covers the exact survival value in nearly every run."""
    k, runs, trials = 5, 300, 400
    cfg = WalkConfig(two_block_gens, seed=0)
    exact = exact_survival_probability(cfg, [1, 2], k)
    res = simulate(cfg, [k], runs * trials, labels=[1, 2])
    hits = res.survived()[:, 0].reshape(runs, trials).sum(axis=1)
    covered = sum(lo <= exact <= hi for lo, hi in (wilson_interval(int(h), trials) for h in hits))
    assert covered / runs >= 0.97


# Alon-Roichman ------------------------------------------------------------------------


def test_alon_roichman_cube():
    rep = run_alon_roichman("3^3", b=2, delta=0.5, trials=2000, seed=1)
    assert rep.kappa == 46
    assert rep.rate <= math.exp(-2)
    assert rep.p_value > 0.99 and rep.consistent
    assert rep.to_dict()["rate"] == rep.rate


def test_alon_roichman_trivial_group():
    rep = run_alon_roichman([1], b=1, delta=0.5, trials=50)
    assert rep.failures == 0


def test_alon_roichman_single_generator_fails():
    rep = run_alon_roichman("3,3,3", b=2, delta=0.5, trials=200, kappa_override=1)
    assert rep.rate == 1.0 and not rep.consistent


def test_alon_roichman_determinism_and_workers():
    a = run_alon_roichman("2^4", b=1, delta=0.5, trials=100, seed=3, kappa_override=5)
    b = run_alon_roichman("2^4", b=1, delta=0.5, trials=100, seed=3, kappa_override=5, workers=4)
    assert a == b and 0 < a.failures < 100


def test_alon_roichman_cap():
    with pytest.raises(CapacityError):
        run_alon_roichman("2^10", b=1, delta=0.5, trials=1, cap=512)


# configuration ------------------------------------------------------------------------


def test_config_roundtrip_and_validation():
    cfg = ExperimentConfig(ks=[5, 0, 1], trials=10)
    assert cfg.ks == [0, 1, 5]
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"trails": 10})
    with pytest.raises(ParameterError):
        ExperimentConfig(eta_mode="optimistic")
    with pytest.raises(ParameterError):
        ExperimentConfig(format="xml")


def test_resolve_b(coloring3):
    assert resolve_b("index", coloring3) == (1.0, 2.0, 3.0)
    assert resolve_b(2, coloring3) == (2.0, 2.0, 2.0)
    assert resolve_b([1, 1, 4], coloring3) == (1.0, 1.0, 4.0)
    with pytest.raises(ParameterError):
        resolve_b([1], coloring3)


def test_starts(coloring3):
    free = theta_free_start(coloring3)
    assert not any(detect(free, coloring3, l) for l in coloring3.labels)
    assert make_start(coloring3, "zero", 0) == coloring3.zero()
    assert make_start(coloring3, "random", 5) == make_start(coloring3, "random", 5)
    assert make_start(coloring3, free.serialize(), 0) == free


def test_theta_free_start_on_large_block():
    bs = make_coloring_instance(3, 3, partition=[[1, 2, 3, 4, 5], [6, 7, 8], [9, 10, 11]])
    assert not detect(theta_free_start(bs), bs, 1)


def test_theta_free_impossible():
    # R(3,3) = 6: every 2-coloring of K_6 has a monochromatic triangle
    with pytest.warns(UserWarning):
        bs = make_coloring_instance(3, 2, partition=[[1, 2, 3, 4, 5, 6], [7, 8, 9], [10, 11, 12]])
    with pytest.raises(StructuralError):
        theta_free_start(bs)


# experiments ------------------------------------------------------------------------------


def small_config(**kw) -> ExperimentConfig:
    base = dict(instance={"kind": "coloring", "R": 3, "c": 3}, ks=[0, 1, 5, 25], trials=4000, seed=2)
    base.update(kw)
    return ExperimentConfig(**base)


def test_zero_start_has_zero_survival():
    res = run_sieve_experiment(small_config())
    first = res.rows[0]
    assert first.k == 0 and first.freq == 0.0 and first.exact == 0.0
    assert res.oracle_available


def test_experiment_matches_oracle():
    cfg = ExperimentConfig(
        instance={"kind": "coloring", "R": 2, "c": 3, "strict": False, "t": 7},
        ks=[1, 5, 25], trials=100_000, seed=4,
    )
    for row in run_sieve_experiment(cfg).rows:
        assert row.ci_lo <= row.exact <= row.ci_hi
        assert 0 <= row.freq <= 1


def test_experiment_deterministic_across_workers():
    a = run_sieve_experiment(small_config(trials=20_000))
    b = run_sieve_experiment(small_config(trials=20_000, workers=4))
    assert rows_to_csv(a.rows) == rows_to_csv(b.rows)


def test_instance_event_contained_in_block_event():
    res = run_sieve_experiment(small_config(trials=5000, start="random"))
    for row in res.rows:
        sigma = math.sqrt(max(row.freq * (1 - row.freq), 1e-12) / row.trials)
        assert row.instance_freq <= row.freq + 3 * sigma


def test_instance_event_is_pointwise_contained(gens3):
    cfg = WalkConfig(gens3, seed=9)
    res = simulate(cfg, [3, 12], 3000, include_instance=True, record_states=True)
    assert not (res.instance_clean() & ~res.survived()).any()
    bs = gens3.block_system
    from walksieve.labeling import Labeling

    for row in range(0, 3000, 97):
        f = Labeling.from_array(bs.ground, 3, res.states[row, 1])
        assert res.instance_clean()[row, 1] == (not contains_target(f, bs))


def test_monotone_trend_from_theta_free_start():
    res = run_sieve_experiment(small_config(start="theta-free", ks=[0, 1, 2, 4, 8, 16, 32, 64], trials=20_000))
    freqs = [r.freq for r in res.rows]
    assert freqs[0] == 1.0
    for a, b in zip(res.rows, res.rows[1:]):
        sigma = math.sqrt((a.freq * (1 - a.freq) + b.freq * (1 - b.freq)) / a.trials)
        assert b.freq <= a.freq + 3 * sigma
    # and it settles at the exact stationary value (8/9)^3
    assert res.rows[-1].exact == pytest.approx((8 / 9) ** 3, abs=1e-6)


def test_bounds_reported():
    res = run_sieve_experiment(small_config(trials=100))
    for row in res.rows:
        assert row.bound_proof is not None and row.vacuous == (row.bound_proof >= 1)
        assert row.window_ok
    assert set(res.eta) == {"proof-faithful", "as-stated"}


# emission ------------------------------------------------------------------------------


def sample_rows():
    return [
        ResultRow(0, 10, 0.0, 0.0, 0.41, 0.0, 9.5, 1.25, True, True, 0.0),
        ResultRow(7, 10, 0.3, 0.07, 0.7, None, None, 0.1, False, False, 0.1),
    ]


def test_header_only_for_empty_rows(tmp_path):
    path = emit_results([], "csv", tmp_path / "empty.csv")
    assert path.read_text() == ",".join(COLUMNS) + "\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_roundtrip(tmp_path, fmt):
    rows = sample_rows()
    path = emit_results(rows, fmt, tmp_path / f"r.{fmt}")
    assert parse_rows(path.read_text(), fmt) == rows


def test_csv_and_json_agree():
    rows = sample_rows()
    assert parse_rows(rows_to_csv(rows), "csv") == parse_rows(rows_to_json(rows), "json")


def test_identical_payloads():
    a = run_sieve_experiment(small_config(trials=500))
    b = run_sieve_experiment(small_config(trials=500))
    assert rows_to_csv(a.rows) == rows_to_csv(b.rows)
    assert rows_to_json(a.rows) == rows_to_json(b.rows)


def test_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("WALKSIEVE_OUT", str(tmp_path / "outdir"))
    path = emit_results(sample_rows(), "json")
    assert path == tmp_path / "outdir" / "results.json"


def test_parse_errors():
    with pytest.raises(StructuralError):
        parse_rows("a,b\n", "csv")
    with pytest.raises(ParameterError):
        parse_rows("", "xml")
    with pytest.raises(ParameterError):
        emit_results([], "xml")

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from walksieve.blocks import GeneratorSystem, custom_block_system
from walksieve.errors import CapacityError, ParameterError, StructuralError
from walksieve.instances import detect_mono_triangle
from walksieve.labeling import Labeling
from walksieve.spectral import Character
from walksieve.walk import (
    WalkConfig,
    character_transform,
    decay_check,
    exact_block_distribution,
    exact_moment,
    exact_survival_probability,
    final_states,
    projected_step_weights,
    simulate,
    step_transform_table,
    target_mask,
    walk,
)


def hand_system(bs, elements, probs=None) -> GeneratorSystem:
    """A generator system over explicit step elements (first must be the identity)."""
    n = len(elements)
    probs = np.full(n, 1 / n) if probs is None else np.asarray(probs, dtype=float)
    return GeneratorSystem(
        block_system=bs, delta=0.5, b=(1.0,) * bs.R, kappa=(0,) * bs.R,
        samples=((),) * bs.R, block_sets=((),) * bs.R, elements=tuple(elements),
        probs=probs, C0=1.0,
    )


def lab(bs, values):
    return Labeling.from_array(bs.ground, bs.modulus, values)


@pytest.fixture(scope="module")
def klein():
    bs = custom_block_system(range(2), 2, [[0, 1]])
    return bs, hand_system(bs, [lab(bs, v) for v in ([0, 0], [1, 0], [0, 1], [1, 1])])


# walk ------------------------------------------------------------------------------


def test_k_zero_returns_start(gens3):
    bs = gens3.block_system
    start = Labeling(bs.ground, 3, {0: 1, 1: 2, 7: 1, 20: 2})
    assert walk(WalkConfig(gens3, start=start, seed=3), 0) == start


def test_identity_only_walk_stays_put():
    bs = custom_block_system(range(3), 3, [[0, 1, 2]])
    gs = hand_system(bs, [bs.zero()])
    start = lab(bs, [2, 1, 0])
    cfg = WalkConfig(gs, start=start)
    assert all(walk(cfg, k, trial=t) == start for k in (1, 10, 100) for t in range(3))


def test_walk_is_deterministic(gens3):
    cfg = WalkConfig(gens3, seed=42)
    assert walk(cfg, 50, trial=7) == walk(cfg, 50, trial=7)
    assert walk(cfg, 50, trial=7) != walk(cfg, 50, trial=8)
    states = final_states(cfg, 50, 10)
    assert np.array_equal(states[7], walk(cfg, 50, trial=7).to_array())


def test_walk_matches_manual_accumulation(gens3):
    # X_k = X_{k-1} + xi_k: later checkpoints differ from earlier ones by elements of S sums
    cfg = WalkConfig(gens3, seed=5)
    res = simulate(cfg, [0, 1], 2000, labels=(), record_states=True)
    elems = {tuple(s.to_array()) for s in gens3.elements}
    assert all(tuple(r) in elems for r in res.states[:, 1, :])
    assert not res.states[:, 0, :].any()


def test_klein_group_uniform_at_three_steps(klein):
    bs, gs = klein
    states = final_states(WalkConfig(gs, seed=11), 3, 100_000)
    counts = np.bincount(states[:, 0] * 2 + states[:, 1], minlength=4)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_config_validation(gens3, klein):
    with pytest.raises(StructuralError):
        WalkConfig(gens3, start=klein[0].zero())
    with pytest.raises(ParameterError):
        WalkConfig(gens3, horizon=-1)
    with pytest.raises(ParameterError):
        walk(WalkConfig(gens3), -1)
    with pytest.raises(ParameterError):
        simulate(WalkConfig(gens3), [5, 1], 10)


# characters ----------------------------------------------------------------------------


def test_character_transform_examples(klein):
    bs = custom_block_system(range(1), 3, [[0]])
    gs = hand_system(bs, [lab(bs, [r]) for r in range(3)])
    assert character_transform(gs, Character(3, {0: 0})) == pytest.approx(1)
    assert abs(character_transform(gs, Character(3, {0: 1}))) < 1e-12
    _, kgs = klein
    assert abs(character_transform(kgs, Character(2, {0: 1, 1: 1}))) < 1e-12


def test_character_transform_is_real_and_bounded(gens3):
    rng = np.random.default_rng(0)
    sites = gens3.block_system.ground.sites
    for _ in range(20):
        chi = Character(3, {s: int(a) for s, a in zip(sites, rng.integers(0, 3, len(sites)))})
        m = character_transform(gens3, chi)
        assert abs(m.imag) < 1e-12 and abs(m) <= 1 + 1e-12


def test_transform_table_matches_direct_sum(two_block_gens):
    bs = two_block_gens.block_system
    table = step_transform_table(two_block_gens, [1])
    sites = [bs.ground.sites[i] for i in bs.block(1).sites]
    for freq in np.ndindex(*table.shape):
        chi = Character(3, dict(zip(sites, freq)))
        # numpy's kernel is conjugate to chi; symmetric p makes it irrelevant
        assert table[freq] == pytest.approx(character_transform(two_block_gens, chi).real, abs=1e-12)


def test_exact_moment_examples_and_monte_carlo(gens3):
    bs = gens3.block_system
    b1, b2 = bs.block(1).sites, bs.block(2).sites
    start = Labeling(bs.ground, 3, {b1[0]: 1, b1[2]: 2, b2[1]: 1})
    cfg = WalkConfig(gens3, start=start, seed=8)
    chi = Character(3, {bs.ground.sites[b1[0]]: 1, bs.ground.sites[b2[1]]: 2})
    assert exact_moment(cfg, chi, 0) == pytest.approx(chi(start))
    k = 6
    states = final_states(cfg, k, 100_000)
    a = np.zeros(len(bs.ground), dtype=int)
    a[b1[0]], a[b2[1]] = 1, 2
    vals = np.exp(2j * np.pi * ((states.astype(int) @ a) % 3) / 3)
    exact = exact_moment(cfg, chi, k)
    tol = 4 / math.sqrt(100_000)
    assert abs(vals.mean().real - exact.real) <= tol
    assert abs(vals.mean().imag - exact.imag) <= tol


# distributions ---------------------------------------------------------------------------


def test_distribution_point_mass_at_zero_steps(two_block_gens):
    bs = two_block_gens.block_system
    b1, b2 = bs.block(1).sites, bs.block(2).sites
    start = Labeling(bs.ground, 3, {b1[0]: 1, b1[1]: 2, b2[1]: 2, b2[2]: 1})
    dist = exact_block_distribution(WalkConfig(two_block_gens, start=start), [2, 1], 0)
    # axes: block 2's sites, then block 1's
    s = start.to_array()
    expected = tuple(int(s[i]) for i in bs.block(2).sites + bs.block(1).sites)
    assert dist[expected] == pytest.approx(1.0) and dist.sum() == pytest.approx(1.0)


def test_z2_uniform_after_one_step():
    bs = custom_block_system(range(1), 2, [[0]])
    gs = hand_system(bs, [bs.zero(), lab(bs, [1])])
    for k in (1, 2, 7):
        assert np.allclose(exact_block_distribution(WalkConfig(gs), [1], k), [0.5, 0.5])


def test_distribution_properties_and_tv(gens3):
    cfg = WalkConfig(gens3, seed=21)
    bs = gens3.block_system
    for k in (1, 4, 15):
        dist = exact_block_distribution(cfg, [1, 3], k)
        assert dist.min() >= -1e-10 and abs(dist.sum() - 1) <= 1e-10
    k, trials = 4, 100_000
    dist = exact_block_distribution(cfg, [1, 3], k)
    cols = list(bs.block(1).sites) + list(bs.block(3).sites)
    states = final_states(cfg, k, trials)[:, cols].astype(int)
    flat = np.ravel_multi_index(states.T, dist.shape)
    emp = np.bincount(flat, minlength=dist.size) / trials
    tv = 0.5 * np.abs(emp - dist.ravel()).sum()
    assert tv <= 3 * math.sqrt(dist.size / trials)


def test_distribution_converges_to_uniform(two_block_gens):
    dist = exact_block_distribution(WalkConfig(two_block_gens), [1, 2], 400)
    assert np.allclose(dist, 1 / dist.size, atol=1e-9)


def test_projected_weights_sum_to_one(gens3):
    w, coords = projected_step_weights(gens3, [2])
    assert w.shape == (3, 3, 3) and w.sum() == pytest.approx(1.0)
    assert coords == list(gens3.block_system.block(2).sites)
    with pytest.raises(CapacityError):
        projected_step_weights(gens3, [1, 2, 3], cap=1000)


# survival --------------------------------------------------------------------------


def test_survival_zero_at_start(gens3):
    assert exact_survival_probability(WalkConfig(gens3), [1, 2, 3], 0) == 0.0


def test_survival_with_empty_targets(gens3):
    empty = {l: np.zeros((3, 3, 3), dtype=bool) for l in (1, 2)}
    assert exact_survival_probability(WalkConfig(gens3), [1, 2], [0, 3, 30], targets=empty) == pytest.approx([1, 1, 1])


def test_mask_from_patterns_matches_detector(coloring3):
    for l in coloring3.labels:
        assert np.array_equal(target_mask(coloring3, l), target_mask(coloring3, l, lambda f, m: detect_mono_triangle(f, coloring3, m)))
        assert target_mask(coloring3, l).sum() == 3


def test_survival_matches_monte_carlo(two_block_gens):
    from walksieve.harness import wilson_interval

    cfg = WalkConfig(two_block_gens, seed=13)
    ks = [1, 5, 25]
    exact = exact_survival_probability(cfg, [1, 2], ks)
    res = simulate(cfg, ks, 20_000, labels=[1, 2])
    for j, p in enumerate(exact):
        lo, hi = wilson_interval(int(res.survived()[:, j].sum()), res.trials, 0.99)
        assert lo <= p <= hi


def test_survival_brute_force_small():
    # one block of two sites, c = 2, target: both sites equal; enumerate every walk path
    bs = custom_block_system(range(2), 2, [[0, 1]], patterns=[[[0, 1]]])
    elems = [bs.zero(), lab(bs, [1, 0]), lab(bs, [1, 1])]
    probs = [0.5, 0.25, 0.25]
    gs = hand_system(bs, elems, probs)
    start = lab(bs, [1, 0])
    from itertools import product

    for k in range(5):
        total = 0.0
        for path in product(range(3), repeat=k):
            x = start
            p = 1.0
            for j in path:
                x = x + elems[j]
                p *= probs[j]
            total += p * (x[0] != x[1])
        assert exact_survival_probability(WalkConfig(gs, start=start), [1], k) == pytest.approx(total, abs=1e-12)


# decay -------------------------------------------------------------------------------


def test_decay_bound_holds(two_block_gens, gens3):
    for gs in (two_block_gens, gens3):
        rep = decay_check(gs)
        assert rep.ok, rep.violations
        assert rep.max_abs <= rep.threshold < 1
        assert rep.characters == 3 * 26 + 3 * 728 if gs is gens3 else rep.characters == 2 * 26 + 728

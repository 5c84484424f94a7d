from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from walksieve import rng

U64 = st.integers(0, (1 << 64) - 1)


def test_splitmix64_reference_output():
    # first output of the reference SplitMix64 generator seeded with 0
    assert rng.draw(0, 0) == 0xE220A8397B1DCDAF
    assert rng.draw(0, 1) == 0x6E789E6AA1B965F4


@given(key=U64, counter=st.integers(0, 1 << 40))
def test_scalar_and_vector_draws_agree(key, counter):
    u = rng.uniform_array(np.uint64(key), np.uint64(counter))
    assert float(u) == rng.uniform(key, counter)
    assert 0.0 <= float(u) < 1.0


@given(seed=U64, streams=st.lists(st.integers(0, 1 << 50), min_size=1, max_size=20))
def test_stream_keys_vectorized(seed, streams):
    keys = rng.stream_keys(seed, np.asarray(streams, dtype=np.uint64))
    assert [int(k) for k in keys] == [rng.stream_key(seed, s) for s in streams]


def test_streams_differ_by_tag():
    ids = {rng.stream_id(tag, 7) for tag in (rng.TAG_WALK, rng.TAG_AR, rng.TAG_GENERATORS, rng.TAG_START)}
    assert len(ids) == 4


def test_residues_in_range_and_roughly_uniform():
    r = rng.residues(3, 11, 90000, 3)
    assert r.min() == 0 and r.max() == 2
    counts = np.bincount(r, minlength=3)
    assert np.abs(counts - 30000).max() < 5 * np.sqrt(90000 * (1 / 3) * (2 / 3))


def test_choice_indices_is_right_searchsorted():
    cdf = np.array([0.25, 0.5, 1.0])
    u = np.array([0.0, 0.2499, 0.25, 0.7, 0.999999])
    assert rng.choice_indices(cdf, u).tolist() == [0, 0, 1, 2, 2]

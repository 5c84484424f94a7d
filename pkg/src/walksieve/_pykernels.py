"""Pure numpy implementations of the compiled kernels.

Trials are advanced together as rows of a state matrix; every random draw
goes through :mod:`walksieve.rng`, so the output equals the compiled
kernel's output exactly.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .rng import choice_indices, uniform_array

_CHUNK = 4096


def _pattern_hits(states: np.ndarray, pat_sites: np.ndarray, mode: int) -> np.ndarray:
    """(trials, patterns) boolean matrix of pattern hits."""
    if len(pat_sites) == 0:
        return np.zeros((len(states), 0), dtype=bool)
    valid = pat_sites >= 0
    cols = np.where(valid, pat_sites, pat_sites[:, :1])
    vals = states[:, cols]  # (trials, P, m)
    if mode == 2:
        return (vals != 0).all(axis=2)
    hit = (vals == vals[:, :, :1]).all(axis=2)
    if mode == 1:
        hit &= vals[:, :, 0] != 0
    return hit


def simulate_walks(
    start,
    indptr,
    idx,
    val,
    cdf,
    modulus,
    keys,
    checkpoints,
    pat_sites,
    pat_group,
    ngroups,
    mode,
    record_states,
):
    start = np.asarray(start, dtype=np.uint8)
    keys = np.asarray(keys, dtype=np.uint64)
    cdf = np.asarray(cdf, dtype=np.float64)
    n = len(start)
    nsteps = len(indptr) - 1
    lengths = np.diff(indptr)
    width = int(lengths.max()) if nsteps else 0
    # padded step table; column n is a scratch slot for padding
    pad_idx = np.full((nsteps, max(width, 1)), n, dtype=np.int64)
    pad_val = np.zeros((nsteps, max(width, 1)), dtype=np.int16)
    for j in range(nsteps):
        a, b = indptr[j], indptr[j + 1]
        pad_idx[j, : b - a] = idx[a:b]
        pad_val[j, : b - a] = val[a:b]
    ntr, ncp = len(keys), len(checkpoints)
    hits = np.zeros((ntr, ncp, max(ngroups, 0)), dtype=np.uint8)
    states_out = np.zeros((ntr if record_states else 0, ncp, n), dtype=np.uint8)
    pat_sites = np.asarray(pat_sites, dtype=np.int64)
    pat_group = np.asarray(pat_group, dtype=np.int64)
    for lo in range(0, ntr, _CHUNK):
        hi = min(ntr, lo + _CHUNK)
        kk = keys[lo:hi]
        st = np.zeros((hi - lo, n + 1), dtype=np.int16)
        st[:, :n] = start
        rows = np.arange(hi - lo)[:, None]
        step = 0
        for c, target in enumerate(checkpoints):
            while step < target:
                u = uniform_array(kk, np.uint64(step))
                j = choice_indices(cdf, u)
                cols = pad_idx[j]
                st[rows, cols] = (st[rows, cols] + pad_val[j]) % modulus
                step += 1
            view = st[:, :n].astype(np.uint8)
            ph = _pattern_hits(view, pat_sites, mode)
            for g in range(ngroups):
                sel = pat_group == g
                if sel.any():
                    hits[lo:hi, c, g] = ph[:, sel].any(axis=1)
            if record_states:
                states_out[lo:hi, c] = view
    return hits, (states_out if record_states else None)


def min_edge_ratio(adj):
    adj = np.asarray(adj, dtype=np.int64)
    n = len(adj)
    masks = np.arange(1, 1 << n, dtype=np.int64)
    size = np.zeros(len(masks), dtype=np.int64)
    boundary = np.zeros(len(masks), dtype=np.int64)
    for v in range(n):
        inside = (masks >> v) & 1
        size += inside
        for u in range(v + 1, n):
            if (adj[v] >> u) & 1:
                boundary += inside ^ ((masks >> u) & 1)
    ok = size <= n // 2
    b, s = boundary[ok], size[ok]
    ratio = b / s
    best = ratio.min()
    cand = np.flatnonzero(np.abs(ratio - best) < 1e-9)
    exact = min(Fraction(int(b[k]), int(s[k])) for k in cand)
    return exact.numerator, exact.denominator

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics match ``_pykernels`` bit for bit."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint32_t, uint64_t, int32_t, int64_t
from libc.string cimport memcpy

cnp.import_array()


cdef extern from *:
    int __builtin_popcount(unsigned int) nogil
    int __builtin_ctzll(unsigned long long) nogil

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline double uniform(uint64_t key, uint64_t counter) noexcept nogil:
    return <double>(mix64(key + (counter + 1) * GAMMA) >> 11) * INV_2_53


cdef inline Py_ssize_t pick(const double* cdf, Py_ssize_t n, const Py_ssize_t* guide,
                            Py_ssize_t nguide, double u) noexcept nogil:
    # first index with cdf > u (searchsorted 'right'), clipped to n - 1;
    # every index below guide[bucket] has cdf <= bucket / nguide <= u
    cdef Py_ssize_t j = guide[<Py_ssize_t>(u * nguide)]
    while j < n - 1 and cdf[j] <= u:
        j += 1
    return j


cdef inline bint pattern_hit(const uint8_t* state, const int32_t* row, Py_ssize_t m,
                             int mode) noexcept nogil:
    cdef Py_ssize_t j
    cdef int32_t s
    cdef uint8_t first = state[row[0]]
    if mode == 2:
        for j in range(m):
            s = row[j]
            if s < 0:
                break
            if state[s] == 0:
                return False
        return True
    if mode == 1 and first == 0:
        return False
    for j in range(1, m):
        s = row[j]
        if s < 0:
            break
        if state[s] != first:
            return False
    return True


def simulate_walks(
    const uint8_t[::1] start,
    const int64_t[::1] indptr,
    const int32_t[::1] idx,
    const uint8_t[::1] val,
    const double[::1] cdf,
    int modulus,
    const uint64_t[::1] keys,
    const int64_t[::1] checkpoints,
    const int32_t[:, ::1] pat_sites,
    const int32_t[::1] pat_group,
    int ngroups,
    int mode,
    bint record_states,
):
    cdef Py_ssize_t ntr = keys.shape[0], ncp = checkpoints.shape[0], n = start.shape[0]
    cdef Py_ssize_t npat = pat_group.shape[0], m = pat_sites.shape[1]
    cdef Py_ssize_t ncdf = cdf.shape[0], nguide = 1, g
    cdef Py_ssize_t t, c, p, j, e
    cdef int64_t step, target
    cdef uint64_t key
    cdef int v
    # bucket guide for the inverse-CDF search; a power-of-two bucket count
    # keeps u * nguide and cdf * nguide exact
    while nguide < 4 * ncdf:
        nguide <<= 1
    guide_buf = np.zeros(nguide + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] guide = guide_buf
    j = 0
    for g in range(nguide + 1):
        while j < ncdf - 1 and cdf[j] * nguide <= g:
            j += 1
        guide[g] = j
    hits_arr = np.zeros((ntr, ncp, max(ngroups, 0)), dtype=np.uint8)
    states_arr = np.zeros((ntr if record_states else 0, ncp, n), dtype=np.uint8)
    cdef uint8_t[:, :, ::1] hits = hits_arr
    cdef uint8_t[:, :, ::1] states = states_arr
    state_buf = np.empty(n, dtype=np.uint8)
    cdef uint8_t[::1] state = state_buf
    with nogil:
        for t in range(ntr):
            key = keys[t]
            if n:
                memcpy(&state[0], &start[0], n)
            step = 0
            for c in range(ncp):
                target = checkpoints[c]
                while step < target:
                    j = pick(&cdf[0], ncdf, &guide[0], nguide, uniform(key, <uint64_t>step))
                    for e in range(indptr[j], indptr[j + 1]):
                        v = state[idx[e]] + val[e]
                        if v >= modulus:
                            v -= modulus
                        state[idx[e]] = <uint8_t>v
                    step += 1
                for p in range(npat):
                    if hits[t, c, pat_group[p]] == 0 and pattern_hit(&state[0], &pat_sites[p, 0], m, mode):
                        hits[t, c, pat_group[p]] = 1
                if record_states and n:
                    memcpy(&states[t, c, 0], &state[0], n)
    return hits_arr, (states_arr if record_states else None)


def min_edge_ratio(const uint32_t[::1] adj):
    """Exact min |boundary(A)|/|A| over 1 <= |A| <= n/2, by Gray-code sweep."""
    cdef int n = adj.shape[0]
    cdef uint64_t total = (<uint64_t>1) << n
    cdef uint64_t i, gray, prev = 0
    cdef uint32_t A = 0
    cdef int v, size = 0, half = n // 2
    cdef long boundary = 0, best_num = -1, best_den = 1
    cdef int deg[32]
    for v in range(n):
        deg[v] = __builtin_popcount(adj[v])
    with nogil:
        for i in range(1, total):
            gray = i ^ (i >> 1)
            v = __builtin_ctzll(gray ^ prev)
            prev = gray
            if A & ((<uint32_t>1) << v):
                A &= ~((<uint32_t>1) << v)
                boundary -= deg[v] - 2 * __builtin_popcount(adj[v] & A)
                size -= 1
            else:
                boundary += deg[v] - 2 * __builtin_popcount(adj[v] & A)
                A |= ((<uint32_t>1) << v)
                size += 1
            if size <= half and size > 0:
                if best_num < 0 or boundary * best_den < best_num * size:
                    best_num = boundary
                    best_den = size
    return best_num, best_den

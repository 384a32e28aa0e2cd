# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

cnp.import_array()

BACKEND = "cython"

cdef enum:
    TARGET_AREA = 0
    TARGET_MINSIDE = 1

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


cdef inline int popcount64(uint64_t x) nogil:
    return __builtin_popcountll(x)


def signed_subset_scan(W):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t k = w.shape[0], m = w.shape[1]
    if k > 30:
        raise ValueError("too many rows for subset enumeration")
    cdef double tol = 1e-12 * max(float(np.abs(w).sum()), 1e-300)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cs = np.zeros(m, dtype=np.float64)
    cdef double best_p = 0.0, best_n = 0.0, vp, vn, c
    cdef uint64_t n_masks = (<uint64_t>1) << k
    cdef uint64_t g, prev, mask, flip, best_mask_p = 0, best_mask_n = 0
    cdef int bit, sgn, found_p = 0, found_n = 0
    cdef Py_ssize_t j
    cdef int pass_no
    # pass 0: maximum values; pass 1: smallest mask within tol of the maximum
    for pass_no in range(2):
        for j in range(m):
            cs[j] = 0.0
        if pass_no == 1:
            if best_p <= tol:
                found_p = 1
            if best_n <= tol:
                found_n = 1
        prev = 0
        for g in range(1, n_masks):
            mask = g ^ (g >> 1)
            flip = mask ^ prev
            bit = __builtin_ctzll(flip)
            prev = mask
            if mask & flip:
                for j in range(m):
                    cs[j] += w[bit, j]
            else:
                for j in range(m):
                    cs[j] -= w[bit, j]
            vp = 0.0
            vn = 0.0
            for j in range(m):
                c = cs[j]
                if c > 0:
                    vp += c
                else:
                    vn -= c
            if pass_no == 0:
                if vp > best_p:
                    best_p = vp
                if vn > best_n:
                    best_n = vn
            else:
                if vp >= best_p - tol and (not found_p or mask < best_mask_p):
                    best_mask_p = mask
                    found_p = 1
                if vn >= best_n - tol and (not found_n or mask < best_mask_n):
                    best_mask_n = mask
                    found_n = 1
    return int(best_mask_p), best_p, int(best_mask_n), best_n


cdef inline int bs_count(const uint64_t* a, int nw) nogil:
    cdef int c = 0, t
    for t in range(nw):
        c += popcount64(a[t])
    return c

cdef inline void bs_and(uint64_t* out, const uint64_t* a, const uint64_t* b, int nw) nogil:
    cdef int t
    for t in range(nw):
        out[t] = a[t] & b[t]

cdef inline int bs_and_count(const uint64_t* a, const uint64_t* b, int nw) nogil:
    cdef int c = 0, t
    for t in range(nw):
        c += popcount64(a[t] & b[t])
    return c

cdef inline bint bs_contains(const uint64_t* sup, const uint64_t* sub, int nw) nogil:
    cdef int t
    for t in range(nw):
        if (sup[t] & sub[t]) != sub[t]:
            return False
    return True

cdef inline long long value_of(int target, long long a, long long b) nogil:
    if target == TARGET_AREA:
        return a * b
    return a if a < b else b


cdef object _to_words(rowbits, int ncols, int *nw_out):
    cdef int nw = (ncols + 63) // 64
    if nw == 0:
        nw = 1
    k = len(rowbits)
    arr = np.zeros((max(k, 1), nw), dtype=np.uint64)
    mask64 = (1 << 64) - 1
    for i, b in enumerate(rowbits):
        b = int(b)
        for t in range(nw):
            arr[i, t] = (b >> (64 * t)) & mask64
    nw_out[0] = nw
    return arr

cdef object _from_words(const uint64_t* a, int nw):
    v = 0
    for t in range(nw):
        v |= int(a[t]) << (64 * t)
    return v


cdef struct DfsState:
    int k
    int nw
    int target
    const uint64_t* rows
    uint64_t* stack      # (k + 1) * nw column sets
    long long best
    uint64_t best_amask
    uint64_t* best_cols


cdef void _dfs(DfsState* st, int i, uint64_t amask, int asize) nogil:
    cdef uint64_t* cols = st.stack + <Py_ssize_t>i * st.nw
    cdef int pc = bs_count(cols, st.nw)
    cdef long long v
    if asize > 0:
        v = value_of(st.target, asize, pc)
        if v > st.best or (v == st.best and v > 0 and amask < st.best_amask):
            st.best = v
            st.best_amask = amask
            memcpy(st.best_cols, cols, st.nw * sizeof(uint64_t))
    if i == st.k or pc == 0:
        return
    if value_of(st.target, asize + st.k - i, pc) < st.best:
        return
    bs_and(cols + st.nw, cols, st.rows + <Py_ssize_t>i * st.nw, st.nw)
    _dfs(st, i + 1, amask | ((<uint64_t>1) << i), asize + 1)
    memcpy(cols + st.nw, cols, st.nw * sizeof(uint64_t))
    _dfs(st, i + 1, amask, asize)


def max_biclique_dfs(rowbits, int ncols, int target=TARGET_AREA):
    cdef int k = len(rowbits)
    if k > 63:
        raise ValueError("too many rows for subset enumeration")
    cdef int nw
    words = _to_words(rowbits, ncols, &nw)
    cdef cnp.ndarray[cnp.uint64_t, ndim=2, mode="c"] rows = words
    cdef DfsState st
    st.k = k
    st.nw = nw
    st.target = target
    st.rows = <const uint64_t*> rows.data
    st.stack = <uint64_t*> malloc((k + 2) * nw * sizeof(uint64_t))
    st.best_cols = <uint64_t*> malloc(nw * sizeof(uint64_t))
    st.best = 0
    st.best_amask = 0
    memset(st.best_cols, 0, nw * sizeof(uint64_t))
    cdef int t
    for t in range(nw):
        st.stack[t] = 0xFFFFFFFFFFFFFFFF
    if ncols % 64:
        st.stack[nw - 1] = ((<uint64_t>1) << (ncols % 64)) - 1
    try:
        with nogil:
            _dfs(&st, 0, 0, 0)
        if st.best == 0:
            return 0, 0, 0
        return int(st.best_amask), _from_words(st.best_cols, nw), int(st.best)
    finally:
        free(st.stack)
        free(st.best_cols)


cdef struct BnbState:
    int k
    int nw       # words per column set
    int rw       # words per row set
    int target
    const uint64_t* rows
    long long best
    uint64_t* best_a
    uint64_t* best_b
    long long nodes
    long long node_limit
    bint aborted
    uint64_t* scratch   # per-depth buffers: (k + 2) * (2 * nw + rw + k)


cdef inline bint _has(const uint64_t* s, int i) nogil:
    return (s[i >> 6] >> (i & 63)) & 1


cdef void _visit(BnbState* st, const uint64_t* amask, const uint64_t* cols, int y, int depth) nogil:
    st.nodes += 1
    if st.node_limit > 0 and st.nodes > st.node_limit:
        st.aborted = True
    if st.aborted:
        return
    cdef int nw = st.nw, rw = st.rw, k = st.k
    cdef int asize = bs_count(amask, rw)
    cdef int bsize = bs_count(cols, nw)
    cdef long long v
    if asize > 0 and bsize > 0:
        v = value_of(st.target, asize, bsize)
        if v > st.best:
            st.best = v
            memcpy(st.best_a, amask, rw * sizeof(uint64_t))
            memcpy(st.best_b, cols, nw * sizeof(uint64_t))
    if bsize == 0:
        return
    cdef Py_ssize_t frame = 2 * nw + rw + k
    cdef uint64_t* ncols_ = st.scratch + depth * frame
    cdef uint64_t* amask2 = ncols_ + nw
    cdef int* cand = <int*> (amask2 + rw)
    cdef int ncand = 0, idx, i, j, t, need
    cdef bint ok
    if st.target == TARGET_MINSIDE:
        need = <int>(st.best + 1)
    else:
        need = 1
    for i in range(y, k):
        if not _has(amask, i) and bs_and_count(st.rows + <Py_ssize_t>i * nw, cols, nw) >= need:
            cand[ncand] = i
            ncand += 1
    if value_of(st.target, asize + ncand, bsize) <= st.best:
        return
    for idx in range(ncand):
        i = cand[idx]
        bs_and(ncols_, cols, st.rows + <Py_ssize_t>i * nw, nw)
        if value_of(st.target, asize + ncand - idx, bs_count(ncols_, nw)) <= st.best:
            continue
        memset(amask2, 0, rw * sizeof(uint64_t))
        for j in range(k):
            if bs_contains(st.rows + <Py_ssize_t>j * nw, ncols_, nw):
                amask2[j >> 6] |= (<uint64_t>1) << (j & 63)
        ok = True
        for j in range(i):
            if _has(amask2, j) != _has(amask, j):
                ok = False
                break
        if not ok:
            continue
        _visit(st, amask2, ncols_, i + 1, depth + 1)
        if st.aborted:
            return


def max_biclique_bnb(rowbits, int ncols, int target=TARGET_AREA,
                     long long lower_bound=0, long long node_limit=0):
    cdef int k = len(rowbits)
    cdef int nw
    words = _to_words(rowbits, ncols, &nw)
    cdef cnp.ndarray[cnp.uint64_t, ndim=2, mode="c"] rows = words
    cdef int rw = (k + 63) // 64
    if rw == 0:
        rw = 1
    cdef BnbState st
    st.k = k
    st.nw = nw
    st.rw = rw
    st.target = target
    st.rows = <const uint64_t*> rows.data
    st.best = lower_bound
    st.nodes = 0
    st.node_limit = node_limit
    st.aborted = False
    cdef Py_ssize_t frame = 2 * nw + rw + k
    st.scratch = <uint64_t*> malloc((k + 3) * frame * sizeof(uint64_t))
    st.best_a = <uint64_t*> malloc(rw * sizeof(uint64_t))
    st.best_b = <uint64_t*> malloc(nw * sizeof(uint64_t))
    cdef uint64_t* full = <uint64_t*> malloc(nw * sizeof(uint64_t))
    cdef uint64_t* a0 = <uint64_t*> malloc(rw * sizeof(uint64_t))
    cdef int t, j
    try:
        memset(st.best_a, 0, rw * sizeof(uint64_t))
        memset(st.best_b, 0, nw * sizeof(uint64_t))
        for t in range(nw):
            full[t] = 0xFFFFFFFFFFFFFFFF
        if ncols % 64:
            full[nw - 1] = ((<uint64_t>1) << (ncols % 64)) - 1
        memset(a0, 0, rw * sizeof(uint64_t))
        for j in range(k):
            if bs_contains(st.rows + <Py_ssize_t>j * nw, full, nw):
                a0[j >> 6] |= (<uint64_t>1) << (j & 63)
        with nogil:
            _visit(&st, a0, full, 0, 0)
        nodes = -1 if st.aborted else int(st.nodes)
        return _from_words(st.best_a, rw), _from_words(st.best_b, nw), int(st.best), nodes
    finally:
        free(st.scratch)
        free(st.best_a)
        free(st.best_b)
        free(full)
        free(a0)

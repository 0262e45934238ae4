# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the routines in ``_pykernels``.

Same algorithms, same operation order, so results match the pure-Python
backend exactly.  The loops run without the GIL.
"""

from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef double _tour_cost(const double[:, ::1] w, long[::1] t, Py_ssize_t n) noexcept nogil:
    cdef double total = 0.0
    cdef Py_ssize_t k
    for k in range(n):
        total += w[t[k], t[(k + 1) % n]]
    return total


def tour_cost(const double[:, ::1] w, tour):
    cdef long[::1] t = np.asarray(tour, dtype=np.int64)
    return _tour_cost(w, t, t.shape[0])


def held_karp(const double[:, ::1] w, nodes, double tol):
    cdef long[::1] nd = np.asarray(nodes, dtype=np.int64)
    cdef Py_ssize_t m = nd.shape[0] - 1
    if m <= 0:
        raise ValueError("need at least two nodes")
    if m > 24:
        raise ValueError("too many nodes for the subset DP")
    cdef long o = nd[0]
    cdef long[::1] rest = nd[1:].copy()
    cdef Py_ssize_t full = (1 << m) - 1
    cdef double* b = <double*> malloc(((1 << m) * m) * sizeof(double))
    if b == NULL:
        raise MemoryError()
    cdef long[::1] tour = np.empty(m + 1, dtype=np.int64)
    cdef Py_ssize_t s, k, l, pick
    cdef double best, c, target
    cdef long rk
    try:
        with nogil:
            for k in range(m):
                b[k] = w[rest[k], o]
            for s in range(1, 1 << m):
                for k in range(m):
                    if (s >> k) & 1:
                        b[s * m + k] = INFINITY
                        continue
                    rk = rest[k]
                    best = INFINITY
                    for l in range(m):
                        if (s >> l) & 1:
                            c = w[rk, rest[l]] + b[(s ^ (1 << l)) * m + l]
                            if c < best:
                                best = c
                    b[s * m + k] = best
            target = INFINITY
            for l in range(m):
                c = w[o, rest[l]] + b[(full ^ (1 << l)) * m + l]
                if c < target:
                    target = c
            tour[0] = o
            s = full
            rk = o
            k = 1
            while s:
                pick = m - 1
                for l in range(m):
                    if (s >> l) & 1 and w[rk, rest[l]] + b[(s ^ (1 << l)) * m + l] <= target + tol:
                        pick = l
                        break
                s = s ^ (1 << pick)
                target = b[s * m + pick]
                tour[k] = rest[pick]
                k += 1
                rk = rest[pick]
    finally:
        free(b)
    out = list(np.asarray(tour))
    return _tour_cost(w, tour, m + 1), [int(v) for v in out]


def nearest_neighbor(const double[:, ::1] w, nodes, long start):
    left = [int(v) for v in nodes if v != start]
    cdef long[::1] lv = np.asarray(left, dtype=np.int64)
    cdef Py_ssize_t nl = lv.shape[0]
    cdef long[::1] tour = np.empty(nl + 1, dtype=np.int64)
    cdef Py_ssize_t q, bi, k, cnt = nl
    cdef long cur = start
    cdef double bc, c
    with nogil:
        tour[0] = start
        for k in range(1, nl + 1):
            bi = 0
            bc = w[cur, lv[0]]
            for q in range(1, cnt):
                c = w[cur, lv[q]]
                if c < bc:
                    bc = c
                    bi = q
            cur = lv[bi]
            # keep remaining candidates in original order
            for q in range(bi, cnt - 1):
                lv[q] = lv[q + 1]
            cnt -= 1
            tour[k] = cur
    return [int(v) for v in np.asarray(tour)]


cdef void _prefix(const double[:, ::1] w, long* t, Py_ssize_t n, double* fwd, double* bwd) noexcept nogil:
    cdef Py_ssize_t k
    cdef long a, b
    fwd[0] = 0.0
    bwd[0] = 0.0
    for k in range(n):
        a = t[k]
        b = t[(k + 1) % n]
        fwd[k + 1] = fwd[k] + w[a, b]
        bwd[k + 1] = bwd[k] + w[b, a]


cdef bint _two_opt_pass(const double[:, ::1] w, long* t, Py_ssize_t n, double* fwd, double* bwd,
                        double tol) noexcept nogil:
    cdef Py_ssize_t i, j, lo, hi
    cdef long a, c, d, e, tmp
    cdef double old, new
    for i in range(n - 2):
        a = t[i]
        c = t[i + 1]
        for j in range(i + 2, n):
            d = t[j]
            e = t[(j + 1) % n]
            old = w[a, c] + w[d, e] + (fwd[j] - fwd[i + 1])
            new = w[a, d] + w[c, e] + (bwd[j] - bwd[i + 1])
            if new - old < -tol:
                lo = i + 1
                hi = j
                while lo < hi:
                    tmp = t[lo]
                    t[lo] = t[hi]
                    t[hi] = tmp
                    lo += 1
                    hi -= 1
                return True
    return False


def local_search(const double[:, ::1] w, tour, double tol, long max_passes):
    cdef long[::1] tv = np.asarray(tour, dtype=np.int64).copy()
    cdef Py_ssize_t n = tv.shape[0]
    cdef long passes = 0
    cdef long* t = &tv[0]
    cdef long[::1] bufv = np.empty(2 * n + 4, dtype=np.int64)
    cdef double[::1] fv = np.empty(n + 1)
    cdef double[::1] bv = np.empty(n + 1)
    if n == 3:
        r = [int(tv[0]), int(tv[2]), int(tv[1])]
        if tour_cost(w, r) < _tour_cost(w, tv, n) - tol:
            tv = np.asarray(r, dtype=np.int64)
        return _tour_cost(w, tv, n), [int(v) for v in np.asarray(tv)]
    with nogil:
        while n > 3 and (max_passes <= 0 or passes < max_passes):
            passes += 1
            _prefix(w, t, n, &fv[0], &bv[0])
            if _two_opt_pass(w, t, n, &fv[0], &bv[0], tol):
                continue
            if _or_opt_scan(w, t, &bufv[0], n, &fv[0], &bv[0], tol):
                continue
            break
    return _tour_cost(w, tv, n), [int(v) for v in np.asarray(tv)]


cdef bint _or_opt_scan(const double[:, ::1] w, long* t, long* buf, Py_ssize_t n, double* fwd,
                       double* bwd, double tol) noexcept nogil:
    cdef Py_ssize_t seg, s, e, p, q, k, pos, rn
    cdef long first, last, prev, nxt, c, d
    cdef double removed, inner_f, inner_b, base, add_f, add_r, add
    cdef bint rev
    for seg in range(1, 4):
        if seg > n - 3:
            break
        for s in range(1, n - seg + 1):
            e = s + seg - 1
            first = t[s]
            last = t[e]
            prev = t[s - 1]
            nxt = t[(e + 1) % n]
            removed = w[prev, first] + w[last, nxt] - w[prev, nxt]
            inner_f = fwd[e] - fwd[s]
            inner_b = bwd[e] - bwd[s]
            for p in range(n):
                if s - 1 <= p and p <= e:
                    continue
                c = t[p]
                d = t[(p + 1) % n]
                base = w[c, d]
                add_f = w[c, first] + w[last, d] - base
                add_r = w[c, last] + w[first, d] - base + (inner_b - inner_f)
                rev = add_r < add_f
                add = add_r if rev else add_f
                if add - removed < -tol:
                    # buf[0:rn] = tour without the block, buf[n:n+seg] = block
                    rn = 0
                    for k in range(n):
                        if k < s or k > e:
                            buf[rn] = t[k]
                            rn += 1
                    for k in range(seg):
                        buf[n + k] = t[s + k]
                    q = p if p < s else p - seg
                    pos = 0
                    for k in range(q + 1):
                        t[pos] = buf[k]
                        pos += 1
                    for k in range(seg):
                        if rev:
                            t[pos] = buf[n + seg - 1 - k]
                        else:
                            t[pos] = buf[n + k]
                        pos += 1
                    for k in range(q + 1, rn):
                        t[pos] = buf[k]
                        pos += 1
                    return True
    return False


def erp(const double[:, ::1] match, const unsigned char[:, ::1] same, const double[::1] gap_a,
        const double[::1] gap_b, double tol):
    cdef Py_ssize_t m = gap_a.shape[0]
    cdef Py_ssize_t n = gap_b.shape[0]
    cdef double[:, ::1] D = np.zeros((m + 1, n + 1))
    cdef Py_ssize_t i, j
    cdef double c, c2, here
    cdef long edits = 0
    with nogil:
        for i in range(1, m + 1):
            D[i, 0] = D[i - 1, 0] + gap_a[i - 1]
        for j in range(1, n + 1):
            D[0, j] = D[0, j - 1] + gap_b[j - 1]
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                c = D[i - 1, j - 1] + match[i - 1, j - 1]
                c2 = D[i - 1, j] + gap_a[i - 1]
                if c2 < c:
                    c = c2
                c2 = D[i, j - 1] + gap_b[j - 1]
                if c2 < c:
                    c = c2
                D[i, j] = c
        i = m
        j = n
        while i > 0 or j > 0:
            here = D[i, j] + tol
            if i > 0 and j > 0 and D[i - 1, j - 1] + match[i - 1, j - 1] <= here:
                if not same[i - 1, j - 1]:
                    edits += 1
                i -= 1
                j -= 1
            elif i > 0 and D[i - 1, j] + gap_a[i - 1] <= here:
                edits += 1
                i -= 1
            else:
                edits += 1
                j -= 1
    return D[m, n], int(edits)

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the generation step.

``fill_claims`` draws claims straight from a numpy bit generator with the
same C routines numpy uses, so the stream equals ``rng.random``,
``rng.standard_exponential`` or ``rng.standard_normal`` of the same length.  ``allocate`` performs weakest-first service over a
concatenation of per-sub-population claim segments in expected O(n) time
using value buckets; only the bucket straddling the budget is refined.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp
from libc.stdlib cimport malloc, free, qsort
from libc.string cimport memset
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential_fill, random_standard_normal_fill)

import numpy as np

cdef enum:
    FAM_UNIFORM = 0
    FAM_EXPONENTIAL = 1
    FAM_LOGNORMAL = 2
    FAM_POINT_MASS = 3
    FAM_FINITE = 4

# refine by sorting once a bucket holds this few claims
DEF SMALL = 48


cdef bitgen_t* _bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def fill_claims(object rng, int family, double p0, double p1, double[::1] out,
                const double[::1] atoms=None, const double[::1] cum=None):
    """Fill ``out`` with claims of the given family."""
    cdef Py_ssize_t i, n = out.shape[0], lo, hi, mid, k
    cdef double u
    cdef bitgen_t* bg
    if family == FAM_POINT_MASS:
        for i in range(n):
            out[i] = p0
        return
    bg = _bitgen(rng)
    with rng.bit_generator.lock:
      with nogil:
        if family == FAM_UNIFORM:
            for i in range(n):
                out[i] = p0 + (p1 - p0) * bg.next_double(bg.state)
        elif family == FAM_EXPONENTIAL:
            random_standard_exponential_fill(bg, n, &out[0])
            for i in range(n):
                out[i] = out[i] / p0
        elif family == FAM_LOGNORMAL:
            random_standard_normal_fill(bg, n, &out[0])
            for i in range(n):
                out[i] = exp(p0 + p1 * out[i])
        elif family == FAM_FINITE:
            k = cum.shape[0]
            for i in range(n):
                u = bg.next_double(bg.state)
                # first index with cum >= u
                lo = 0
                hi = k - 1
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if cum[mid] >= u:
                        hi = mid
                    else:
                        lo = mid + 1
                out[i] = atoms[lo]


cdef struct Item:
    double v
    long long pos
    int seg


cdef int _cmp_item(const void* a, const void* b) noexcept nogil:
    cdef const Item* x = <const Item*> a
    cdef const Item* y = <const Item*> b
    if x.v < y.v:
        return -1
    if x.v > y.v:
        return 1
    if x.pos < y.pos:
        return -1
    if x.pos > y.pos:
        return 1
    return 0


cdef struct Acc:
    double consumed
    double threshold
    int any_served


cdef inline Py_ssize_t _bucket(double v, double lo, double scale, Py_ssize_t nb) noexcept nogil:
    cdef Py_ssize_t b = <Py_ssize_t>((v - lo) * scale)
    if b < 0:
        return 0
    if b >= nb:
        return nb - 1
    return b


cdef int _serve_sorted(Item* items, Py_ssize_t n, double budget, long long* served, Acc* acc) noexcept nogil:
    cdef Py_ssize_t i
    qsort(items, n, sizeof(Item), _cmp_item)
    for i in range(n):
        if acc.consumed + items[i].v <= budget:
            acc.consumed += items[i].v
            served[items[i].seg] += 1
            acc.threshold = items[i].v
            acc.any_served = 1
        else:
            break
    return 0


cdef int _select_items(Item* items, Py_ssize_t n, double budget, long long* served, Acc* acc) noexcept nogil:
    """Weakest-first over an explicit item list (recursive refinement)."""
    cdef Py_ssize_t i, b, nb, bstar, m, nbk
    cdef double lo, hi, scale, run
    cdef Py_ssize_t* cnt
    cdef double* sm
    cdef double* mx
    cdef Item* sub
    while True:
        if n == 0:
            return 0
        if n <= SMALL:
            return _serve_sorted(items, n, budget, served, acc)
        lo = items[0].v
        hi = lo
        for i in range(n):
            if items[i].v < lo:
                lo = items[i].v
            if items[i].v > hi:
                hi = items[i].v
        if hi == lo:
            # all tied: position order already ascending
            for i in range(n):
                if acc.consumed + items[i].v <= budget:
                    acc.consumed += items[i].v
                    served[items[i].seg] += 1
                    acc.threshold = items[i].v
                    acc.any_served = 1
                else:
                    return 0
            return 0
        nb = n // 4
        if nb > 65536:
            nb = 65536
        scale = nb / (hi - lo)
        cnt = <Py_ssize_t*> malloc(nb * sizeof(Py_ssize_t))
        sm = <double*> malloc(nb * sizeof(double))
        mx = <double*> malloc(nb * sizeof(double))
        memset(cnt, 0, nb * sizeof(Py_ssize_t))
        memset(sm, 0, nb * sizeof(double))
        for i in range(nb):
            mx[i] = -1.0
        for i in range(n):
            b = _bucket(items[i].v, lo, scale, nb)
            cnt[b] += 1
            sm[b] += items[i].v
            if items[i].v > mx[b]:
                mx[b] = items[i].v
        run = acc.consumed
        bstar = nb
        for b in range(nb):
            if run + sm[b] <= budget:
                run += sm[b]
                if cnt[b] > 0:
                    acc.threshold = mx[b]
                    acc.any_served = 1
            else:
                bstar = b
                break
        acc.consumed = run
        if bstar == nb:
            for i in range(n):
                served[items[i].seg] += 1
            free(cnt); free(sm); free(mx)
            return 0
        m = cnt[bstar]
        # compact: served tallies for lower buckets, keep the straddling bucket in place
        b = 0
        for i in range(n):
            nbk = _bucket(items[i].v, lo, scale, nb)
            if nbk < bstar:
                served[items[i].seg] += 1
            elif nbk == bstar:
                items[b] = items[i]
                b += 1
        free(cnt); free(sm); free(mx)
        if m == n:
            # no progress possible by bucketing (should not happen with hi > lo)
            return _serve_sorted(items, n, budget, served, acc)
        n = m


def allocate(const double[::1] claims, const long long[::1] offsets, double budget):
    """Weakest-first service of concatenated claim segments.

    Parameters
    ----------
    claims : float64 array
        Segment ``k`` is ``claims[offsets[k]:offsets[k+1]]``, in birth order.
    offsets : int64 array of length ``s + 1``
    budget : float

    Returns
    -------
    served : int64 array of length ``s``
    threshold : float
        Largest served claim, 0 when nothing is served.
    consumed : float
        Sum of served claims.
    max_claim : float
        Largest claim submitted, 0 when there are none.
    """
    cdef Py_ssize_t s = offsets.shape[0] - 1
    cdef Py_ssize_t n = claims.shape[0]
    cdef Py_ssize_t i, b, nb, bstar, m, k, nb_i
    cdef double lo, hi, scale, run, v, total
    cdef Py_ssize_t* cnt
    cdef double* sm
    cdef double* mx
    cdef Item* items
    cdef Acc acc
    served_arr = np.zeros(s, dtype=np.int64)
    cdef long long[::1] served = served_arr
    acc.consumed = 0.0
    acc.threshold = 0.0
    acc.any_served = 0
    if n == 0 or s == 0:
        return served_arr, 0.0, 0.0, 0.0
    if offsets[s] != n:
        raise ValueError("offsets do not cover the claim array")
    with nogil:
        lo = claims[0]
        hi = lo
        total = 0.0
        for i in range(n):
            v = claims[i]
            total += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
    if total <= budget:
        for k in range(s):
            served[k] = offsets[k + 1] - offsets[k]
        return served_arr, hi, total, hi
    if n <= SMALL or hi == lo:
        items = <Item*> malloc(n * sizeof(Item))
        for k in range(s):
            for i in range(offsets[k], offsets[k + 1]):
                items[i].v = claims[i]
                items[i].pos = i
                items[i].seg = k
        with nogil:
            _select_items(items, n, budget, &served[0], &acc)
        free(items)
        return served_arr, acc.threshold, acc.consumed, hi
    nb = n // 4
    if nb > 65536:
        nb = 65536
    scale = nb / (hi - lo)
    cnt = <Py_ssize_t*> malloc(nb * sizeof(Py_ssize_t))
    sm = <double*> malloc(nb * sizeof(double))
    mx = <double*> malloc(nb * sizeof(double))
    with nogil:
        memset(cnt, 0, nb * sizeof(Py_ssize_t))
        memset(sm, 0, nb * sizeof(double))
        for i in range(nb):
            mx[i] = -1.0
        for i in range(n):
            v = claims[i]
            b = _bucket(v, lo, scale, nb)
            cnt[b] += 1
            sm[b] += v
            if v > mx[b]:
                mx[b] = v
        run = 0.0
        bstar = nb
        for b in range(nb):
            if run + sm[b] <= budget:
                run += sm[b]
                if cnt[b] > 0:
                    acc.threshold = mx[b]
                    acc.any_served = 1
            else:
                bstar = b
                break
        acc.consumed = run
    m = cnt[bstar]
    items = <Item*> malloc((m if m > 0 else 1) * sizeof(Item))
    with nogil:
        b = 0
        for k in range(s):
            for i in range(offsets[k], offsets[k + 1]):
                nb_i = _bucket(claims[i], lo, scale, nb)
                if nb_i < bstar:
                    served[k] += 1
                elif nb_i == bstar:
                    items[b].v = claims[i]
                    items[b].pos = i
                    items[b].seg = k
                    b += 1
        _select_items(items, m, budget, &served[0], &acc)
    free(items)
    free(cnt); free(sm); free(mx)
    return served_arr, acc.threshold, acc.consumed, hi

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; drop-in twins of ``coldec._pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double FIRE_TOL = 1e-12


def cif_fire(frames, weights, double threshold, bint fire_tail):
    cdef double[:, ::1] F = np.ascontiguousarray(frames, dtype=np.float64)
    cdef double[::1] W = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t T = F.shape[0], D = F.shape[1]
    cdef Py_ssize_t t, d, n = 0
    cdef double total = 0.0
    for t in range(T):
        total += W[t]
    cdef Py_ssize_t cap = <Py_ssize_t>(total / threshold) + 2 + T
    out_arr = np.zeros((cap, D), dtype=np.float64)
    integ_arr = np.zeros(cap, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] integ = integ_arr
    cdef double[::1] state = np.zeros(D, dtype=np.float64)
    cdef double tol = FIRE_TOL * threshold
    cdef double acc = 0.0, w, used
    for t in range(T):
        w = W[t]
        if w == 0.0:
            continue
        while acc + w >= threshold - tol:
            used = threshold - acc
            if w < used:
                used = w
            if used < 0.0:
                used = 0.0
            for d in range(D):
                out[n, d] = state[d] + used * F[t, d]
                state[d] = 0.0
            integ[n] = acc + used
            n += 1
            w -= used
            acc = 0.0
        acc += w
        for d in range(D):
            state[d] = state[d] + w * F[t, d]
    if fire_tail and acc > 0.0 and acc >= threshold / 2.0:
        for d in range(D):
            out[n, d] = state[d]
        integ[n] = acc
        n += 1
    return out_arr[:n].copy(), integ_arr[:n].copy()


def edit_distance(a, b):
    cdef long long[::1] A = np.ascontiguousarray(a, dtype=np.int64)
    cdef long long[::1] B = np.ascontiguousarray(b, dtype=np.int64)
    if A.shape[0] < B.shape[0]:
        A, B = B, A
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    cdef long long[::1] prev = np.arange(m + 1, dtype=np.int64)
    cdef long long[::1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef long long best, c
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            best = prev[j] + 1
            c = cur[j - 1] + 1
            if c < best:
                best = c
            c = prev[j - 1] + (A[i - 1] != B[j - 1])
            if c < best:
                best = c
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[m])


cdef inline bint _better(double va, Py_ssize_t ia, double vb, Py_ssize_t ib) nogil:
    return va > vb or (va == vb and ia < ib)


cdef void _sift_down(double[::1] v, long long[::1] heap, Py_ssize_t size,
                     Py_ssize_t pos) nogil:
    # min-heap keyed on "goodness": root is the worst kept entry
    cdef Py_ssize_t child
    cdef long long tmp
    while True:
        child = 2 * pos + 1
        if child >= size:
            return
        if child + 1 < size and _better(v[heap[child]], heap[child],
                                        v[heap[child + 1]], heap[child + 1]):
            child += 1
        if _better(v[heap[pos]], heap[pos], v[heap[child]], heap[child]):
            tmp = heap[pos]
            heap[pos] = heap[child]
            heap[child] = tmp
            pos = child
        else:
            return


def topk_desc(values, k):
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t kk = min(int(k), n)
    if kk <= 0:
        return np.zeros(0, dtype=np.int64)
    heap_arr = np.arange(kk, dtype=np.int64)
    cdef long long[::1] heap = heap_arr
    cdef Py_ssize_t i, size = kk
    cdef long long tmp
    with nogil:
        i = kk // 2
        while i > 0:
            i -= 1
            _sift_down(v, heap, kk, i)
        for i in range(kk, n):
            if _better(v[i], i, v[heap[0]], heap[0]):
                heap[0] = i
                _sift_down(v, heap, kk, 0)
        # heap-sort in place: worst entries move to the back
        while size > 1:
            size -= 1
            tmp = heap[0]
            heap[0] = heap[size]
            heap[size] = tmp
            _sift_down(v, heap, size, 0)
    return heap_arr

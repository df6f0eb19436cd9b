# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop; see ``_pykernels`` for the reference semantics."""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    BLOCK = 384
    C_EXTINCT = 0
    C_CENSORED = 1

EXTINCT = C_EXTINCT
CENSORED = C_CENSORED


def run_extinction(cnp.ndarray indptr, cnp.ndarray indices, init, double gamma,
                   double horizon, long long max_events, bitgen, trace=None):
    if trace is not None:
        raise ValueError("trace recording is only available in the Python backend")
    cdef cnp.intp_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.intp)
    cdef cnp.intp_t[::1] ix = np.ascontiguousarray(indices, dtype=np.intp)
    cdef cnp.intp_t[::1] start = np.ascontiguousarray(init, dtype=np.intp)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t k = 0, i, j, p, last, q
    cdef Py_ssize_t m = start.shape[0]
    if m == 0:
        return EXTINCT, 0.0, 0, 0

    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
    cdef Py_ssize_t *pos = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *alist = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef double buf[BLOCK]
    cdef int b = BLOCK
    cdef double unit = 1.0 + gamma
    cdef double p_spike = 1.0 / unit
    cdef double t = 0.0, t_next, u1, u2, u3
    cdef long long events = 0, spikes = 0
    cdef int status = -1
    if pos == NULL or alist == NULL:
        free(pos)
        free(alist)
        raise MemoryError()
    try:
        for i in range(n):
            pos[i] = -1
        for q in range(m):
            i = start[q]
            pos[i] = k
            alist[k] = i
            k += 1
        with bitgen.lock, nogil:
            while True:
                if events == max_events:
                    status = C_CENSORED
                    break
                if b == BLOCK:
                    for q in range(BLOCK):
                        buf[q] = rng.next_double(rng.state)
                    b = 0
                u1 = buf[b]
                u2 = buf[b + 1]
                u3 = buf[b + 2]
                b += 3
                t_next = t + (-log1p(-u1)) / (k * unit)
                if t_next > horizon:
                    t = horizon
                    status = C_CENSORED
                    break
                t = t_next
                i = alist[<Py_ssize_t>(u2 * k)]
                p = pos[i]
                k -= 1
                last = alist[k]
                alist[p] = last
                pos[last] = p
                pos[i] = -1
                if u3 < p_spike:
                    spikes += 1
                    for q in range(ip[i], ip[i + 1]):
                        j = ix[q]
                        if pos[j] < 0:
                            pos[j] = k
                            alist[k] = j
                            k += 1
                events += 1
                if k == 0:
                    status = C_EXTINCT
                    break
    finally:
        free(pos)
        free(alist)
    return status, t, events, spikes

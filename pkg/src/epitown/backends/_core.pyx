# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled contact kernel.

Mirrors backends.pure draw for draw: same location/component order, same
pair enumeration, same top-up candidate selection, same transmission pass
order.  Uniforms come straight from the simulation generator's PCG64
``next_double``, which matches NumPy's bulk ``Generator.random(n)`` output
sequence, so trajectories are bit-identical across backends.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.stdlib cimport free, malloc
from libc.string cimport memset
from numpy.random cimport bitgen_t

cnp.import_array()

NAME = "compiled"

cdef const char* CAPSULE_NAME = "BitGenerator"


cdef inline double next_u(bitgen_t* bg) noexcept:
    return bg.next_double(bg.state)


def contact_hour(
    cnp.int32_t[::1] sorted_persons,
    cnp.int64_t[::1] starts,
    cnp.int64_t[::1] ends,
    cnp.int64_t[::1] wends,
    cnp.float64_t[:, ::1] rates,
    cnp.int32_t[:, ::1] mins,
    cnp.uint8_t[::1] susceptible,
    cnp.uint8_t[::1] infectious,
    cnp.float64_t[::1] trans,
    cnp.float64_t[::1] day_surv,
    bint collect,
    rng,
):
    cdef object capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("rng does not expose a BitGenerator capsule")
    cdef bitgen_t* bg = <bitgen_t*> PyCapsule_GetPointer(capsule, CAPSULE_NAME)

    cdef Py_ssize_t n_active = starts.shape[0]
    cdef Py_ssize_t k, c, s0, s1, we, m, n_w, n_v, i, j, base
    cdef Py_ssize_t n_pairs, min_c
    cdef double rate, u

    # Worst-case contact capacity so buffers never grow mid-hour.
    cdef Py_ssize_t cap = 0
    for k in range(n_active):
        s0 = starts[k]
        s1 = ends[k]
        we = wends[k]
        n_w = we - s0
        n_v = s1 - we
        for c in range(3):
            if c == 0:
                m = n_w
                n_pairs = m * (m - 1) // 2
            elif c == 2:
                m = n_v
                n_pairs = m * (m - 1) // 2
            else:
                n_pairs = n_w * n_v
            if rates[k, c] > 0.0:
                cap += n_pairs
            min_c = mins[k, c]
            if min_c > 0:
                if c == 1:
                    cap += min_c * (n_w + n_v)
                else:
                    cap += min_c * (n_w if c == 0 else n_v)
    if cap < 16:
        cap = 16

    cdef long* ci = <long*> malloc(cap * sizeof(long))
    cdef long* cj = <long*> malloc(cap * sizeof(long))
    cdef Py_ssize_t max_occ = 0
    for k in range(n_active):
        if ends[k] - starts[k] > max_occ:
            max_occ = ends[k] - starts[k]
    cdef long* deg = <long*> malloc(max_occ * sizeof(long)) if max_occ else NULL
    cdef long* deg2 = <long*> malloc(max_occ * sizeof(long)) if max_occ else NULL
    cdef long* cand = <long*> malloc(max_occ * sizeof(long)) if max_occ else NULL
    if ci == NULL or cj == NULL or (max_occ and (deg == NULL or deg2 == NULL or cand == NULL)):
        free(ci); free(cj); free(deg); free(deg2); free(cand)
        raise MemoryError()

    cdef Py_ssize_t cnt = 0, comp_start, t, ncand, kk, s
    cdef unsigned char* adj = NULL
    cdef bint adj_built
    cdef long a, b
    cdef cnp.int32_t[::1] pav, pbv

    try:
        for k in range(n_active):
            s0 = starts[k]
            s1 = ends[k]
            we = wends[k]
            n_w = we - s0
            n_v = s1 - we
            for c in range(3):
                rate = rates[k, c]
                min_c = mins[k, c]
                comp_start = cnt

                if c == 0 or c == 2:
                    m = n_w if c == 0 else n_v
                    base = s0 if c == 0 else we
                    if m >= 2:
                        if rate >= 1.0:
                            for i in range(m - 1):
                                for j in range(i + 1, m):
                                    ci[cnt] = base + i
                                    cj[cnt] = base + j
                                    cnt += 1
                        elif rate > 0.0:
                            for i in range(m - 1):
                                for j in range(i + 1, m):
                                    u = next_u(bg)
                                    if u < rate:
                                        ci[cnt] = base + i
                                        cj[cnt] = base + j
                                        cnt += 1
                        if min_c > 0:
                            memset(deg, 0, m * sizeof(long))
                            for t in range(comp_start, cnt):
                                deg[ci[t] - base] += 1
                                deg[cj[t] - base] += 1
                            adj_built = False
                            for s in range(m):
                                if deg[s] >= min_c:
                                    continue
                                if not adj_built:
                                    adj = <unsigned char*> malloc(m * m)
                                    if adj == NULL:
                                        raise MemoryError()
                                    memset(adj, 0, m * m)
                                    for t in range(comp_start, cnt):
                                        adj[(ci[t] - base) * m + (cj[t] - base)] = 1
                                        adj[(cj[t] - base) * m + (ci[t] - base)] = 1
                                    adj_built = True
                                ncand = 0
                                for t in range(m):
                                    if t != s and not adj[s * m + t]:
                                        cand[ncand] = t
                                        ncand += 1
                                while deg[s] < min_c and ncand > 0:
                                    u = next_u(bg)
                                    kk = <Py_ssize_t> (u * ncand)
                                    t = cand[kk]
                                    ci[cnt] = base + s
                                    cj[cnt] = base + t
                                    cnt += 1
                                    adj[s * m + t] = 1
                                    adj[t * m + s] = 1
                                    deg[s] += 1
                                    deg[t] += 1
                                    cand[kk] = cand[ncand - 1]
                                    ncand -= 1
                            if adj != NULL:
                                free(adj)
                                adj = NULL
                else:
                    if n_w >= 1 and n_v >= 1:
                        if rate >= 1.0:
                            for i in range(n_w):
                                for j in range(n_v):
                                    ci[cnt] = s0 + i
                                    cj[cnt] = we + j
                                    cnt += 1
                        elif rate > 0.0:
                            for i in range(n_w):
                                for j in range(n_v):
                                    u = next_u(bg)
                                    if u < rate:
                                        ci[cnt] = s0 + i
                                        cj[cnt] = we + j
                                        cnt += 1
                        if min_c > 0:
                            memset(deg, 0, n_w * sizeof(long))
                            memset(deg2, 0, n_v * sizeof(long))
                            for t in range(comp_start, cnt):
                                deg[ci[t] - s0] += 1
                                deg2[cj[t] - we] += 1
                            adj_built = False
                            for s in range(n_w):
                                if deg[s] >= min_c:
                                    continue
                                if not adj_built:
                                    adj = <unsigned char*> malloc(n_w * n_v)
                                    if adj == NULL:
                                        raise MemoryError()
                                    memset(adj, 0, n_w * n_v)
                                    for t in range(comp_start, cnt):
                                        adj[(ci[t] - s0) * n_v + (cj[t] - we)] = 1
                                    adj_built = True
                                ncand = 0
                                for t in range(n_v):
                                    if not adj[s * n_v + t]:
                                        cand[ncand] = t
                                        ncand += 1
                                while deg[s] < min_c and ncand > 0:
                                    u = next_u(bg)
                                    kk = <Py_ssize_t> (u * ncand)
                                    t = cand[kk]
                                    ci[cnt] = s0 + s
                                    cj[cnt] = we + t
                                    cnt += 1
                                    adj[s * n_v + t] = 1
                                    deg[s] += 1
                                    deg2[t] += 1
                                    cand[kk] = cand[ncand - 1]
                                    ncand -= 1
                            for s in range(n_v):
                                if deg2[s] >= min_c:
                                    continue
                                if not adj_built:
                                    adj = <unsigned char*> malloc(n_w * n_v)
                                    if adj == NULL:
                                        raise MemoryError()
                                    memset(adj, 0, n_w * n_v)
                                    for t in range(comp_start, cnt):
                                        adj[(ci[t] - s0) * n_v + (cj[t] - we)] = 1
                                    adj_built = True
                                ncand = 0
                                for t in range(n_w):
                                    if not adj[t * n_v + s]:
                                        cand[ncand] = t
                                        ncand += 1
                                while deg2[s] < min_c and ncand > 0:
                                    u = next_u(bg)
                                    kk = <Py_ssize_t> (u * ncand)
                                    t = cand[kk]
                                    ci[cnt] = s0 + t
                                    cj[cnt] = we + s
                                    cnt += 1
                                    adj[t * n_v + s] = 1
                                    deg[t] += 1
                                    deg2[s] += 1
                                    cand[kk] = cand[ncand - 1]
                                    ncand -= 1
                            if adj != NULL:
                                free(adj)
                                adj = NULL

                # Transmission: infect first elements, then second elements,
                # once the component's contact list is final.
                for t in range(comp_start, cnt):
                    a = sorted_persons[ci[t]]
                    b = sorted_persons[cj[t]]
                    if susceptible[a] and infectious[b]:
                        day_surv[a] = day_surv[a] * (1.0 - trans[b])
                for t in range(comp_start, cnt):
                    a = sorted_persons[ci[t]]
                    b = sorted_persons[cj[t]]
                    if susceptible[b] and infectious[a]:
                        day_surv[b] = day_surv[b] * (1.0 - trans[a])

        if collect:
            pa = np.empty(cnt, dtype=np.int32)
            pb = np.empty(cnt, dtype=np.int32)
            pav = pa
            pbv = pb
            for t in range(cnt):
                pav[t] = sorted_persons[ci[t]]
                pbv[t] = sorted_persons[cj[t]]
        else:
            pa = np.empty(0, dtype=np.int32)
            pb = np.empty(0, dtype=np.int32)
        return cnt, pa, pb
    finally:
        if adj != NULL:
            free(adj)
        free(ci)
        free(cj)
        if deg != NULL:
            free(deg)
        if deg2 != NULL:
            free(deg2)
        if cand != NULL:
            free(cand)

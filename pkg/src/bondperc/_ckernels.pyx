# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Line-for-line port of ``_pykernels``; keep them in sync."""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log, log1p, expm1, exp
from libc.stdint cimport int64_t, uint8_t, uint16_t, int32_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_beta

cnp.import_array()

cdef double P_EPS = 1e-12
cdef int REJECTION_ATTEMPTS = 64

cdef enum:
    STATUS_OK = 0
    STATUS_TRUNCATED = 1
    STATUS_RIM = 2


cdef bitgen_t *_bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _clamp(double p) noexcept nogil:
    if p < P_EPS:
        return P_EPS
    if p > 1.0 - P_EPS:
        return 1.0 - P_EPS
    return p


cdef inline int64_t _index(double u, int64_t n) noexcept nogil:
    cdef int64_t i = <int64_t>(u * n)
    if i > n - 1:
        i = n - 1
    return i


def simulate(const uint8_t[::1] mask, const int64_t[::1] offsets, int64_t origin,
             double p, int64_t cap, object bit_generator):
    cdef bitgen_t *rng = _bitgen(bit_generator)
    cdef Py_ssize_t size = mask.shape[0]
    cdef int two_d = offsets.shape[0]
    cdef cnp.ndarray[uint8_t, ndim=1] state_arr = np.zeros(size, dtype=np.uint8)
    cdef uint8_t[::1] state = state_arr
    cdef Py_ssize_t qcap = 1024
    cdef Py_ssize_t ecap = 1024
    queue_arr = np.empty(qcap, dtype=np.int64)
    ea_arr = np.empty(ecap, dtype=np.int64)
    eb_arr = np.empty(ecap, dtype=np.int64)
    cdef int64_t[::1] queue = queue_arr
    cdef int64_t[::1] ea = ea_arr
    cdef int64_t[::1] eb = eb_arr
    cdef Py_ssize_t head = 0, qlen = 1, elen = 0
    cdef int64_t x, y
    cdef int k
    cdef int status = STATUS_OK
    queue[0] = origin
    state[origin] = 1
    if mask[origin] == 2:
        status = STATUS_RIM
    with bit_generator.lock:
        while status == STATUS_OK and head < qlen:
            # grow buffers so one exploration step cannot overflow them
            if qlen + two_d > qcap:
                qcap *= 2
                queue_arr = np.resize(queue_arr, qcap)
                queue = queue_arr
            if elen + two_d > ecap:
                ecap *= 2
                ea_arr = np.resize(ea_arr, ecap)
                eb_arr = np.resize(eb_arr, ecap)
                ea = ea_arr
                eb = eb_arr
            with nogil:
                x = queue[head]
                head += 1
                for k in range(two_d):
                    y = x + offsets[k]
                    if mask[y] == 0 or state[y] == 2:
                        continue
                    if rng.next_double(rng.state) < p:
                        ea[elen] = x
                        eb[elen] = y
                        elen += 1
                        if state[y] == 0:
                            state[y] = 1
                            queue[qlen] = y
                            qlen += 1
                            if cap >= 0 and qlen > cap:
                                status = STATUS_TRUNCATED
                                break
                            if mask[y] == 2:
                                status = STATUS_RIM
                                break
                state[x] = 2
    return status, queue_arr[:qlen].copy(), ea_arr[:elen].copy(), eb_arr[:elen].copy()


def s1_chain(int64_t n, const int64_t[::1] ea, const int64_t[::1] eb,
             uint8_t[::1] is_open, int64_t w, double prior_a, double prior_b,
             int64_t iterations, int64_t burn_in, int64_t thin, object bit_generator):
    cdef bitgen_t *rng = _bitgen(bit_generator)
    cdef int64_t n_edges = ea.shape[0]
    cdef int64_t i, j, t, x, y, src, dst, e_open = 0, accepted = 0, k = 0, top
    cdef int64_t epoch = 0
    cdef double p, pc, u
    cdef bint found
    # CSR incidence lists
    deg_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] start = deg_arr
    for i in range(n_edges):
        start[ea[i] + 1] += 1
        start[eb[i] + 1] += 1
    for i in range(n):
        start[i + 1] += start[i]
    fill_arr = deg_arr[:n].copy()
    cdef int64_t[::1] fill = fill_arr
    inc_arr = np.empty(max(1, 2 * n_edges), dtype=np.int64)
    cdef int64_t[::1] inc = inc_arr
    for i in range(n_edges):
        inc[fill[ea[i]]] = i
        fill[ea[i]] += 1
        inc[fill[eb[i]]] = i
        fill[eb[i]] += 1
    stamp_arr = np.zeros(max(1, n), dtype=np.int64)
    cdef int64_t[::1] stamp = stamp_arr
    stack_arr = np.empty(max(1, n), dtype=np.int64)
    cdef int64_t[::1] stack = stack_arr
    for i in range(n_edges):
        e_open += is_open[i]
    cdef int64_t n_draws = max(0, (iterations - burn_in) // thin)
    draws_arr = np.empty(n_draws, dtype=np.float64)
    trace_arr = np.empty(n_draws, dtype=np.int64)
    cdef double[::1] draws = draws_arr
    cdef int64_t[::1] trace = trace_arr
    with bit_generator.lock, nogil:
        for t in range(iterations):
            p = random_beta(rng, e_open + prior_a, n_edges - e_open + w + prior_b)
            if n_edges > 0:
                j = _index(rng.next_double(rng.state), n_edges)
                u = rng.next_double(rng.state)
                pc = _clamp(p)
                if is_open[j]:
                    if u <= (1.0 - pc) / pc:
                        epoch += 1
                        src = ea[j]
                        dst = eb[j]
                        stamp[src] = epoch
                        stack[0] = src
                        top = 1
                        found = False
                        while top > 0 and not found:
                            top -= 1
                            x = stack[top]
                            for i in range(start[x], start[x + 1]):
                                if inc[i] == j or not is_open[inc[i]]:
                                    continue
                                y = eb[inc[i]] if ea[inc[i]] == x else ea[inc[i]]
                                if stamp[y] != epoch:
                                    if y == dst:
                                        found = True
                                        break
                                    stamp[y] = epoch
                                    stack[top] = y
                                    top += 1
                        if found:
                            is_open[j] = 0
                            e_open -= 1
                            accepted += 1
                elif u <= pc / (1.0 - pc):
                    is_open[j] = 1
                    e_open += 1
                    accepted += 1
            if t >= burn_in and (t - burn_in + 1) % thin == 0:
                draws[k] = p
                trace[k] = e_open
                k += 1
    return draws_arr, trace_arr, accepted


cdef struct S2:
    const uint8_t *mask
    const int64_t *offsets
    int two_d
    int64_t *inpos
    int32_t *nb
    int64_t *fpos
    uint16_t *bits
    int64_t *front
    int64_t nf
    int64_t *verts
    int64_t n
    int64_t e_sat
    int64_t w
    int64_t e_open


cdef inline int _degree(S2 *s, int64_t x) noexcept nogil:
    cdef int k, d = 0
    for k in range(s.two_d):
        if s.mask[x + s.offsets[k]]:
            d += 1
    return d


cdef inline void _front_add(S2 *s, int64_t x) noexcept nogil:
    s.fpos[x] = s.nf
    s.front[s.nf] = x
    s.nf += 1


cdef inline void _front_remove(S2 *s, int64_t x) noexcept nogil:
    cdef int64_t i = s.fpos[x]
    cdef int64_t last
    s.nf -= 1
    last = s.front[s.nf]
    if last != x:
        s.front[i] = last
        s.fpos[last] = i
    s.fpos[x] = -1


cdef void _attach(S2 *s, int64_t x) noexcept nogil:
    cdef int k
    cdef int64_t y
    if s.fpos[x] >= 0:
        _front_remove(s, x)
    for k in range(s.two_d):
        y = x + s.offsets[k]
        if not s.mask[y]:
            continue
        s.nb[y] += 1
        if s.inpos[y] < 0 and s.nb[y] == 1:
            _front_add(s, y)
    s.e_sat += s.nb[x]
    s.w += _degree(s, x) - 2 * s.nb[x]


cdef void _detach(S2 *s, int64_t x) noexcept nogil:
    cdef int k
    cdef int64_t y
    for k in range(s.two_d):
        y = x + s.offsets[k]
        if not s.mask[y]:
            continue
        s.nb[y] -= 1
        if s.inpos[y] < 0 and s.nb[y] == 0:
            _front_remove(s, y)
    if s.nb[x] > 0:
        _front_add(s, x)
    s.e_sat -= s.nb[x]
    s.w += 2 * s.nb[x] - _degree(s, x)


cdef inline void _set_edges(S2 *s, int64_t x, int bits) noexcept nogil:
    cdef int k
    s.bits[x] = bits
    for k in range(s.two_d):
        if (bits >> k) & 1:
            s.bits[x + s.offsets[k]] |= (1 << (k ^ 1))


cdef inline int _clear_edges(S2 *s, int64_t x) noexcept nogil:
    cdef int k
    cdef int bits = s.bits[x]
    for k in range(s.two_d):
        if (bits >> k) & 1:
            s.bits[x + s.offsets[k]] &= ~(1 << (k ^ 1))
    s.bits[x] = 0
    return bits


cdef inline void _swap(S2 *s, int64_t pos, int64_t u, int64_t v) noexcept nogil:
    s.inpos[u] = -1
    _detach(s, u)
    s.verts[pos] = v
    s.inpos[v] = pos
    _attach(s, v)


cdef bint _connected_from(S2 *s, int64_t origin, int64_t *stamp, int64_t epoch,
                          int64_t *stack) noexcept nogil:
    cdef int64_t top = 1, count = 1, x, y
    cdef int k, bits
    stamp[origin] = epoch
    stack[0] = origin
    while top > 0:
        top -= 1
        x = stack[top]
        bits = s.bits[x]
        for k in range(s.two_d):
            if (bits >> k) & 1:
                y = x + s.offsets[k]
                if stamp[y] != epoch:
                    stamp[y] = epoch
                    count += 1
                    stack[top] = y
                    top += 1
    return count == s.n


cdef inline int _popcount(int x) noexcept nogil:
    cdef int c = 0
    while x:
        c += x & 1
        x >>= 1
    return c


def s2_chain(const uint8_t[::1] mask, const int64_t[::1] offsets, int64_t origin,
             const int64_t[::1] verts, const int64_t[::1] ea, const int64_t[::1] eb,
             double prior_a, double prior_b, int64_t iterations, int64_t burn_in,
             int64_t thin, object bit_generator):
    cdef bitgen_t *rng = _bitgen(bit_generator)
    cdef Py_ssize_t size = mask.shape[0]
    cdef int two_d = offsets.shape[0]
    if two_d > 16:
        raise ValueError("dimension too large for the compiled S2 kernel")
    cdef int64_t n = verts.shape[0]
    inpos_arr = np.full(size, -1, dtype=np.int64)
    nb_arr = np.zeros(size, dtype=np.int32)
    fpos_arr = np.full(size, -1, dtype=np.int64)
    bits_arr = np.zeros(size, dtype=np.uint16)
    front_arr = np.empty(n * two_d + 1, dtype=np.int64)
    verts_arr = np.empty(n, dtype=np.int64)
    stamp_arr = np.zeros(size, dtype=np.int64)
    stack_arr = np.empty(n + 1, dtype=np.int64)
    cdef int64_t[::1] inpos_v = inpos_arr
    cdef int32_t[::1] nb_v = nb_arr
    cdef int64_t[::1] fpos_v = fpos_arr
    cdef uint16_t[::1] bits_v = bits_arr
    cdef int64_t[::1] front_v = front_arr
    cdef int64_t[::1] verts_v = verts_arr
    cdef int64_t[::1] stamp_v = stamp_arr
    cdef int64_t[::1] stack_v = stack_arr
    cdef S2 s
    s.mask = &mask[0]
    s.offsets = &offsets[0]
    s.two_d = two_d
    s.inpos = &inpos_v[0]
    s.nb = &nb_v[0]
    s.fpos = &fpos_v[0]
    s.bits = &bits_v[0]
    s.front = &front_v[0]
    s.nf = 0
    s.verts = &verts_v[0]
    s.n = 0
    s.e_sat = 0
    s.w = 0
    s.e_open = 0
    cdef int64_t i, x, a, b
    cdef int k
    for i in range(n):
        x = verts[i]
        s.inpos[x] = s.n
        s.verts[s.n] = x
        s.n += 1
        _attach(&s, x)
    for i in range(ea.shape[0]):
        a = ea[i]
        b = eb[i]
        for k in range(two_d):
            if offsets[k] == b - a:
                break
        else:
            raise ValueError("initial edge joins non-adjacent sites")
        s.bits[a] |= (1 << k)
        s.bits[b] |= (1 << (k ^ 1))
        s.e_open += 1

    cdef int64_t n_draws = max(0, (iterations - burn_in) // thin)
    draws_arr = np.empty(n_draws, dtype=np.float64)
    open_arr = np.empty(n_draws, dtype=np.int64)
    sat_arr = np.empty(n_draws, dtype=np.int64)
    w_arr = np.empty(n_draws, dtype=np.int64)
    cdef double[::1] draws = draws_arr
    cdef int64_t[::1] tr_open = open_arr
    cdef int64_t[::1] tr_sat = sat_arr
    cdef int64_t[::1] tr_w = w_arr

    cdef int64_t t, iu, iv, u, v, z, kk_i, nf, gamma_old, gamma_new
    cdef int64_t epoch = 0, accepted = 0, rec = 0
    cdef int cand[16]
    cdef int dv_t, du_t, d_u, d_v, bits, ubits, attempt, first, kk, nu_u, nu_v, kappa
    cdef double p, lq, target, log_alpha
    cdef bint ok
    with bit_generator.lock, nogil:
        for t in range(iterations):
            p = random_beta(rng, s.e_open + prior_a, s.e_sat - s.e_open + s.w + prior_b)
            nf = s.nf
            iu = _index(rng.next_double(rng.state), n)
            if nf > 0:
                iv = _index(rng.next_double(rng.state), nf)
                v = s.front[iv]
            else:
                iv = -1
                v = -1
            u = s.verts[iu]
            if u != origin and v >= 0:
                dv_t = 0
                for kk in range(two_d):
                    z = v + s.offsets[kk]
                    if s.mask[z] and s.inpos[z] >= 0 and z != u:
                        cand[dv_t] = kk
                        dv_t += 1
                du_t = s.nb[u]
                if dv_t > 0 and du_t > 0:
                    bits = 0
                    for attempt in range(REJECTION_ATTEMPTS):
                        for kk_i in range(dv_t):
                            if rng.next_double(rng.state) < p:
                                bits |= (1 << cand[kk_i])
                        if bits:
                            break
                    if not bits:
                        lq = log1p(-_clamp(p))
                        target = rng.next_double(rng.state) * -expm1(dv_t * lq)
                        first = 0
                        while first < dv_t - 1 and -expm1((first + 1) * lq) < target:
                            first += 1
                        bits = 1 << cand[first]
                        for kk_i in range(first + 1, dv_t):
                            if rng.next_double(rng.state) < p:
                                bits |= (1 << cand[kk_i])
                    d_u = _popcount(s.bits[u])
                    d_v = _popcount(bits)
                    gamma_old = nf
                    ubits = _clear_edges(&s, u)
                    _swap(&s, iu, u, v)
                    _set_edges(&s, v, bits)
                    epoch += 1
                    ok = _connected_from(&s, origin, &stamp_v[0], epoch, &stack_v[0])
                    if ok:
                        gamma_new = s.nf
                        nu_u = _degree(&s, u) - du_t
                        nu_v = _degree(&s, v) - dv_t
                        kappa = du_t - dv_t + nu_v - nu_u
                        lq = log1p(-_clamp(p))
                        log_alpha = (log(<double>gamma_old) - log(<double>gamma_new)
                                     + log(-expm1(dv_t * lq))
                                     - log(-expm1(du_t * lq))
                                     + kappa * lq)
                        if log_alpha > 0.0:
                            log_alpha = 0.0
                        ok = rng.next_double(rng.state) <= exp(log_alpha)
                    if ok:
                        s.e_open += d_v - d_u
                        accepted += 1
                    else:
                        _clear_edges(&s, v)
                        _swap(&s, iu, v, u)
                        _set_edges(&s, u, ubits)
            if t >= burn_in and (t - burn_in + 1) % thin == 0:
                draws[rec] = p
                tr_open[rec] = s.e_open
                tr_sat[rec] = s.e_sat
                tr_w[rec] = s.w
                rec += 1
    final_bits = np.empty(n, dtype=np.int64)
    for i in range(n):
        final_bits[i] = s.bits[s.verts[i]]
    return draws_arr, open_arr, sat_arr, w_arr, verts_arr.copy(), final_bits, accepted

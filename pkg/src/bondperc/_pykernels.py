"""Pure-Python kernels; the reference for ``_ckernels.pyx``.

Both backends consume the bit generator in exactly the same order, using
``next_double`` for uniforms and numpy's ``random_beta`` for Gibbs draws,
so a given seed produces identical output under either backend. Any change
here must be mirrored in the Cython module.
"""
import math

import numpy as np

P_EPS = 1e-12
REJECTION_ATTEMPTS = 64

STATUS_OK = 0
STATUS_TRUNCATED = 1
STATUS_RIM = 2


def _clamp(p):
    return min(max(p, P_EPS), 1.0 - P_EPS)


def simulate(mask, offsets, origin, p, cap, bitgen):
    """Breadth-first bond percolation from ``origin``.

    Each edge is decided once, when the first of its endpoints is explored.
    Returns ``(status, sites, ea, eb)`` with sites in discovery order and
    open edges as flat-index pairs. ``cap < 0`` disables the size cap.
    """
    rng = np.random.Generator(bitgen)
    uniform = rng.random
    mask = mask.tolist() if isinstance(mask, np.ndarray) else mask
    offsets = [int(o) for o in offsets]
    state = {origin: 1}
    queue = [origin]
    ea, eb = [], []
    status = STATUS_OK
    if mask[origin] == 2:
        status = STATUS_RIM
    head = 0
    while status == STATUS_OK and head < len(queue):
        x = queue[head]
        head += 1
        for off in offsets:
            y = x + off
            if mask[y] == 0 or state.get(y, 0) == 2:
                continue
            if uniform() < p:
                ea.append(x)
                eb.append(y)
                if y not in state:
                    state[y] = 1
                    queue.append(y)
                    if 0 <= cap < len(queue):
                        status = STATUS_TRUNCATED
                        break
                    if mask[y] == 2:
                        status = STATUS_RIM
                        break
        state[x] = 2
    return (status, np.array(queue, dtype=np.int64),
            np.array(ea, dtype=np.int64), np.array(eb, dtype=np.int64))


def _csr(n, ea, eb):
    incident = [[] for _ in range(n)]
    for j, (a, b) in enumerate(zip(ea, eb)):
        incident[a].append(j)
        incident[b].append(j)
    return incident


def s1_chain(n, ea, eb, is_open, w, prior_a, prior_b, iterations, burn_in, thin, bitgen):
    """Gibbs/edge-toggle sampler on a fixed vertex set.

    ``is_open`` is modified in place and holds the final graph on return.
    Returns ``(draws, e_open_trace, accepted)``.
    """
    rng = np.random.Generator(bitgen)
    uniform, beta = rng.random, rng.beta
    ea, eb = [int(a) for a in ea], [int(b) for b in eb]
    n_edges = len(ea)
    incident = _csr(n, ea, eb)
    state = [int(s) for s in is_open]
    e_open = sum(state)
    stamp = [0] * n
    epoch = 0
    n_draws = max(0, (iterations - burn_in) // thin)
    draws = np.empty(n_draws, dtype=np.float64)
    trace = np.empty(n_draws, dtype=np.int64)
    accepted = 0
    k = 0
    for t in range(iterations):
        p = beta(e_open + prior_a, n_edges - e_open + w + prior_b)
        if n_edges:
            j = min(int(uniform() * n_edges), n_edges - 1)
            u = uniform()
            pc = _clamp(p)
            if state[j]:
                if u <= (1.0 - pc) / pc:
                    epoch += 1
                    src, dst = ea[j], eb[j]
                    stamp[src] = epoch
                    stack = [src]
                    found = False
                    while stack and not found:
                        x = stack.pop()
                        for i in incident[x]:
                            if i == j or not state[i]:
                                continue
                            y = eb[i] if ea[i] == x else ea[i]
                            if stamp[y] != epoch:
                                if y == dst:
                                    found = True
                                    break
                                stamp[y] = epoch
                                stack.append(y)
                    if found:
                        state[j] = 0
                        e_open -= 1
                        accepted += 1
            elif u <= pc / (1.0 - pc):
                state[j] = 1
                e_open += 1
                accepted += 1
        if t >= burn_in and (t - burn_in + 1) % thin == 0:
            draws[k] = p
            trace[k] = e_open
            k += 1
    is_open[:] = state
    return draws, trace, accepted


class _S2State:
    """Vertex set, open edges and frontier of an S2 chain on a window."""

    def __init__(self, mask, offsets, verts, ea, eb):
        self.mask = mask.tolist()
        self.offsets = [int(o) for o in offsets]
        size = len(self.mask)
        self.inpos = [-1] * size
        self.nb = [0] * size
        self.fpos = [-1] * size
        self.bits = [0] * size
        self.front = []
        self.verts = []
        self.e_sat = 0
        self.w = 0
        for x in verts:
            x = int(x)
            self.inpos[x] = len(self.verts)
            self.verts.append(x)
            self.attach(x)
        self.e_open = 0
        for a, b in zip(ea, eb):
            a, b = int(a), int(b)
            k = self.offsets.index(b - a)
            self.bits[a] |= 1 << k
            self.bits[b] |= 1 << (k ^ 1)
            self.e_open += 1

    def degree(self, x):
        return sum(1 for off in self.offsets if self.mask[x + off])

    def front_add(self, x):
        self.fpos[x] = len(self.front)
        self.front.append(x)

    def front_remove(self, x):
        i = self.fpos[x]
        last = self.front.pop()
        if last != x:
            self.front[i] = last
            self.fpos[last] = i
        self.fpos[x] = -1

    def attach(self, x):
        # x joins the vertex set (inpos already set)
        if self.fpos[x] >= 0:
            self.front_remove(x)
        nb, inpos, mask = self.nb, self.inpos, self.mask
        for off in self.offsets:
            y = x + off
            if not mask[y]:
                continue
            nb[y] += 1
            if inpos[y] < 0 and nb[y] == 1:
                self.front_add(y)
        self.e_sat += nb[x]
        self.w += self.degree(x) - 2 * nb[x]

    def detach(self, x):
        # x leaves the vertex set (inpos already cleared)
        nb, inpos, mask = self.nb, self.inpos, self.mask
        for off in self.offsets:
            y = x + off
            if not mask[y]:
                continue
            nb[y] -= 1
            if inpos[y] < 0 and nb[y] == 0:
                self.front_remove(y)
        if nb[x] > 0:
            self.front_add(x)
        self.e_sat -= nb[x]
        self.w += 2 * nb[x] - self.degree(x)

    def set_edges(self, x, bits):
        self.bits[x] = bits
        for k, off in enumerate(self.offsets):
            if bits >> k & 1:
                self.bits[x + off] |= 1 << (k ^ 1)

    def clear_edges(self, x):
        bits = self.bits[x]
        for k, off in enumerate(self.offsets):
            if bits >> k & 1:
                self.bits[x + off] &= ~(1 << (k ^ 1))
        self.bits[x] = 0
        return bits

    def swap(self, pos, u, v):
        # replace vertex u (at verts[pos]) by v
        self.inpos[u] = -1
        self.detach(u)
        self.verts[pos] = v
        self.inpos[v] = pos
        self.attach(v)

    def connected_from(self, origin, stamp, epoch):
        stamp[origin] = epoch
        stack = [origin]
        count = 1
        while stack:
            x = stack.pop()
            bits = self.bits[x]
            for k, off in enumerate(self.offsets):
                if bits >> k & 1:
                    y = x + off
                    if stamp[y] != epoch:
                        stamp[y] = epoch
                        count += 1
                        stack.append(y)
        return count == len(self.verts)


def s2_chain(mask, offsets, origin, verts, ea, eb, prior_a, prior_b,
             iterations, burn_in, thin, bitgen):
    """Gibbs/vertex-swap sampler over connected n-vertex graphs.

    Returns ``(draws, e_open, e_sat, w, final_verts, final_bits, accepted)``
    where the trace arrays are recorded alongside each kept draw.
    """
    rng = np.random.Generator(bitgen)
    uniform, beta = rng.random, rng.beta
    st = _S2State(mask, offsets, verts, ea, eb)
    origin = int(origin)
    n = len(st.verts)
    two_d = len(st.offsets)
    stamp = [0] * len(st.mask)
    epoch = 0
    n_draws = max(0, (iterations - burn_in) // thin)
    draws = np.empty(n_draws, dtype=np.float64)
    tr_open = np.empty(n_draws, dtype=np.int64)
    tr_sat = np.empty(n_draws, dtype=np.int64)
    tr_w = np.empty(n_draws, dtype=np.int64)
    accepted = 0
    k = 0
    for t in range(iterations):
        p = beta(st.e_open + prior_a, st.e_sat - st.e_open + st.w + prior_b)
        nf = len(st.front)
        iu = min(int(uniform() * n), n - 1)
        iv = min(int(uniform() * nf), nf - 1) if nf else -1
        u = st.verts[iu]
        v = st.front[iv] if nf else -1
        if u != origin and v >= 0:
            cand = []
            for kk in range(two_d):
                z = v + st.offsets[kk]
                if st.mask[z] and st.inpos[z] >= 0 and z != u:
                    cand.append(kk)
            dv_t = len(cand)
            du_t = st.nb[u]
            if dv_t and du_t:
                bits = 0
                for _ in range(REJECTION_ATTEMPTS):
                    for kk in cand:
                        if uniform() < p:
                            bits |= 1 << kk
                    if bits:
                        break
                if not bits:
                    # exact draw from the law conditioned on >= 1 inclusion
                    lq = math.log1p(-_clamp(p))
                    target = uniform() * -math.expm1(dv_t * lq)
                    first = 0
                    while first < dv_t - 1 and -math.expm1((first + 1) * lq) < target:
                        first += 1
                    bits = 1 << cand[first]
                    for kk in cand[first + 1:]:
                        if uniform() < p:
                            bits |= 1 << kk
                d_u = bin(st.bits[u]).count("1")
                d_v = bin(bits).count("1")
                gamma_old = nf
                ubits = st.clear_edges(u)
                st.swap(iu, u, v)
                st.set_edges(v, bits)
                epoch += 1
                ok = st.connected_from(origin, stamp, epoch)
                if ok:
                    gamma_new = len(st.front)
                    nu_u = st.degree(u) - du_t
                    nu_v = st.degree(v) - dv_t
                    kappa = du_t - dv_t + nu_v - nu_u
                    lq = math.log1p(-_clamp(p))
                    log_alpha = (math.log(gamma_old) - math.log(gamma_new)
                                 + math.log(-math.expm1(dv_t * lq))
                                 - math.log(-math.expm1(du_t * lq))
                                 + kappa * lq)
                    ok = uniform() <= math.exp(min(0.0, log_alpha))
                if ok:
                    st.e_open += d_v - d_u
                    accepted += 1
                else:
                    st.clear_edges(v)
                    st.swap(iu, v, u)
                    st.set_edges(u, ubits)
        if t >= burn_in and (t - burn_in + 1) % thin == 0:
            draws[k] = p
            tr_open[k] = st.e_open
            tr_sat[k] = st.e_sat
            tr_w[k] = st.w
            k += 1
    final_bits = np.array([st.bits[x] for x in st.verts], dtype=np.int64)
    return (draws, tr_open, tr_sat, tr_w, np.array(st.verts, dtype=np.int64),
            final_bits, accepted)

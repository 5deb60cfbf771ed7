# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _pycore.py for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort
from libcpp.utility cimport pair

from .errors import NodeCapExceeded, StepCapExceeded

cnp.import_array()


cdef struct Rng:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline void rng_seed(Rng* g, uint64_t seed) nogil:
    cdef uint64_t x = seed, z
    cdef uint64_t out[4]
    cdef int q
    for q in range(4):
        x += 0x9E3779B97F4A7C15ULL
        z = x
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
        out[q] = z ^ (z >> 31)
    g.s0 = out[0]
    g.s1 = out[1]
    g.s2 = out[2]
    g.s3 = out[3]


cdef inline uint64_t rng_next(Rng* g) nogil:
    cdef uint64_t result = rotl(g.s1 * 5, 7) * 9
    cdef uint64_t t = g.s1 << 17
    g.s2 ^= g.s0
    g.s3 ^= g.s1
    g.s1 ^= g.s2
    g.s0 ^= g.s3
    g.s2 ^= t
    g.s3 = rotl(g.s3, 45)
    return result


cdef inline double rng_uniform(Rng* g) nogil:
    return <double>(rng_next(g) >> 11) * (1.0 / 9007199254740992.0)


cdef inline long rng_below(Rng* g, long n) nogil:
    cdef long k = <long>(rng_uniform(g) * n)
    return k if k < n else n - 1


cdef inline long pick(const double[:] cum, long lo, long hi, double u) nogil:
    cdef long o = lo
    while o < hi - 1 and u >= cum[o]:
        o += 1
    return o


def rng_stream(uint64_t seed, long count):
    cdef Rng g
    rng_seed(&g, seed)
    out = np.empty(count, dtype=np.float64)
    cdef double[:] o = out
    cdef long k
    for k in range(count):
        o[k] = rng_uniform(&g)
    return out


cdef tuple arena(vector[long]& parent, vector[long]& size, vector[long]& typ,
                 vector[long]& depth, vector[long]& cstart, vector[long]& ccount):
    cdef long n = parent.size(), k
    arrs = [np.empty(n, dtype=np.int64) for _ in range(6)]
    cdef long[:] a0 = arrs[0], a1 = arrs[1], a2 = arrs[2]
    cdef long[:] a3 = arrs[3], a4 = arrs[4], a5 = arrs[5]
    for k in range(n):
        a0[k] = parent[k]
        a1[k] = size[k]
        a2[k] = typ[k]
        a3[k] = depth[k]
        a4[k] = cstart[k]
        a5[k] = ccount[k]
    return tuple(arrs)


def tab_sample_tree(const long[:] row_ptr, const double[:] cum, const long[:] part_ptr,
                    const long[:] part_size, const long[:] part_type, long nmax, long n,
                    long i, uint64_t seed, long node_cap):
    cdef Rng g
    rng_seed(&g, seed)
    cdef vector[long] parent, size, typ, depth, cstart, ccount
    parent.push_back(-1); size.push_back(n); typ.push_back(i)
    depth.push_back(0); cstart.push_back(0); ccount.push_back(0)
    cdef long head = 0, m, j, key, lo, hi, o, a, b, p
    while head < <long>size.size():
        m = size[head]
        j = typ[head]
        if m > nmax:
            raise ValueError(f"size {m} exceeds table range {nmax}")
        key = (j - 1) * (nmax + 1) + m
        lo = row_ptr[key]
        hi = row_ptr[key + 1]
        if lo == hi:
            raise ValueError(f"no splitting law at size {m}, type {j}")
        o = pick(cum, lo, hi, rng_uniform(&g))
        a = part_ptr[o]
        b = part_ptr[o + 1]
        if <long>size.size() + (b - a) > node_cap:
            raise NodeCapExceeded(node_cap)
        cstart[head] = size.size()
        ccount[head] = b - a
        for p in range(a, b):
            parent.push_back(head)
            size.push_back(part_size[p])
            typ.push_back(part_type[p])
            depth.push_back(depth[head] + 1)
            cstart.push_back(0)
            ccount.push_back(0)
        head += 1
    return arena(parent, size, typ, depth, cstart, ccount)


def tab_tagged_chain(const long[:] row_ptr, const double[:] cum, const long[:] part_ptr,
                     const long[:] part_size, const long[:] part_type, long nmax, long n,
                     long i, uint64_t seed, long max_steps):
    cdef Rng g
    rng_seed(&g, seed)
    cdef vector[long] sizes, types
    sizes.push_back(n)
    types.push_back(i)
    cdef long m = n, j = i, key, lo, hi, o, p, nxt, acc
    cdef int status = 0
    cdef double u
    while m > 1:
        if <long>sizes.size() > max_steps:
            raise StepCapExceeded(max_steps)
        key = (j - 1) * (nmax + 1) + m
        lo = row_ptr[key]
        hi = row_ptr[key + 1]
        if lo == hi:
            raise ValueError(f"no splitting law at size {m}, type {j}")
        o = pick(cum, lo, hi, rng_uniform(&g))
        u = rng_uniform(&g) * m
        acc = 0
        nxt = -1
        for p in range(part_ptr[o], part_ptr[o + 1]):
            acc += part_size[p]
            if u < acc:
                nxt = p
                break
        if nxt < 0:
            status = 1
            break
        m = part_size[nxt]
        j = part_type[nxt]
        sizes.push_back(m)
        types.push_back(j)
    s_out = np.array([sizes[k] for k in range(sizes.size())], dtype=np.int64)
    t_out = np.array([types[k] for k in range(types.size())], dtype=np.int64)
    return s_out, t_out, status


def urn_run_many(init, const double[:] inc_vals, const double[:] inc_cum, long steps,
                 uint64_t seed):
    cdef Rng g
    rng_seed(&g, seed)
    a = np.ascontiguousarray(init, dtype=np.float64)
    cdef double[:, :] w0 = a
    cdef long reps = a.shape[0], k = a.shape[1], nv = inc_vals.shape[0]
    out = np.empty((reps, k), dtype=np.float64)
    cdef double[:, :] o = out
    cdef vector[double] w
    w.resize(k)
    cdef long r, c, step
    cdef double total, u, acc, inc
    with nogil:
        for r in range(reps):
            total = 0.0
            for c in range(k):
                w[c] = w0[r, c]
                total = total + w[c]
            for step in range(steps):
                u = rng_uniform(&g) * total
                c = 0
                acc = w[0]
                while c < k - 1 and u >= acc:
                    c += 1
                    acc += w[c]
                inc = inc_vals[pick(inc_cum, 0, nv, rng_uniform(&g))]
                w[c] += inc
                total += inc
            for c in range(k):
                o[r, c] = w[c] / total
    return out


def growth_root_split(long n, long i, const long[:] anc_edges, const long[:] anc_types,
                      const double[:] brick_cum, const long[:] brick_edges,
                      const long[:] brick_child_ptr, const long[:] brick_child_edges,
                      const long[:] brick_child_types, long reps, uint64_t seed):
    cdef Rng g
    rng_seed(&g, seed)
    cdef long nb = brick_edges.shape[0], na = anc_edges.shape[0]
    cdef long width = na, b, q, r, t, c, E, jn, bn, nbe, acc, tot
    for b in range(nb):
        width = max(width, 1 + brick_child_ptr[b + 1] - brick_child_ptr[b])
    width = max(width, 1)
    J_arr = np.zeros(reps, dtype=np.int64)
    B_arr = np.full(reps, -1, dtype=np.int64)
    S_arr = np.zeros((reps, width), dtype=np.int64)
    T_arr = np.zeros((reps, width), dtype=np.int64)
    cdef long[:] Jv = J_arr, Bv = B_arr
    cdef long[:, :] Sv = S_arr, Tv = T_arr
    cdef vector[long] W, R, T
    cdef double u
    with nogil:
        for r in range(reps):
            W.clear(); R.clear(); T.clear()
            tot = 0
            for q in range(na):
                W.push_back(anc_edges[q])
                R.push_back(0)
                T.push_back(anc_types[q])
                tot += anc_edges[q]
            E = 1 + tot
            jn = 0
            bn = -1
            for t in range(1, n + 1):
                u = rng_uniform(&g) * E
                b = pick(brick_cum, 0, nb, rng_uniform(&g))
                nbe = brick_edges[b]
                if u < 1.0:
                    W.clear(); R.clear(); T.clear()
                    W.push_back(E); R.push_back(t - 1); T.push_back(i)
                    for q in range(brick_child_ptr[b], brick_child_ptr[b + 1]):
                        W.push_back(brick_child_edges[q])
                        R.push_back(0)
                        T.push_back(brick_child_types[q])
                    jn = t
                    bn = b
                else:
                    u -= 1.0
                    c = 0
                    acc = W[0]
                    while c < <long>W.size() - 1 and u >= acc:
                        c += 1
                        acc += W[c]
                    W[c] += 1 + nbe
                    R[c] += 1
                E += 1 + nbe
            Jv[r] = jn
            Bv[r] = bn
            for c in range(<long>R.size()):
                Sv[r, c] = R[c]
                Tv[r, c] = T[c]
    return J_arr, B_arr, S_arr, T_arr


def grow_tree(const long[:] t0_parent, const long[:] t0_type, const long[:] brick_ptr,
              const long[:] brick_parent, const long[:] brick_type, const double[:] brick_cum,
              long steps, uint64_t seed):
    cdef Rng g
    rng_seed(&g, seed)
    cdef vector[long] parent, vtype, red, edges, ids
    cdef long v, t, b, r, base, size_b, w, nb = brick_ptr.shape[0] - 1
    for v in range(t0_parent.shape[0]):
        parent.push_back(t0_parent[v])
        vtype.push_back(t0_type[v])
        red.push_back(0)
        if t0_parent[v] >= 0:
            edges.push_back(v)
    on_root = np.zeros(steps, dtype=np.int64)
    chosen = np.zeros(steps, dtype=np.int64)
    cdef long[:] orv = on_root, chv = chosen
    with nogil:
        for t in range(steps):
            v = edges[rng_below(&g, edges.size())]
            b = pick(brick_cum, 0, nb, rng_uniform(&g))
            orv[t] = 1 if parent[v] == 0 else 0
            chv[t] = b
            r = parent.size()
            parent.push_back(parent[v])
            vtype.push_back(vtype[v])
            red.push_back(1)
            parent[v] = r
            edges.push_back(r)
            base = brick_ptr[b]
            size_b = brick_ptr[b + 1] - base
            ids.resize(size_b)
            ids[0] = r
            for w in range(1, size_b):
                ids[w] = parent.size()
                parent.push_back(ids[brick_parent[base + w]])
                vtype.push_back(brick_type[base + w])
                red.push_back(0)
                edges.push_back(ids[w])
    cdef long nv = parent.size()
    P = np.empty(nv, dtype=np.int64)
    V = np.empty(nv, dtype=np.int64)
    Rd = np.empty(nv, dtype=np.int64)
    cdef long[:] pv = P, vv = V, rv = Rd
    for v in range(nv):
        pv[v] = parent[v]
        vv[v] = vtype[v]
        rv[v] = red[v]
    return P, V, Rd, on_root, chosen


cdef inline long scan(vector[double]& w, double total, double u) nogil:
    cdef double target = u * total, acc = 0.0
    cdef long k, last = -1
    for k in range(<long>w.size()):
        if w[k] > 0.0:
            last = k
            acc += w[k]
            if target < acc:
                return k
    return last


def gw_sample_tree(const double[:, :] tree_law, const double[:, :] forest, const long[:] sup_ptr,
                   const double[:] sup_prob, const long[:] root_ptr, const long[:] roots,
                   const long[:] suffix_row, long n, long i, uint64_t seed, bint expand_zero,
                   long node_cap):
    cdef Rng g
    rng_seed(&g, seed)
    cdef vector[long] parent, size, typ, depth, cstart, ccount
    parent.push_back(-1); size.push_back(n); typ.push_back(i)
    depth.push_back(0); cstart.push_back(0); ccount.push_back(0)
    cdef vector[double] w
    cdef vector[pair[long, long]] kids
    cdef long head = 0, m, j, r, lo, hi, k, a, b, t, rt, s, rem, q
    cdef double f, total
    while head < <long>size.size():
        m = size[head]
        j = typ[head]
        if m == 0 and not expand_zero:
            head += 1
            continue
        r = m - 1 if j == 1 else m
        if r < 0:
            raise ValueError("type-1 vertex cannot have size 0")
        lo = sup_ptr[j - 1]
        hi = sup_ptr[j]
        w.clear()
        total = 0.0
        for k in range(lo, hi):
            a = root_ptr[k]
            b = root_ptr[k + 1]
            if a < b:
                f = forest[suffix_row[a], r]
            else:
                f = 1.0 if r == 0 else 0.0
            w.push_back(sup_prob[k] * f)
            total = total + w.back()
        if not total > 0.0:
            raise ValueError(f"zero conditioning mass at size {m}, type {j}")
        k = lo + scan(w, total, rng_uniform(&g))
        a = root_ptr[k]
        b = root_ptr[k + 1]
        kids.clear()
        rem = r
        for t in range(a, b - 1):
            rt = roots[t]
            w.clear()
            for s in range(rem + 1):
                w.push_back(tree_law[rt - 1, s] * forest[suffix_row[t + 1], rem - s])
            s = scan(w, forest[suffix_row[t], rem], rng_uniform(&g))
            kids.push_back(pair[long, long](s, rt))
            rem -= s
        if a < b:
            kids.push_back(pair[long, long](rem, roots[b - 1]))
        sort(kids.rbegin(), kids.rend())
        if <long>size.size() + <long>kids.size() > node_cap:
            raise NodeCapExceeded(node_cap)
        cstart[head] = size.size()
        ccount[head] = kids.size()
        for q in range(<long>kids.size()):
            parent.push_back(head)
            size.push_back(kids[q].first)
            typ.push_back(kids[q].second)
            depth.push_back(depth[head] + 1)
            cstart.push_back(0)
            ccount.push_back(0)
        head += 1
    return arena(parent, size, typ, depth, cstart, ccount)

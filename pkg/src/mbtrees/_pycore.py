"""Pure-Python hot kernels.

Every function here has a twin in ``_core.pyx`` that consumes the random
stream in exactly the same order, so both back ends return identical
arrays for identical seeds.
"""

import math

import numpy as np

from .errors import NodeCapExceeded, StepCapExceeded

_MASK = 0xFFFFFFFFFFFFFFFF
_INV53 = 1.0 / 9007199254740992.0


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed):
        x = int(seed) & _MASK
        s = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & _MASK
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
            s.append(z ^ (z >> 31))
        self.s = s

    def next_u64(self):
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self):
        return (self.next_u64() >> 11) * _INV53

    def below(self, n):
        k = int(self.uniform() * n)
        return k if k < n else n - 1


def rng_stream(seed, count):
    """First ``count`` uniforms of the stream, for cross-backend checks."""
    g = Xoshiro256(seed)
    return np.array([g.uniform() for _ in range(count)])


def _pick(cum, lo, hi, u):
    o = lo
    while o < hi - 1 and u >= cum[o]:
        o += 1
    return o


def _arena(parent, size, typ, depth, cstart, ccount):
    as64 = lambda a: np.asarray(a, dtype=np.int64)
    return (as64(parent), as64(size), as64(typ), as64(depth), as64(cstart), as64(ccount))


def tab_sample_tree(row_ptr, cum, part_ptr, part_size, part_type, nmax, n, i, seed, node_cap):
    g = Xoshiro256(seed)
    parent, size, typ, depth = [-1], [n], [i], [0]
    cstart, ccount = [0], [0]
    head = 0
    while head < len(size):
        m, j = size[head], typ[head]
        if m > nmax:
            raise ValueError(f"size {m} exceeds table range {nmax}")
        key = (j - 1) * (nmax + 1) + m
        lo, hi = row_ptr[key], row_ptr[key + 1]
        if lo == hi:
            raise ValueError(f"no splitting law at size {m}, type {j}")
        o = _pick(cum, lo, hi, g.uniform())
        a, b = part_ptr[o], part_ptr[o + 1]
        if len(size) + (b - a) > node_cap:
            raise NodeCapExceeded(node_cap)
        cstart[head] = len(size)
        ccount[head] = b - a
        for p in range(a, b):
            parent.append(head)
            size.append(part_size[p])
            typ.append(part_type[p])
            depth.append(depth[head] + 1)
            cstart.append(0)
            ccount.append(0)
        head += 1
    return _arena(parent, size, typ, depth, cstart, ccount)


def tab_tagged_chain(row_ptr, cum, part_ptr, part_size, part_type, nmax, n, i, seed, max_steps):
    g = Xoshiro256(seed)
    sizes, types = [n], [i]
    m, j = n, i
    status = 0
    while m > 1:
        if len(sizes) > max_steps:
            raise StepCapExceeded(max_steps)
        key = (j - 1) * (nmax + 1) + m
        lo, hi = row_ptr[key], row_ptr[key + 1]
        if lo == hi:
            raise ValueError(f"no splitting law at size {m}, type {j}")
        o = _pick(cum, lo, hi, g.uniform())
        u = g.uniform() * m
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
        m, j = part_size[nxt], part_type[nxt]
        sizes.append(m)
        types.append(j)
    return np.asarray(sizes, dtype=np.int64), np.asarray(types, dtype=np.int64), status


def urn_run_many(init, inc_vals, inc_cum, steps, seed):
    g = Xoshiro256(seed)
    init = np.asarray(init, dtype=np.float64)
    reps, k = init.shape
    out = np.empty_like(init)
    nv = len(inc_vals)
    for r in range(reps):
        w = [float(x) for x in init[r]]
        total = sum(w)
        for _ in range(steps):
            u = g.uniform() * total
            c = 0
            acc = w[0]
            while c < k - 1 and u >= acc:
                c += 1
                acc += w[c]
            inc = inc_vals[_pick(inc_cum, 0, nv, g.uniform())]
            w[c] += inc
            total += inc
        for c in range(k):
            out[r, c] = w[c] / total
    return out


def growth_root_split(n, i, anc_edges, anc_types, brick_cum, brick_edges, brick_child_ptr,
                      brick_child_edges, brick_child_types, reps, seed):
    g = Xoshiro256(seed)
    nb = len(brick_edges)
    width = len(anc_edges)
    for b in range(nb):
        width = max(width, 1 + brick_child_ptr[b + 1] - brick_child_ptr[b])
    width = max(width, 1)
    J = np.zeros(reps, dtype=np.int64)
    B = np.full(reps, -1, dtype=np.int64)
    sizes = np.zeros((reps, width), dtype=np.int64)
    types = np.zeros((reps, width), dtype=np.int64)
    for r in range(reps):
        W = [int(x) for x in anc_edges]
        R = [0] * len(W)
        T = [int(x) for x in anc_types]
        E = 1 + sum(W)
        jn, bn = 0, -1
        for t in range(1, n + 1):
            u = g.uniform() * E
            b = _pick(brick_cum, 0, nb, g.uniform())
            nb_edges = brick_edges[b]
            if u < 1.0:
                W2, R2, T2 = [E], [t - 1], [i]
                for q in range(brick_child_ptr[b], brick_child_ptr[b + 1]):
                    W2.append(brick_child_edges[q])
                    R2.append(0)
                    T2.append(brick_child_types[q])
                W, R, T = W2, R2, T2
                jn, bn = t, b
            else:
                u -= 1.0
                c = 0
                acc = W[0]
                while c < len(W) - 1 and u >= acc:
                    c += 1
                    acc += W[c]
                W[c] += 1 + nb_edges
                R[c] += 1
            E += 1 + nb_edges
        J[r] = jn
        B[r] = bn
        sizes[r, :len(R)] = R
        types[r, :len(T)] = T
    return J, B, sizes, types


def grow_tree(t0_parent, t0_type, brick_ptr, brick_parent, brick_type, brick_cum, steps, seed):
    g = Xoshiro256(seed)
    parent = [int(x) for x in t0_parent]
    vtype = [int(x) for x in t0_type]
    red = [0] * len(parent)
    edges = [v for v in range(len(parent)) if parent[v] >= 0]
    on_root = np.zeros(steps, dtype=np.int64)
    chosen = np.zeros(steps, dtype=np.int64)
    nb = len(brick_ptr) - 1
    for t in range(steps):
        v = edges[g.below(len(edges))]
        b = _pick(brick_cum, 0, nb, g.uniform())
        on_root[t] = 1 if parent[v] == 0 else 0
        chosen[t] = b
        r = len(parent)
        parent.append(parent[v])
        vtype.append(vtype[v])
        red.append(1)
        parent[v] = r
        edges.append(r)
        base = brick_ptr[b]
        size_b = brick_ptr[b + 1] - base
        ids = [r] + [0] * (size_b - 1)
        for w in range(1, size_b):
            ids[w] = len(parent)
            parent.append(ids[brick_parent[base + w]])
            vtype.append(brick_type[base + w])
            red.append(0)
            edges.append(ids[w])
    as64 = lambda a: np.asarray(a, dtype=np.int64)
    return as64(parent), as64(vtype), as64(red), on_root, chosen


def _scan(weights, total, u):
    """Index of the first cumulative weight exceeding ``u * total``."""
    target = u * total
    acc = 0.0
    last = -1
    for k, w in enumerate(weights):
        if w > 0.0:
            last = k
            acc += w
            if target < acc:
                return k
    return last


def gw_sample_tree(tree_law, forest, sup_ptr, sup_prob, root_ptr, roots, suffix_row,
                   n, i, seed, expand_zero, node_cap):
    g = Xoshiro256(seed)
    parent, size, typ, depth = [-1], [n], [i], [0]
    cstart, ccount = [0], [0]
    head = 0
    while head < len(size):
        m, j = size[head], typ[head]
        if m == 0 and not expand_zero:
            head += 1
            continue
        r = m - 1 if j == 1 else m
        if r < 0:
            raise ValueError("type-1 vertex cannot have size 0")
        lo, hi = sup_ptr[j - 1], sup_ptr[j]
        weights = []
        for k in range(lo, hi):
            a, b = root_ptr[k], root_ptr[k + 1]
            f = forest[suffix_row[a], r] if a < b else (1.0 if r == 0 else 0.0)
            weights.append(sup_prob[k] * f)
        total = sum(weights)
        if not total > 0.0:
            raise ValueError(f"zero conditioning mass at size {m}, type {j}")
        k = lo + _scan(weights, total, g.uniform())
        a, b = root_ptr[k], root_ptr[k + 1]
        kids = []
        rem = r
        for t in range(a, b - 1):
            rt = roots[t]
            w = [tree_law[rt - 1, s] * forest[suffix_row[t + 1], rem - s] for s in range(rem + 1)]
            s = _scan(w, forest[suffix_row[t], rem], g.uniform())
            kids.append((s, rt))
            rem -= s
        if a < b:
            kids.append((rem, roots[b - 1]))
        kids.sort(reverse=True)
        if len(size) + len(kids) > node_cap:
            raise NodeCapExceeded(node_cap)
        cstart[head] = len(size)
        ccount[head] = len(kids)
        for s, t in kids:
            parent.append(head)
            size.append(s)
            typ.append(t)
            depth.append(depth[head] + 1)
            cstart.append(0)
            ccount.append(0)
        head += 1
    return _arena(parent, size, typ, depth, cstart, ccount)

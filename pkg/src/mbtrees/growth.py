"""Random growth by gluing brick trees on uniform edges."""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._kernels import core
from .errors import SpecError
from .mb_core import MBTree, SplittingKernel, draw_seed
from .partitions import DiscreteTypedPartition, MassPartition, rank_mass_partition


def _normalize(parent):
    """Renumber a parent array breadth first with the root at 0."""
    parent = [int(p) for p in parent]
    roots = [v for v, p in enumerate(parent) if p < 0]
    if len(roots) != 1:
        raise SpecError("a tree needs exactly one root (parent -1)")
    kids = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    order = [roots[0]]
    for v in order:
        order.extend(kids[v])
    if len(order) != len(parent):
        raise SpecError("parent array is not a tree")
    new = {v: k for k, v in enumerate(order)}
    return [new[parent[v]] if parent[v] >= 0 else -1 for v in order]


def _children(parent):
    kids = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    return kids


def _canon(parent):
    """AHU encoding and subtree vertex count of every vertex (parent is BFS ordered)."""
    kids = _children(parent)
    code = [""] * len(parent)
    count = [1] * len(parent)
    for v in range(len(parent) - 1, -1, -1):
        code[v] = "(" + "".join(sorted(code[c] for c in kids[v])) + ")"
        count[v] += sum(count[c] for c in kids[v])
    return code, count


@dataclass(frozen=True)
class GrowthSpec:
    T0: tuple
    alphabet: tuple

    def __post_init__(self):
        t0 = tuple(_normalize(self.T0))
        if len(t0) < 2 or sum(1 for p in t0 if p == 0) != 1:
            raise SpecError("T0 must be planted: its root has degree 1")
        alpha = tuple((tuple(_normalize(t)), float(q)) for t, q in self.alphabet)
        if not alpha:
            raise SpecError("alphabet is empty")
        if abs(sum(q for _, q in alpha) - 1.0) > 1e-12 or min(q for _, q in alpha) < 0:
            raise SpecError("alphabet probabilities must sum to one")
        object.__setattr__(self, "T0", t0)
        object.__setattr__(self, "alphabet", alpha)
        if self.mean_edges <= 0:
            raise SpecError("bricks must have at least one edge on average")

    @property
    def mean_edges(self):
        return sum(q * (len(t) - 1) for t, q in self.alphabet)

    @property
    def gamma(self):
        return 1.0 / (self.mean_edges + 1.0)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(tuple(d["T0"]), tuple((a["tree"], a["p"]) for a in d["alphabet"]))
        except (KeyError, TypeError) as exc:
            raise SpecError(f"growth spec entry malformed: {exc!r}") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class BrickSet:
    """Types are indices into ``keys``; type 1 is T0."""

    keys: list
    edges: list
    children: list
    trees: list
    alphabet: list
    t0_types: list

    @property
    def kappa(self):
        return len(self.keys)

    def out_degree(self, i):
        return len(self.children[i - 1])

    def brick_arrays(self):
        ptr, par, typ = [0], [], []
        for a in self.alphabet:
            par.extend(a["parent"])
            typ.extend(a["types"])
            ptr.append(len(par))
        cum = np.cumsum([a["q"] for a in self.alphabet])
        cum[-1] = 1.0
        return (np.array(ptr, dtype=np.int64), np.array(par, dtype=np.int64),
                np.array(typ, dtype=np.int64), cum)

    def root_split_arrays(self, i):
        anc = self.children[i - 1]
        ce, ct, cp = [], [], [0]
        for a in self.alphabet:
            for e, t in a["children"]:
                ce.append(e)
                ct.append(t)
            cp.append(len(ce))
        cum = np.cumsum([a["q"] for a in self.alphabet])
        cum[-1] = 1.0
        return (np.array([e for e, _ in anc], dtype=np.int64), np.array([t for _, t in anc], dtype=np.int64),
                cum, np.array([a["edges"] for a in self.alphabet], dtype=np.int64),
                np.array(cp, dtype=np.int64), np.array(ce, dtype=np.int64), np.array(ct, dtype=np.int64))

    def equal_brick_edges(self):
        e = {a["edges"] for a in self.alphabet}
        return e.pop() if len(e) == 1 else None


def build_brick_set(spec):
    """Planted descendant subtrees of T0 and the alphabet, up to isomorphism."""
    trees = [spec.T0] + [t for t, _ in spec.alphabet]
    infos = [(t,) + _canon(t) for t in trees]
    t0_code = infos[0][1][1]
    found = {}
    for t, code, count in infos:
        for v in range(1, len(t)):
            found.setdefault(code[v], count[v])
    others = sorted((k for k in found if k != t0_code), key=lambda k: (found[k], k))
    keys = [t0_code] + others
    index = {k: j + 1 for j, k in enumerate(keys)}

    def typed(t, code, count):
        types = [0] + [index[code[v]] for v in range(1, len(t))]
        return types

    edges, children, planted = [None] * len(keys), [None] * len(keys), [None] * len(keys)
    for t, code, count in infos:
        kids = _children(t)
        types = typed(t, code, count)
        for v in range(1, len(t)):
            j = index[code[v]] - 1
            if edges[j] is not None:
                continue
            edges[j] = count[v]
            children[j] = sorted(((count[c], types[c]) for c in kids[v]), reverse=True)
            sub = [v]
            for u in sub:
                sub.extend(kids[u])
            loc = {u: k + 1 for k, u in enumerate(sub)}
            par = [-1, 0] + [loc[t[u]] for u in sub[1:]]
            planted[j] = (par, [0] + [types[u] for u in sub])
    alphabet = []
    for (t, q), (_, code, count) in zip(spec.alphabet, infos[1:]):
        kids = _children(t)
        types = typed(t, code, count)
        alphabet.append({
            "q": q,
            "edges": len(t) - 1,
            "children": sorted(((count[c], types[c]) for c in kids[0]), reverse=True),
            "parent": list(t),
            "types": types,
        })
    t0_types = typed(*infos[0])
    return BrickSet(keys, edges, children, planted, alphabet, t0_types)


@dataclass
class GrowthState:
    """Grown tree: vertex 0 is the root; ``red`` marks glued branchpoints.

    ``on_root[t]`` records whether step t+1 glued on the edge at the root.
    """

    parent: np.ndarray
    vtype: np.ndarray
    red: np.ndarray
    on_root: np.ndarray
    bricks: np.ndarray

    @property
    def steps(self):
        return len(self.on_root)

    @property
    def n_edges(self):
        return len(self.parent) - 1


def grow(spec, steps, rng, start_type=1, bricks=None):
    """Glue ``steps`` random bricks on uniform edges, starting from τ_i."""
    bs = bricks or build_brick_set(spec)
    par, types = bs.trees[start_type - 1]
    out = core.grow_tree(np.array(par, dtype=np.int64), np.array(types, dtype=np.int64),
                         *bs.brick_arrays(), int(steps), draw_seed(rng))
    return GrowthState(*out)


def root_brick_index(state):
    """J_n: the last step that glued next to the root, or 0."""
    hits = np.nonzero(state.on_root)[0]
    return int(hits[-1]) + 1 if len(hits) else 0


def _topological(parent):
    kids = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    order = [0]
    for v in order:
        order.extend(kids[v])
    return order


def reduce_growth_tree(state):
    """MB tree of red-descendant counts below the ancestor, size-0 vertices removed."""
    parent = state.parent
    order = _topological(parent)
    size = state.red.copy()
    for v in reversed(order[1:]):
        if parent[v] > 0:
            size[parent[v]] += size[v]
    keep = [v for v in order[1:] if size[v] > 0]
    if not keep:
        raise ValueError("no red vertex yet")
    idx = {v: k for k, v in enumerate(keep)}
    par = [idx[parent[v]] if parent[v] > 0 else -1 for v in keep]
    tree, _ = MBTree.from_parents(par, size[keep], state.vtype[keep])
    return tree


def vertex_depths(state):
    parent = state.parent
    depth = np.zeros(len(parent), dtype=np.int64)
    for v in _topological(parent)[1:]:
        depth[v] = depth[parent[v]] + 1
    return depth


def urn_limit_sample(initial_weights, increment_values, increment_probs, steps, rng, reps=1):
    """Normalized weights of a Pólya urn with random increments after ``steps`` draws."""
    w = np.atleast_2d(np.asarray(initial_weights, dtype=np.float64))
    if np.any(w <= 0):
        raise ValueError("urn weights must be positive")
    if w.shape[0] == 1 and reps > 1:
        w = np.repeat(w, reps, axis=0)
    cum = np.cumsum(np.asarray(increment_probs, dtype=np.float64))
    cum[-1] = 1.0
    return core.urn_run_many(w, np.asarray(increment_values, dtype=np.float64), cum, int(steps), draw_seed(rng))


def increment_law(bricks):
    """Values and probabilities of N+1."""
    vals, probs = {}, {}
    for a in bricks.alphabet:
        vals[a["edges"] + 1] = vals.get(a["edges"] + 1, 0.0) + a["q"]
    keys = sorted(vals)
    return np.array(keys, dtype=float), np.array([vals[k] for k in keys])


@dataclass
class RootSplits:
    J: np.ndarray
    brick: np.ndarray
    sizes: np.ndarray
    types: np.ndarray
    n: int

    def weights(self, i, mode="critical"):
        """(1 − s₁·1{i₁=i}) for each ranked root split, s = sizes/n."""
        return ranked_weight(self.sizes / self.n, self.types, i, mode)


def growth_root_splits(bricks, n, i, reps, rng):
    """Sizes and types of the ancestor's subtrees after n steps, ``reps`` times."""
    out = core.growth_root_split(int(n), int(i), *bricks.root_split_arrays(i), int(reps), draw_seed(rng))
    return RootSplits(*out, n)


class GrowthKernel(SplittingKernel):
    """Splitting laws of the reduced growth trees (sampled, not enumerable)."""

    def __init__(self, bricks):
        self.bricks = bricks
        self.kappa = bricks.kappa

    def sample(self, n, i, rng):
        rs = growth_root_splits(self.bricks, n, i, 1, rng)
        parts = [(int(s), int(t)) for s, t in zip(rs.sizes[0], rs.types[0]) if s > 0]
        return DiscreteTypedPartition.ranked(parts, n)


def ell_weights(bricks, i, k_max, mode="closed_form", rng=None, n=10**5, paths=2000, chunk=200):
    """ℓ_0..ℓ_{k_max}: limits of n^γ·P(J_n = k)."""
    n_i = bricks.edges[i - 1]
    p_i = bricks.out_degree(i)
    if mode == "closed_form":
        n_a = bricks.equal_brick_edges()
        if n_a is None:
            raise ValueError("closed form needs all bricks with the same edge count")
        c = n_a + 1.0
        out = np.zeros(k_max + 1)
        if p_i >= 1:
            out[0] = math.exp(gammaln(n_i / c) - gammaln((n_i - 1) / c))
        k = np.arange(1, k_max + 1)
        out[1:] = np.exp(gammaln(n_i / c + k - 1) - gammaln((n_i - 1) / c + k)) / c
        return out
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    vals, probs = increment_law(bricks)
    gamma = 1.0 / float(np.dot(vals, probs))
    total = np.zeros(k_max + 1)
    done = 0
    while done < paths:
        m = min(chunk, paths - done)
        inc = rng.choice(vals, size=(m, n), p=probs)
        S = np.concatenate([np.zeros((m, 1)), np.cumsum(inc, axis=1)[:, : n - 1]], axis=1)  # S_0..S_{n-1}
        with np.errstate(divide="ignore"):
            L = np.log1p(-1.0 / (n_i + S))
        tail = np.cumsum(L[:, ::-1], axis=1)[:, ::-1]  # tail[:, j] = Σ_{l=j}^{n-1} L_l
        if p_i >= 1:
            total[0] += np.exp(tail[:, 0]).sum()
        for k in range(1, k_max + 1):
            total[k] += (np.exp(tail[:, k]) / (n_i + S[:, k - 1])).sum()
        done += m
    return n**gamma * total / paths


def growth_dislocation_samples(bricks, i, k, size, rng, steps=10**4, exact=True):
    """``size`` draws from mixture component k, unranked: (masses, types)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    n_i = bricks.edges[i - 1]
    vals, probs = increment_law(bricks)
    n_a = bricks.equal_brick_edges()
    if k == 0:
        kids = bricks.children[i - 1]
        if not kids:
            raise ValueError("component 0 needs p_i ≥ 1")
        w = np.tile([e for e, _ in kids], (size, 1)).astype(float)
        types = np.tile([t for _, t in kids], (size, 1))
        groups = [(np.arange(size), w, types)]
    else:
        S = rng.choice(vals, size=(size, k - 1), p=probs).sum(axis=1) if k > 1 else np.zeros(size)
        qs = np.array([a["q"] for a in bricks.alphabet])
        b = rng.choice(len(qs), size=size, p=qs)
        groups = []
        for j, a in enumerate(bricks.alphabet):
            rows = np.nonzero(b == j)[0]
            w = np.column_stack([S[rows] + n_i] + [np.full(len(rows), e, float) for e, _ in a["children"]])
            t = np.tile([i] + [t for _, t in a["children"]], (len(rows), 1))
            groups.append((rows, w, t))
    width = max(g[1].shape[1] for g in groups)
    masses = np.zeros((size, width))
    types = np.zeros((size, width), dtype=np.int64)
    for rows, w, t in groups:
        if len(rows) == 0:
            continue
        if exact and n_a is not None:
            draw = np.array([rng.dirichlet(row / (n_a + 1.0)) for row in w])
        else:
            draw = urn_limit_sample(w, vals, probs, steps, rng)
        masses[rows, : w.shape[1]] = draw
        types[rows, : t.shape[1]] = t
    return masses, types


def growth_dislocation_sample(bricks, i, k, rng, steps=10**4, exact=True):
    masses, types = growth_dislocation_samples(bricks, i, k, 1, rng, steps, exact)
    return rank_mass_partition([(m, t) for m, t in zip(masses[0], types[0]) if m > 0])


def ranked_weight(masses, types, i, mode="critical"):
    """(1 − s₁·1{i₁=i}) per row, with (s₁, i₁) the largest atom after ranking."""
    masses = np.asarray(masses, dtype=float)
    s1 = masses.max(axis=1)
    i1 = np.where(masses == s1[:, None], types, 0).max(axis=1)
    if mode == "critical":
        return 1.0 - s1 * (i1 == i)
    return 1.0 - s1


def growth_dislocation_components(bricks, i, k_max, rng=None, mode="closed_form", **kw):
    """(weight ℓ_k, sampler) pairs; the measure is Σ ℓ_k · component k."""
    ell = ell_weights(bricks, i, k_max, mode, rng, **kw)
    out = []
    for k in range(k_max + 1):
        if k == 0 and bricks.out_degree(i) == 0:
            continue
        out.append((float(ell[k]), lambda r, k=k: growth_dislocation_sample(bricks, i, k, r)))
    return out

"""Markov-branching trees built from splitting kernels."""

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ._kernels import core
from .errors import NodeCapExceeded, StepCapExceeded
from .partitions import DiscreteTypedPartition

DEFAULT_NODE_CAP = 10**8


def draw_seed(rng):
    """A 64-bit seed for the compiled kernels, taken from a numpy generator."""
    return int(rng.integers(0, 2**63, dtype=np.int64))


class SplittingKernel:
    """Family of laws q_n^(i) on typed partitions of n.

    Subclasses implement ``sample``; enumerable ones also ``support``.
    """

    kappa = 1
    conservative_from = None

    def sample(self, n, i, rng):
        raise NotImplementedError

    def support(self, n, i):
        raise NotImplementedError(f"{type(self).__name__} is not enumerable")

    @property
    def enumerable(self):
        return False


class TabulatedKernel(SplittingKernel):
    """Kernel given by explicit finite laws for every (n, i) with n ≤ nmax.

    ``laws`` maps (n, i) to a list of (parts, probability) where parts is a
    sequence of (size, type). Outcomes are ranked and merged on construction.
    """

    def __init__(self, laws, nmax, kappa, allow_zero=False):
        self.nmax = int(nmax)
        self.kappa = int(kappa)
        self.allow_zero = allow_zero
        self.laws = {}
        for (n, i), law in laws.items():
            merged = defaultdict(float)
            for parts, p in law:
                if p > 0:
                    merged[tuple(sorted(((int(s), int(t)) for s, t in parts), reverse=True))] += p
            total = sum(merged.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"law at (n={n}, i={i}) sums to {total}")
            for parts in merged:
                if sum(s for s, _ in parts) > n:
                    raise ValueError(f"outcome {parts} exceeds n={n}")
            self.laws[(int(n), int(i))] = sorted(merged.items(), key=lambda kv: kv[0], reverse=True)
        self._tables = None
        self.conservative_from = self._conservative_from()

    @classmethod
    def from_function(cls, law, nmax, kappa, allow_zero=False):
        laws = {(n, i): law(n, i) for n in range(1, nmax + 1) for i in range(1, kappa + 1)}
        return cls(laws, nmax, kappa, allow_zero)

    def _conservative_from(self):
        bad = [n for (n, i), law in self.laws.items() if any(sum(s for s, _ in parts) != n for parts, _ in law)]
        if not bad:
            return 1
        top = max(bad)
        return None if top >= self.nmax else top + 1

    @property
    def enumerable(self):
        return True

    def law(self, n, i):
        try:
            return self.laws[(n, i)]
        except KeyError:
            raise ValueError(f"no law tabulated at n={n}, i={i}") from None

    def support(self, n, i):
        return [(DiscreteTypedPartition(parts, n, self.allow_zero), p) for parts, p in self.law(n, i)]

    def sample(self, n, i, rng):
        law = self.law(n, i)
        probs = np.array([p for _, p in law])
        k = rng.choice(len(law), p=probs / probs.sum())
        return DiscreteTypedPartition(law[k][0], n, self.allow_zero)

    def tables(self):
        """CSR arrays indexed by key = (type-1)·(nmax+1) + size."""
        if self._tables is None:
            nkeys = self.kappa * (self.nmax + 1)
            row_ptr = np.zeros(nkeys + 1, dtype=np.int64)
            cum, part_ptr, part_size, part_type = [], [0], [], []
            for key in range(nkeys):
                i, n = divmod(key, self.nmax + 1)
                law = self.laws.get((n, i + 1), [])
                acc = 0.0
                for parts, p in law:
                    acc += p
                    cum.append(acc)
                    for s, t in parts:
                        part_size.append(s)
                        part_type.append(t)
                    part_ptr.append(len(part_size))
                if law:
                    cum[-1] = 1.0
                row_ptr[key + 1] = len(cum)
            self._tables = (
                row_ptr,
                np.array(cum, dtype=np.float64),
                np.array(part_ptr, dtype=np.int64),
                np.array(part_size, dtype=np.int64),
                np.array(part_type, dtype=np.int64),
                self.nmax,
            )
        return self._tables

    def sample_arena(self, n, i, seed, node_cap):
        return core.tab_sample_tree(*self.tables(), n, i, seed, node_cap)


class FunctionKernel(SplittingKernel):
    """Kernel defined by a sampling callable ``f(n, i, rng) -> parts``."""

    def __init__(self, sampler, kappa=1, conservative_from=None, allow_zero=False):
        self.sampler = sampler
        self.kappa = kappa
        self.conservative_from = conservative_from
        self.allow_zero = allow_zero

    def sample(self, n, i, rng):
        return DiscreteTypedPartition.ranked(self.sampler(n, i, rng), n, self.allow_zero)


class _Wrapped(SplittingKernel):
    def __init__(self, base, transform):
        self.base = base
        self.transform = transform
        self.kappa = base.kappa
        self.allow_zero = getattr(base, "allow_zero", False)

    def sample(self, n, i, rng):
        return DiscreteTypedPartition.ranked(self.transform(n, i, self.base.sample(n, i, rng).parts), n, self.allow_zero)


def _kill_singletons(n, i, parts):
    return () if n == 1 else parts


def _pad(n, i, parts):
    if n < 2:
        return parts
    return tuple(parts) + ((1, 1),) * (n - sum(s for s, _ in parts))


def _map_law(kernel, fn):
    laws = {}
    for (n, i), law in kernel.laws.items():
        laws[(n, i)] = [(fn(n, i, parts), p) for parts, p in law]
    return TabulatedKernel(laws, kernel.nmax, kernel.kappa, kernel.allow_zero)


def death_coupling_kernel(kernel):
    """Same kernel, except that size-1 particles die: q_1^(i)(∅) = 1."""
    if isinstance(kernel, TabulatedKernel):
        return _map_law(kernel, _kill_singletons)
    return _Wrapped(kernel, _kill_singletons)


def conservation_kernel(kernel):
    """Pad every outcome at n ≥ 2 with (1,1) parts up to total n."""
    if isinstance(kernel, TabulatedKernel):
        out = _map_law(kernel, _pad)
    else:
        out = _Wrapped(kernel, _pad)
    out.conservative_from = 2
    return out


@dataclass
class MBTree:
    """Arena-stored rooted tree; nodes are numbered in breadth-first order.

    ``label_node[b]`` is the node holding label ``label_ids[b]``; for a full
    sample the labels 1..n are a uniform random order of the n mass units.
    """

    parent: np.ndarray
    size: np.ndarray
    type: np.ndarray
    depth: np.ndarray
    child_start: np.ndarray
    child_count: np.ndarray
    label_node: np.ndarray = None
    label_ids: np.ndarray = None

    @classmethod
    def from_parents(cls, parent, size, typ):
        """Build an arena from any parent array; nodes are renumbered breadth first."""
        parent = np.asarray(parent, dtype=np.int64)
        kids = defaultdict(list)
        root = None
        for v, p in enumerate(parent):
            if p < 0:
                root = v
            else:
                kids[int(p)].append(v)
        order = [root]
        for v in order:
            kids[v].sort(key=lambda c: (-size[c], -typ[c]))
            order.extend(kids[v])
        new = {v: k for k, v in enumerate(order)}
        m = len(order)
        par = np.full(m, -1, dtype=np.int64)
        dep = np.zeros(m, dtype=np.int64)
        cs = np.zeros(m, dtype=np.int64)
        cc = np.zeros(m, dtype=np.int64)
        for k, v in enumerate(order):
            if parent[v] >= 0:
                par[k] = new[int(parent[v])]
                dep[k] = dep[par[k]] + 1
            if kids[v]:
                cs[k] = new[kids[v][0]]
                cc[k] = len(kids[v])
        sz = np.array([size[v] for v in order], dtype=np.int64)
        ty = np.array([typ[v] for v in order], dtype=np.int64)
        return cls(par, sz, ty, dep, cs, cc), new

    @property
    def n_nodes(self):
        return len(self.parent)

    @property
    def root_size(self):
        return int(self.size[0])

    @property
    def height(self):
        return int(self.depth.max())

    @property
    def heights(self):
        return self.depth

    def children(self, u):
        a = self.child_start[u]
        return range(a, a + self.child_count[u]) if self.child_count[u] else range(0)

    def child_mass(self):
        out = np.zeros(self.n_nodes, dtype=np.int64)
        np.add.at(out, self.parent[1:], self.size[1:])
        return out

    def partition_at(self, u):
        kids = self.children(u)
        return DiscreteTypedPartition(tuple((int(self.size[c]), int(self.type[c])) for c in kids),
                                      int(self.size[u]), allow_zero=True)

    def node_of_label(self, b):
        ids = self.label_ids if self.label_ids is not None else np.arange(1, len(self.label_node) + 1)
        hit = np.nonzero(ids == b)[0]
        if len(hit) == 0:
            raise KeyError(f"unknown label {b}")
        return int(self.label_node[hit[0]])

    def dump(self):
        """One line per node: ``parent size type``; the root has parent -1."""
        return "".join(f"{p} {s} {t}\n" for p, s, t in zip(self.parent, self.size, self.type))

    @classmethod
    def load(cls, text):
        rows = [list(map(int, line.split())) for line in text.splitlines() if line.strip()]
        arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
        tree, _ = cls.from_parents(arr[:, 0], arr[:, 1], arr[:, 2])
        return tree


def _label(tree, rng):
    units = tree.size - tree.child_mass()
    if np.any(units < 0):
        raise ValueError("children outweigh their parent")
    holders = np.repeat(np.arange(tree.n_nodes), units)
    tree.label_node = rng.permutation(holders)
    tree.label_ids = np.arange(1, len(holders) + 1)
    return tree


def _sample_generic(kernel, n, i, rng, node_cap):
    parent, size, typ, depth = [-1], [n], [i], [0]
    cstart, ccount = [0], [0]
    head = 0
    while head < len(size):
        m, j = size[head], typ[head]
        if m == 0 and not getattr(kernel, "expand_zero", False):
            head += 1
            continue
        lam = kernel.sample(m, j, rng)
        if len(size) + len(lam) > node_cap:
            raise NodeCapExceeded(node_cap)
        cstart[head] = len(size)
        ccount[head] = len(lam)
        for s, t in lam.parts:
            parent.append(head)
            size.append(s)
            typ.append(t)
            depth.append(depth[head] + 1)
            cstart.append(0)
            ccount.append(0)
        head += 1
    return tuple(np.asarray(a, dtype=np.int64) for a in (parent, size, typ, depth, cstart, ccount))


def sample_mb_tree(kernel, n, i, rng, node_cap=DEFAULT_NODE_CAP, label=True):
    """Sample T_n^(i) generation by generation from ``kernel``."""
    if n < 1:
        raise ValueError("n must be positive")
    if hasattr(kernel, "sample_arena"):
        arrays = kernel.sample_arena(n, i, draw_seed(rng), node_cap)
    else:
        arrays = _sample_generic(kernel, n, i, rng, node_cap)
    tree = MBTree(*arrays)
    return _label(tree, rng) if label else tree


@dataclass
class WeightedNodeMeasure:
    nodes: np.ndarray
    masses: np.ndarray


def leaf_mass_measure(tree, n=None):
    """Mass (size − children's sizes)/n at every node, restricted to its support."""
    n = tree.root_size if n is None else n
    units = tree.size - tree.child_mass()
    nodes = np.nonzero(units)[0]
    return WeightedNodeMeasure(nodes, units[nodes] / n)


def tagged_transition_prob(kernel, m, j, l, k):
    """One-step probability of the block holding a tagged unit, (m,j) → (l,k)."""
    if m == 1:
        return 1.0 if (l, k) == (m, j) else 0.0
    if not kernel.enumerable:
        raise NotImplementedError("tagged transitions need an enumerable kernel")
    return sum(p * (l / m) * lam.multiplicity(l, k) for lam, p in kernel.support(m, j))


def tagged_transition_row(kernel, m, j):
    """All nonzero transitions out of (m, j), as a dict {(l, k): p}."""
    if m == 1:
        return {(1, j): 1.0}
    row = defaultdict(float)
    for lam, p in kernel.support(m, j):
        for s, t in set(lam.parts):
            if s > 0:
                row[(s, t)] += p * (s / m) * lam.multiplicity(s, t)
    return dict(row)


@dataclass
class TaggedPath:
    sizes: np.ndarray
    types: np.ndarray
    absorbed: bool

    @property
    def absorption_time(self):
        return len(self.sizes) - 1


def sample_tagged_chain(kernel, n, i, rng, max_steps=10**7):
    """Size-type path of the block holding one tagged unit, until size 1."""
    if isinstance(kernel, TabulatedKernel) and n <= kernel.nmax:
        sizes, types, status = core.tab_tagged_chain(*kernel.tables(), n, i, draw_seed(rng), max_steps)
        return TaggedPath(sizes, types, status == 0)
    sizes, types = [n], [i]
    m, j = n, i
    absorbed = True
    while m > 1:
        if len(sizes) > max_steps:
            raise StepCapExceeded(max_steps)
        lam = kernel.sample(m, j, rng)
        u = rng.random() * m
        acc = 0
        nxt = None
        for s, t in lam.parts:
            acc += s
            if u < acc:
                nxt = (s, t)
                break
        if nxt is None:
            absorbed = False
            break
        m, j = nxt
        sizes.append(m)
        types.append(j)
    return TaggedPath(np.array(sizes), np.array(types), absorbed)


def reduced_marginal(tree, labels):
    """Subtree spanned by the root and the nodes holding ``labels``."""
    labels = list(labels)
    n_labels = len(tree.label_node)
    if any(b < 1 or b > n_labels for b in labels):
        raise ValueError(f"labels must lie in 1..{n_labels}")
    holders = [tree.node_of_label(b) for b in labels]
    keep = set()
    for v in holders:
        while v >= 0 and v not in keep:
            keep.add(v)
            v = int(tree.parent[v])
    order = sorted(keep)
    idx = {v: k for k, v in enumerate(order)}
    parent = [idx[int(tree.parent[v])] if tree.parent[v] >= 0 else -1 for v in order]
    sub, new = MBTree.from_parents(parent, [tree.size[v] for v in order], [tree.type[v] for v in order])
    sub.label_node = np.array([new[idx[v]] for v in holders], dtype=np.int64)
    sub.label_ids = np.array(labels, dtype=np.int64)
    return sub


def first_split_weight(lam, i, mode):
    """``1 − s₁·1{i₁=i}`` (critical) or ``1 − s₁`` (mixing) for ``λ/n``."""
    if not lam.parts:
        return 1.0
    s1, i1 = lam.parts[0]
    s1 = s1 / lam.total
    if mode == "critical":
        return 1.0 - s1 * (i1 == i)
    if mode == "mixing":
        return 1.0 - s1
    raise ValueError(f"unknown mode {mode!r}")


def split_functional_estimate(kernel, n, i, f, mode, samples, rng, gamma):
    """Monte Carlo n^γ·E[(1 − s₁·1{i₁=i}) f(λ/n)] with its standard error."""
    vals = np.empty(samples)
    for r in range(samples):
        lam = kernel.sample(n, i, rng)
        vals[r] = first_split_weight(lam, i, mode) * f(lam)
    scale = n**gamma
    return scale * vals.mean(), scale * vals.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0

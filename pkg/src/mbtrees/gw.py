"""Multi-type Galton-Watson trees conditioned on their number of type-1 vertices."""

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import networkx as nx
import numpy as np

from ._kernels import core
from .errors import SpecError
from .mb_core import DEFAULT_NODE_CAP, MBTree, SplittingKernel, _label, draw_seed
from .partitions import DiscreteTypedPartition

CRIT_TOL = 1e-8
COUNT_CEILING = 5000


@dataclass(frozen=True)
class GWSpec:
    """Finite offspring laws: ``offspring[i-1]`` lists (z, probability) for type i."""

    offspring: tuple
    aperiodic: bool = True

    def __post_init__(self):
        laws = tuple(tuple((tuple(int(x) for x in z), float(p)) for z, p in law if p > 0)
                     for law in self.offspring)
        object.__setattr__(self, "offspring", laws)

    @property
    def kappa(self):
        return len(self.offspring)

    def mean_matrix(self):
        M = np.zeros((self.kappa, self.kappa))
        for i, law in enumerate(self.offspring):
            for z, p in law:
                M[i] += p * np.asarray(z, dtype=float)
        return M

    def validate(self, require_critical=True):
        k = self.kappa
        if k < 1:
            raise SpecError("at least one type is required")
        for i, law in enumerate(self.offspring, start=1):
            if not law:
                raise SpecError(f"type {i}: empty offspring law")
            for z, p in law:
                if len(z) != k or min(z) < 0:
                    raise SpecError(f"type {i}: bad offspring vector {z}")
            total = sum(p for _, p in law)
            if abs(total - 1.0) > 1e-12:
                raise SpecError(f"type {i}: probabilities sum to {total}")
        if not any(sum(z) >= 2 for law in self.offspring for z, _ in law):
            raise SpecError("singular spec: no type can have two or more children")
        M = self.mean_matrix()
        g = nx.DiGraph()
        g.add_nodes_from(range(k))
        g.add_edges_from(zip(*np.nonzero(M > 0)))
        if not nx.is_strongly_connected(g):
            raise SpecError("mean matrix is not irreducible")
        if require_critical:
            rho = max(abs(np.linalg.eigvals(M)))
            if abs(rho - 1.0) > CRIT_TOL:
                raise SpecError(f"spectral radius {rho} is not 1")
        return self

    @classmethod
    def from_dict(cls, d):
        try:
            laws = [[(e["z"], e["p"]) for e in law] for law in d["offspring"]]
        except (KeyError, TypeError) as exc:
            raise SpecError(f"GW spec entry malformed: {exc!r}") from None
        return cls(tuple(laws), bool(d.get("aperiodic", True))).validate()

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_json(self):
        return json.dumps({"offspring": [[{"z": list(z), "p": p} for z, p in law] for law in self.offspring]})


@dataclass(frozen=True)
class PerronData:
    M: np.ndarray
    a: np.ndarray
    b: np.ndarray
    Qijk: np.ndarray
    sigma2: float
    sigma1_2: float
    Qmat: np.ndarray
    chi: np.ndarray

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    def b_z(self, z):
        return float(np.dot(self.b, z))


def _power(A, tol=1e-12, max_iter=10**6):
    # (A + I)/2 shares the Perron vector and is aperiodic
    B = 0.5 * (A + np.eye(len(A)))
    v = np.full(len(A), 1.0 / len(A))
    for _ in range(max_iter):
        w = B @ v
        w /= w.sum()
        if np.max(np.abs(w - v)) < tol:
            return w
        v = w
    raise SpecError("power iteration did not converge")


def perron_data(spec):
    M = spec.mean_matrix()
    k = spec.kappa
    b = _power(M)
    a = _power(M.T)
    rho = float((a @ M @ b) / (a @ b))
    if abs(rho - 1.0) > CRIT_TOL:
        raise SpecError(f"spectral radius {rho} is not 1")
    a = a / a.sum()
    b = b / (a @ b)
    Q = np.zeros((k, k, k))
    for i, law in enumerate(spec.offspring):
        for z, p in law:
            z = np.asarray(z, dtype=float)
            Q[i] += p * (np.outer(z, z) - np.diag(z))
    sigma2 = float(np.einsum("i,j,k,ijk->", a, b, b, Q))
    if not sigma2 > 0:
        raise SpecError("degenerate offspring variance")
    Qmat = (b[None, :] * M) / b[:, None]
    np.fill_diagonal(Qmat, 0.0)
    np.fill_diagonal(Qmat, -Qmat.sum(axis=1))
    return PerronData(M, a, b, Q, sigma2, sigma2 / (a[0] * b[0] ** 2), Qmat, a * b)


def extinction_probabilities(spec, tol=1e-15, max_iter=10**6):
    """P(no type-1 descendant) per type, by monotone iteration from 0."""
    k = spec.kappa
    p = np.zeros(k)
    for _ in range(max_iter):
        new = np.zeros(k)
        for i in range(1, k):
            for z, pr in spec.offspring[i]:
                if z[0] == 0:
                    new[i] += pr * np.prod(p[1:] ** np.asarray(z[1:], dtype=float))
        if np.max(np.abs(new - p)) < tol:
            return new
        p = new
    raise SpecError("extinction iteration diverged")


def _roots(z):
    return tuple(t + 1 for t, c in enumerate(z) for _ in range(c))


class CountTable:
    """Exact laws of #₁ for trees and suffix forests up to ``n_max``.

    ``tree[i-1, m] = P(#₁T^(i) = m)``; ``forest[row, m]`` holds the same for
    the forest of roots ``row_roots[row]``.
    """

    def __init__(self, spec, n_max, ceiling=COUNT_CEILING):
        if n_max > ceiling:
            raise ValueError(f"n_max={n_max} exceeds the ceiling {ceiling}")
        self.spec = spec
        self.n_max = N = int(n_max)
        K = spec.kappa
        rows, first, rest = {}, [], []

        def row(key):
            if key not in rows:
                r = row(key[1:]) if len(key) > 1 else -1
                rows[key] = len(first)
                first.append(key[0])
                rest.append(r)
            return rows[key]

        sup_ptr, sup_prob, sup_row, root_ptr, roots, suffix_row = [0], [], [], [0], [], []
        for law in spec.offspring:
            for z, pr in law:
                lst = _roots(z)
                sup_prob.append(pr)
                sup_row.append(row(lst) if lst else -1)
                for t in range(len(lst)):
                    roots.append(lst[t])
                    suffix_row.append(row(lst[t:]))
                root_ptr.append(len(roots))
            sup_ptr.append(len(sup_prob))
        R = len(first)
        self.row_roots = {v: k for k, v in rows.items()}
        self.p = extinction_probabilities(spec)
        T = np.zeros((K, N + 1))
        G = np.zeros((R, N + 1))
        T[:, 0] = self.p
        for r in range(R):
            G[r, 0] = T[first[r] - 1, 0] * (G[rest[r], 0] if rest[r] >= 0 else 1.0)

        # coefficients of the unknown T[j, n] (j ≥ 2) inside G[r, n]; constant in n
        coef = np.zeros((R, K))
        for r in range(R):
            if rest[r] >= 0:
                coef[r] = T[first[r] - 1, 0] * coef[rest[r]]
                if first[r] != 1:
                    coef[r, first[r] - 1] += G[rest[r], 0]
            elif first[r] != 1:
                coef[r, first[r] - 1] = 1.0
        A = np.zeros((K, K))
        for i in range(1, K):
            for k in range(sup_ptr[i], sup_ptr[i + 1]):
                if sup_row[k] >= 0:
                    A[i] += sup_prob[k] * coef[sup_row[k]]
        solver = np.linalg.inv(np.eye(K - 1) - A[1:, 1:]) if K > 1 else None

        known = np.zeros(R)
        for n in range(1, N + 1):
            t1 = 0.0
            for k in range(sup_ptr[0], sup_ptr[1]):
                r = sup_row[k]
                t1 += sup_prob[k] * (G[r, n - 1] if r >= 0 else float(n == 1))
            T[0, n] = t1
            for r in range(R):
                f, q = first[r], rest[r]
                if q < 0:
                    known[r] = t1 if f == 1 else 0.0
                else:
                    known[r] = ((t1 * G[q, 0]) if f == 1 else 0.0) + T[f - 1, 0] * known[q] \
                        + float(np.dot(T[f - 1, 1:n], G[q, n - 1:0:-1]))
            if K > 1:
                rhs = np.zeros(K)
                for i in range(1, K):
                    for k in range(sup_ptr[i], sup_ptr[i + 1]):
                        if sup_row[k] >= 0:
                            rhs[i] += sup_prob[k] * known[sup_row[k]]
                T[1:, n] = solver @ rhs[1:]
            G[:, n] = known + coef @ T[:, n]
        self.tree = T
        self.forest = G
        self.sup_ptr = np.array(sup_ptr, dtype=np.int64)
        self.sup_prob = np.array(sup_prob, dtype=np.float64)
        self.sup_row = np.array(sup_row, dtype=np.int64)
        self.root_ptr = np.array(root_ptr, dtype=np.int64)
        self.roots = np.array(roots, dtype=np.int64)
        self.suffix_row = np.array(suffix_row, dtype=np.int64)
        self._rows = rows

    def tree_law(self, i):
        return self.tree[i - 1]

    def forest_law(self, z):
        """P(#₁F = m), m ≤ n_max, for the forest with root counts ``z``."""
        return self._forest(tuple(int(x) for x in z)).copy()

    @lru_cache(maxsize=10**4)
    def _forest(self, z):
        key = _roots(z)
        if not key:
            out = np.zeros(self.n_max + 1)
            out[0] = 1.0
            return out
        if key in self._rows:
            return self.forest[self._rows[key]]
        out = self.tree[key[0] - 1]
        for t in key[1:]:
            out = np.convolve(out, self.tree[t - 1])[: self.n_max + 1]
        return out

    def sampler_arrays(self):
        return (self.tree, self.forest, self.sup_ptr, self.sup_prob, self.root_ptr, self.roots, self.suffix_row)


def count_tables(spec, n_max, ceiling=COUNT_CEILING):
    return CountTable(spec, n_max, ceiling)


def lattice(law, tol=0.0):
    """(offset, span) of the support of a nonnegative sequence."""
    idx = np.nonzero(np.asarray(law) > tol)[0]
    if len(idx) == 0:
        return None, 0
    span = 0
    for x in idx[1:] - idx[0]:
        span = math.gcd(span, int(x))
    return int(idx[0]), span or 1


def asymptotic_count_estimate(spec, z, n, span=1, perron=None):
    """Leading term (b_z/b₁)(2πσ₁²n³)^{-1/2}, times the lattice span."""
    pd = perron or perron_data(spec)
    return span * pd.b_z(z) / pd.b[0] / math.sqrt(2 * math.pi * pd.sigma1_2 * n**3)


def reduced_type1_law(spec, degree):
    """Law of the number of type-1 individuals in the first type-1 generation
    below a type-1 individual, truncated at ``degree``."""
    K = spec.kappa
    L = degree + 1

    def mul(a, b):
        return np.convolve(a, b)[:L]

    def power(a, e):
        out = np.zeros(L)
        out[0] = 1.0
        for _ in range(e):
            out = mul(out, a)
        return out

    def gen(law, H):
        out = np.zeros(L)
        for z, p in law:
            term = np.zeros(L)
            if z[0] < L:
                term[z[0]] = p
            for j in range(1, K):
                if z[j]:
                    term = mul(term, power(H[j], z[j]))
            out += term
        return out

    H = [np.zeros(L) for _ in range(K)]
    for _ in range(10**5):
        new = [np.zeros(L)] + [gen(spec.offspring[j], H) for j in range(1, K)]
        delta = max((np.max(np.abs(a - b)) for a, b in zip(new[1:], H[1:])), default=0.0)
        H = new
        if delta < 1e-18:
            break
    return gen(spec.offspring[0], H)


def otter_dwass_check(spec, n, p=1, counts=None):
    """(DP value, cycle-lemma value) for P(#₁F = n) with p type-1 roots."""
    counts = counts or count_tables(spec, n)
    z = np.zeros(spec.kappa, dtype=int)
    z[0] = p
    dp = float(counts.forest_law(z)[n])
    if n - p < 0:
        return dp, 0.0
    step = reduced_type1_law(spec, n)
    walk = np.zeros(n - p + 1)
    walk[0] = 1.0
    for _ in range(n):
        walk = np.convolve(walk, step)[: n - p + 1]
    return dp, p / n * float(walk[n - p])


def otter_dwass_table(spec, n_max, p_max, counts=None):
    """Arrays ``dp[p, n]`` and ``cycle[p, n]`` for 1 ≤ p ≤ p_max, 1 ≤ n ≤ n_max."""
    counts = counts or count_tables(spec, n_max)
    step = reduced_type1_law(spec, n_max)
    dp = np.zeros((p_max + 1, n_max + 1))
    cyc = np.zeros((p_max + 1, n_max + 1))
    for p in range(1, p_max + 1):
        z = np.zeros(spec.kappa, dtype=int)
        z[0] = p
        dp[p] = counts.forest_law(z)[: n_max + 1]
    walk = np.zeros(n_max + 1)
    walk[0] = 1.0
    for n in range(1, n_max + 1):
        walk = np.convolve(walk, step)[: n_max + 1]
        for p in range(1, min(p_max, n) + 1):
            cyc[p, n] = p / n * walk[n - p]
    return dp, cyc


def census_split_law(spec, n, i):
    """Root split law of T^(i) given #₁ = n, summed exactly over all trees.

    Probabilities are the exact rationals of the stored floats. Types other
    than 1 must not reach themselves without passing through type 1, so
    that every tree with n type-1 vertices is finite.
    """
    K = spec.kappa
    g = nx.DiGraph()
    g.add_nodes_from(range(2, K + 1))
    for j in range(2, K + 1):
        for z, _ in spec.offspring[j - 1]:
            g.add_edges_from((j, t + 1) for t in range(1, K) if z[t])
    if not nx.is_directed_acyclic_graph(g):
        raise ValueError("census needs the types ≥ 2 to form an acyclic graph")
    laws = [[(z, Fraction(p)) for z, p in law] for law in spec.offspring]

    def compositions(total, parts):
        if parts == 0:
            if total == 0:
                yield ()
            return
        for s in range(total + 1):
            for rest in compositions(total - s, parts - 1):
                yield (s,) + rest

    @lru_cache(maxsize=None)
    def weight(j, m):
        r = m - (j == 1)
        if r < 0:
            return Fraction(0)
        acc = Fraction(0)
        for z, p in laws[j - 1]:
            kids = _roots(z)
            for sizes in compositions(r, len(kids)):
                w = p
                for s, t in zip(sizes, kids):
                    w *= weight(t, s)
                    if not w:
                        break
                acc += w
        return acc

    total = weight(i, n)
    if not total:
        raise ValueError(f"P(#₁T^({i}) = {n}) = 0")
    out = {}
    for z, p in laws[i - 1]:
        kids = _roots(z)
        for sizes in compositions(n - (i == 1), len(kids)):
            w = p
            for s, t in zip(sizes, kids):
                w *= weight(t, s)
            if w:
                lam = DiscreteTypedPartition.ranked(list(zip(sizes, kids)), n, True)
                out[lam] = out.get(lam, Fraction(0)) + w / total
    return out


class GWKernel(SplittingKernel):
    """Splitting laws of a GW tree conditioned on its type-1 count."""

    allow_zero = True

    def __init__(self, spec, counts, expand_zero=False):
        self.spec = spec
        self.counts = counts
        self.kappa = spec.kappa
        self.expand_zero = expand_zero
        self.conservative_from = None

    @property
    def enumerable(self):
        return True

    def _check(self, n, i):
        if n > self.counts.n_max:
            raise ValueError(f"n={n} beyond count table range {self.counts.n_max}")
        if not self.counts.tree[i - 1, n] > 0:
            off, span = lattice(self.counts.tree[i - 1])
            raise ValueError(f"P(#₁T^({i}) = {n}) = 0; support lattice offset {off} span {span}")

    def support(self, n, i):
        self._check(n, i)
        T = self.counts.tree
        r = n - (i == 1)
        denom = T[i - 1, n]
        out = {}
        for z, pr in self.spec.offspring[i - 1]:
            for parts in _allocations(z, r):
                w = pr
                for j, sizes in enumerate(parts, start=1):
                    w *= math.factorial(len(sizes))
                    for s in set(sizes):
                        w /= math.factorial(sizes.count(s))
                    for s in sizes:
                        w *= T[j - 1, s]
                if w > 0:
                    lam = DiscreteTypedPartition.ranked(
                        [(s, j) for j, sizes in enumerate(parts, start=1) for s in sizes], n, True)
                    out[lam] = out.get(lam, 0.0) + w / denom
        return sorted(out.items(), key=lambda kv: kv[0].parts, reverse=True)

    def sample(self, n, i, rng):
        self._check(n, i)
        c = self.counts
        r = n - (i == 1)
        lo, hi = c.sup_ptr[i - 1], c.sup_ptr[i]
        w = np.array([c.sup_prob[k] * (c.forest[c.sup_row[k], r] if c.sup_row[k] >= 0 else float(r == 0))
                      for k in range(lo, hi)])
        k = lo + rng.choice(hi - lo, p=w / w.sum())
        parts = []
        a, b = c.root_ptr[k], c.root_ptr[k + 1]
        for t in range(a, b - 1):
            rt = c.roots[t]
            ws = c.tree[rt - 1, : r + 1] * c.forest[c.suffix_row[t + 1], r::-1]
            s = int(rng.choice(r + 1, p=ws / ws.sum()))
            parts.append((s, int(rt)))
            r -= s
        if a < b:
            parts.append((r, int(c.roots[b - 1])))
        return DiscreteTypedPartition.ranked(parts, n, True)

    def sample_arena(self, n, i, seed, node_cap):
        self._check(n, i)
        return core.gw_sample_tree(*self.counts.sampler_arrays(), n, i, seed, self.expand_zero, node_cap)


def _allocations(z, r):
    """All ways to give each root a size, as per-type nonincreasing size lists."""
    z = list(z)

    def multisets(count, total, cap):
        if count == 0:
            if total == 0:
                yield ()
            return
        for s in range(min(total, cap), -1, -1):
            for rest in multisets(count - 1, total - s, s):
                yield (s,) + rest

    def rec(j, total):
        if j == len(z):
            if total == 0:
                yield ()
            return
        for t in range(total + 1):
            for sizes in multisets(z[j], t, t):
                for rest in rec(j + 1, total - t):
                    yield (list(sizes),) + rest

    yield from rec(0, r)


def gw_splitting_kernel(spec, counts, expand_zero=False):
    return GWKernel(spec, counts, expand_zero)


def sample_conditioned_gw(spec, n, i, rng, with_zero_subtrees=False, counts=None, node_cap=DEFAULT_NODE_CAP):
    """T_n^(i): the GW tree conditioned on n type-1 vertices, in MB form.

    Node sizes count type-1 vertices below. Without ``with_zero_subtrees``
    the size-0 parts are kept as childless markers.
    """
    counts = counts or count_tables(spec, n)
    kernel = GWKernel(spec, counts, with_zero_subtrees)
    tree = MBTree(*kernel.sample_arena(n, i, draw_seed(rng), node_cap))
    return _label(tree, rng)


def kesten_bias(spec, perron=None):
    """Size-biased laws (b_z/b_j)ζ^(j)(z) and the spine successor matrix."""
    pd = perron or perron_data(spec)
    biased = []
    for j, law in enumerate(spec.offspring):
        biased.append([(z, pd.b_z(z) / pd.b[j] * p) for z, p in law if pd.b_z(z) > 0])
    successor = pd.b[None, :] * pd.M / pd.b[:, None]
    return biased, successor


def extinct_conditioned_offspring(spec):
    """Extinction probabilities p and the laws ζ_×^(i) of types with p_i > 0."""
    p = extinction_probabilities(spec)
    cross = {}
    for i in range(1, spec.kappa):
        if p[i] <= 0:
            continue
        law = []
        for z, pr in spec.offspring[i]:
            if z[0] == 0:
                law.append((z, pr * float(np.prod(p ** np.asarray(z, dtype=float))) / p[i]))
        cross[i + 1] = law
    return p, cross


def subcriticality_check(zeta_cross, kappa):
    """Largest spectral radius over irreducible blocks of the mean matrix of ζ_×."""
    if not zeta_cross:
        raise ValueError("empty extinct-conditioned family")
    M = np.zeros((kappa, kappa))
    for i, law in zeta_cross.items():
        for z, p in law:
            M[i - 1] += p * np.asarray(z, dtype=float)
    g = nx.DiGraph()
    g.add_nodes_from(zeta_cross)
    g.add_edges_from((i, j + 1) for i in zeta_cross for j in np.nonzero(M[i - 1])[0] if (j + 1) in zeta_cross)
    radius = 0.0
    for block in nx.strongly_connected_components(g):
        idx = [b - 1 for b in sorted(block)]
        radius = max(radius, float(max(abs(np.linalg.eigvals(M[np.ix_(idx, idx)])))))
    return radius, radius < 1 - CRIT_TOL

"""Self-similar multi-type fragmentations with finitely many dislocation atoms."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError, StepCapExceeded
from .partitions import MassPartition, rank_mass_partition

TAIL_FACTOR = 1e-6


@dataclass(frozen=True)
class DislocationSpec:
    """``measures[i-1]`` lists (rate, MassPartition) atoms of the type-i measure."""

    measures: tuple
    gamma: float

    def __post_init__(self):
        ms = tuple(tuple((float(w), s if isinstance(s, MassPartition) else rank_mass_partition(s))
                         for w, s in atoms) for atoms in self.measures)
        object.__setattr__(self, "measures", ms)
        self.validate()

    @property
    def kappa(self):
        return len(self.measures)

    def validate(self, tol=1e-12):
        if not self.gamma > 0:
            raise SpecError("gamma must be positive")
        splits = False
        for i, atoms in enumerate(self.measures, start=1):
            for w, s in atoms:
                if w <= 0:
                    raise SpecError(f"type {i}: rates must be positive")
                if abs(s.s0) > tol:
                    raise SpecError(f"type {i}: atom {s.atoms} loses mass")
                if any(t < 1 or t > self.kappa for t in s.types):
                    raise SpecError(f"type {i}: atom {s.atoms} has an unknown type")
                if len(s.atoms) == 1 and s.atoms[0][1] == i:
                    raise SpecError(f"type {i}: atom {s.atoms} is the identity")
                splits = splits or s.atoms[0][0] < 1
        if not splits:
            raise SpecError("no atom ever splits mass")
        return self

    def total_rate(self, i):
        return sum(w for w, _ in self.measures[i - 1])

    @classmethod
    def from_dict(cls, d):
        try:
            measures = [[(a["w"], [(m, t) for m, t in a["s"]]) for a in atoms] for atoms in d["measures"]]
            return cls(tuple(measures), float(d["gamma"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"dislocation spec entry malformed: {exc!r}") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_json(self):
        return json.dumps({"gamma": self.gamma, "measures": [
            [{"w": w, "s": [[m, t] for m, t in s.atoms]} for w, s in atoms] for atoms in self.measures]})


@dataclass(frozen=True)
class MAPParams:
    """Jump table of the tagged fragment: per type, rates w·s_n with jump −log s_n to type i_n."""

    rates: tuple
    jumps: tuple
    kappa: int

    def total_rate(self, i):
        return self.rates[i - 1]

    def psi(self, i, q):
        r, x, t = self.jumps[i - 1]
        same = t == i
        return float(np.sum(r[same] * (1.0 - np.exp(-q * x[same]))))

    def transform(self, i, j, q):
        """λ_ij·E[e^{−qB_ij}] = Σ w·s_n^{1+q}·1{i_n=j}."""
        r, x, t = self.jumps[i - 1]
        sel = t == j
        return float(np.sum(r[sel] * np.exp(-q * x[sel])))

    def rate(self, i, j):
        return self.transform(i, j, 0.0)

    def jump_law(self, i, j):
        """Support and probabilities of B_ij."""
        r, x, t = self.jumps[i - 1]
        sel = t == j
        vals, inv = np.unique(x[sel], return_inverse=True)
        probs = np.bincount(inv, weights=r[sel]) / r[sel].sum() if sel.any() else np.array([])
        return vals, probs

    def generator(self):
        G = np.zeros((self.kappa, self.kappa))
        for i in range(1, self.kappa + 1):
            for j in range(1, self.kappa + 1):
                if i != j:
                    G[i - 1, j - 1] = self.rate(i, j)
            G[i - 1, i - 1] = -G[i - 1].sum()
        return G


def map_params(d):
    rates, jumps = [], []
    for atoms in d.measures:
        r, x, t = [], [], []
        for w, s in atoms:
            for m, typ in s.atoms:
                r.append(w * m)
                x.append(-math.log(m))
                t.append(typ)
        rates.append(sum(w for w, _ in atoms))
        jumps.append((np.array(r), np.array(x), np.array(t, dtype=np.int64)))
    return MAPParams(tuple(rates), tuple(jumps), d.kappa)


def atom_sum(d, i, j, q):
    """Σ_atoms w·Σ_n s_n^{1+q}·1{i_n=j}, straight from the measure."""
    return sum(w * sum(m ** (1 + q) for m, t in s.atoms if t == j) for w, s in d.measures[i - 1])


@dataclass
class MAPPath:
    """Event times and the values of (ξ, K) from each event on; index 0 is the start."""

    times: np.ndarray
    xi: np.ndarray
    types: np.ndarray
    horizon: float


def simulate_map_path(p, i, horizon, rng, stop_factor=None, gamma=None, max_events=10**7):
    """Compound-Poisson (ξ, K) from (0, i) up to MAP time ``horizon``.

    With ``stop_factor`` the path instead runs until e^{−γξ} < stop_factor.
    """
    if stop_factor is not None and gamma is None:
        raise ValueError("stop_factor needs gamma")
    cums = []
    for r, _, _ in p.jumps:
        c = np.cumsum(r)
        cums.append(c / c[-1] if len(c) else c)
    times, xi, types = [0.0], [0.0], [i]
    t, x, j = 0.0, 0.0, i
    while True:
        if stop_factor is not None and math.exp(-gamma * x) < stop_factor:
            break
        rate = p.rates[j - 1]
        if rate <= 0:
            raise ValueError(f"type {j} never moves")
        t += rng.exponential(1.0 / rate)
        if stop_factor is None and t >= horizon:
            break
        k = min(int(np.searchsorted(cums[j - 1], rng.random(), side="right")), len(cums[j - 1]) - 1)
        _, jx, jt = p.jumps[j - 1]
        x += jx[k]
        j = int(jt[k])
        times.append(t)
        xi.append(x)
        types.append(j)
        if len(times) > max_events:
            raise StepCapExceeded(max_events)
    end = horizon if stop_factor is None else t
    return MAPPath(np.array(times), np.array(xi), np.array(types, dtype=np.int64), end)


@dataclass
class LampertiPath:
    """Real times at which the MAP events happen, with X = e^{−ξ} and J after each."""

    times: np.ndarray
    X: np.ndarray
    J: np.ndarray
    D1: float
    tail_bound: float


def lamperti_transform(path, gamma, p=None, tail_tol=None):
    """Exact piecewise time change t = ∫ e^{−γξ}; D₁ truncated at the path end."""
    ends = np.append(path.times[1:], path.horizon)
    lengths = ends - path.times
    pieces = lengths * np.exp(-gamma * path.xi)
    real = np.concatenate([[0.0], np.cumsum(pieces)])
    factor = math.exp(-gamma * path.xi[-1])
    tail = 0.0
    if p is not None:
        min_rate = min(r for r in p.rates if r > 0)
        pos = [x[x > 0].min() for _, x, _ in p.jumps if np.any(x > 0)]
        tail = factor / (min_rate * (1.0 - math.exp(-gamma * min(pos))))
        if tail_tol is not None and tail > tail_tol:
            raise ValueError(f"horizon too short: tail bound {tail} > {tail_tol}")
    return LampertiPath(real[:-1], np.exp(-path.xi), path.types, float(real[-1]), tail)


def absorption_time(d, i, rng, p=None, stop_factor=TAIL_FACTOR):
    """One draw of D₁, the Lamperti absorption time of the tagged fragment."""
    p = p or map_params(d)
    path = simulate_map_path(p, i, None, rng, stop_factor=stop_factor, gamma=d.gamma)
    return lamperti_transform(path, d.gamma).D1


BROWNIAN_BIASED_MASS = 2.0 * math.sqrt(2.0 / math.pi)


def brownian_density(x):
    """Density of the binary Brownian dislocation measure in s₁ on [1/2, 1)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where((x >= 0.5) & (x < 1), np.sqrt(2.0 / (math.pi * x**3 * (1 - x) ** 3)), 0.0)


def brownian_split_sample(rng):
    """s₁ drawn from (1−s₁)·ν_Br normalized; total mass is BROWNIAN_BIASED_MASS.

    The biased CDF is 1 − √((1−x)/x), inverted in closed form.
    """
    u = rng.random()
    s1 = 1.0 / (1.0 + (1.0 - u) ** 2)
    return MassPartition(((s1, 1), (1.0 - s1, 1)))


@dataclass
class MarginalTree:
    """Real tree on the root, branch points and k labeled leaves.

    ``history[v]`` lists (height, type, mass) after each event on the branch into v
    that moved every label of the block into the same child.
    """

    parent: list = field(default_factory=list)
    heights: list = field(default_factory=list)
    types: list = field(default_factory=list)
    label_node: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    tail_bound: float = 0.0

    def add(self, parent, height, typ):
        self.parent.append(parent)
        self.heights.append(height)
        self.types.append(typ)
        self.history.append([])
        return len(self.parent) - 1

    def node_of_label(self, b):
        try:
            return self.label_node[b]
        except KeyError:
            raise KeyError(f"unknown label {b}") from None

    def depth(self, b):
        return self.heights[self.node_of_label(b)]

    def split_height(self, a, b):
        """Height at which the paths to leaves a and b separate."""
        anc = set()
        v = self.node_of_label(a)
        while v >= 0:
            anc.add(v)
            v = self.parent[v]
        v = self.node_of_label(b)
        while v not in anc:
            v = self.parent[v]
        return self.heights[v]


def simulate_marginal_tree(d, i, k, rng, stop_factor=TAIL_FACTOR, max_events=10**7):
    """Marginal of the fragmentation tree on leaves 1..k, by block recursion."""
    if k < 1:
        raise ValueError("k must be positive")
    tree = MarginalTree()
    root = tree.add(-1, 0.0, i)
    atoms = [(np.array([w for w, _ in a]), [s for _, s in a]) for a in d.measures]
    cum_w = [np.cumsum(w) / w.sum() if len(w) else w for w, _ in atoms]
    rates = [w.sum() for w, _ in atoms]
    stack = [(root, 0.0, list(range(1, k + 1)), 1.0, i, [])]
    events = 0
    min_x = stop_factor ** (1.0 / d.gamma)
    while stack:
        node, t, labels, x, j, hist = stack.pop()
        while True:
            if len(labels) == 1 and x < min_x:
                leaf = tree.add(node, t, j)
                tree.history[leaf] = hist
                tree.label_node[labels[0]] = leaf
                break
            rate = rates[j - 1]
            if rate <= 0:
                raise ValueError(f"type {j} never splits")
            t += rng.exponential(x**d.gamma / rate)
            events += 1
            if events > max_events:
                raise StepCapExceeded(max_events)
            a = min(int(np.searchsorted(cum_w[j - 1], rng.random(), side="right")), len(cum_w[j - 1]) - 1)
            s = atoms[j - 1][1][a]
            slots = rng.choice(len(s.atoms), size=len(labels), p=s.masses / s.masses.sum())
            if np.all(slots == slots[0]):
                m, j = s.atoms[slots[0]]
                x *= m
                hist.append((t, j, x))
                continue
            branch = tree.add(node, t, j)
            tree.history[branch] = hist
            for slot in np.unique(slots):
                m, typ = s.atoms[slot]
                members = [b for b, sl in zip(labels, slots) if sl == slot]
                stack.append((branch, t, members, x * m, typ, []))
            break
    return tree

"""Typed partitions, the rank map, paintboxes and the Prokhorov metric."""

import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteTypedPartition:
    """Finite (size, type) parts of an integer ``total``, largest first."""

    parts: tuple
    total: int
    allow_zero: bool = False

    @classmethod
    def ranked(cls, parts, total, allow_zero=False):
        parts = tuple(sorted(((int(s), int(t)) for s, t in parts), reverse=True))
        return cls(parts, int(total), allow_zero)

    def __len__(self):
        return len(self.parts)

    @property
    def sizes(self):
        return [s for s, _ in self.parts]

    @property
    def types(self):
        return [t for _, t in self.parts]

    @property
    def mass(self):
        return sum(self.sizes)

    def multiplicity(self, size, typ):
        return sum(1 for p in self.parts if p == (size, typ))

    def scaled(self):
        """The mass partition ``λ/n``."""
        return MassPartition(tuple((s / self.total, t) for s, t in self.parts if s > 0))


def validate_partition(p, kappa=None):
    """True iff ``p`` is a well-formed typed partition of ``p.total``."""
    if sum(s for s, _ in p.parts) > p.total:
        return False
    prev = None
    for s, t in p.parts:
        if t < 1 or (kappa is not None and t > kappa):
            return False
        if s < 0 or (s == 0 and not p.allow_zero):
            return False
        if prev is not None and (s, t) > prev:
            return False
        prev = (s, t)
    return True


@dataclass(frozen=True)
class MassPartition:
    """Ranked (mass, type) atoms with masses summing to at most one."""

    atoms: tuple = ()

    @property
    def s0(self):
        return 1.0 - sum(m for m, _ in self.atoms)

    @property
    def masses(self):
        return np.array([m for m, _ in self.atoms], dtype=float)

    @property
    def types(self):
        return [t for _, t in self.atoms]

    def is_conservative(self, tol=MASS_TOL):
        return abs(self.s0) <= tol

    def to_json(self):
        return json.dumps([[float(f"{m:.17g}"), int(t)] for m, t in self.atoms])

    @classmethod
    def from_json(cls, text):
        return rank_mass_partition([(float(m), int(t)) for m, t in json.loads(text)])


def rank_mass_partition(s, tol=MASS_TOL):
    """Sort atoms by mass decreasing, ties by type decreasing; zero masses dropped."""
    atoms = [(float(m), int(t)) for m, t in s]
    if any(m < 0 for m, _ in atoms):
        raise ValueError("negative mass")
    if sum(m for m, _ in atoms) > 1.0 + tol:
        raise ValueError("masses sum to more than one")
    atoms = [(m, t) for m, t in atoms if m > 0]
    atoms.sort(key=lambda a: (-a[0], -a[1]))
    return MassPartition(tuple(atoms))


@dataclass(frozen=True)
class TypedSetPartition:
    """Typed blocks of {1..k}, ordered by least element."""

    blocks: tuple
    k: int

    def block_of(self, index):
        for members, typ in self.blocks:
            if index in members:
                return members, typ
        raise KeyError(index)


def paintbox_sample(s, k, rng, tol=MASS_TOL):
    """Assign 1..k independently to the atoms of a conservative ``s``."""
    if not s.is_conservative(tol):
        raise ValueError("paintbox needs a conservative mass partition")
    if k < 1:
        raise ValueError("k must be positive")
    p = s.masses / s.masses.sum()
    slots = rng.choice(len(p), size=k, p=p)
    blocks = {}
    for idx, slot in enumerate(slots, start=1):
        blocks.setdefault(int(slot), []).append(idx)
    ordered = sorted(blocks.items(), key=lambda kv: kv[1][0])
    return TypedSetPartition(tuple((tuple(m), s.atoms[slot][1]) for slot, m in ordered), k)


@dataclass(frozen=True)
class AtomicMeasure:
    points: np.ndarray
    masses: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float).reshape(-1))
        if len(self.masses) != len(pts):
            raise ValueError("one mass per point")
        if np.any(self.masses < 0):
            raise ValueError("negative mass")

    @property
    def total(self):
        return float(self.masses.sum())


def _max_flow(mu, nu, dist, eps):
    g = nx.DiGraph()
    for a, m in enumerate(mu.masses):
        g.add_edge("s", ("a", a), capacity=float(m))
    for b, m in enumerate(nu.masses):
        g.add_edge(("b", b), "t", capacity=float(m))
    for a, b in zip(*np.nonzero(dist <= eps)):
        g.add_edge(("a", int(a)), ("b", int(b)))
    if not g.has_node("s") or not g.has_node("t"):
        return 0.0
    return nx.maximum_flow_value(g, "s", "t")


def prokhorov_distance(mu, nu, tol=1e-9):
    """Prokhorov distance between two atomic measures of equal total mass.

    The unmatched mass at radius e, ``F(e) = total - maxflow(e)``, is a
    nonincreasing step function jumping only at pairwise distances, so the
    answer is ``min(F(d[r-1]), d[r])`` at the first breakpoint ``d[r]`` with
    ``d[r] >= F(d[r])``. That breakpoint is located by bisection.
    """
    total = mu.total
    if abs(total - nu.total) > tol:
        raise ValueError(f"mass mismatch: {total} vs {nu.total}")
    if total <= 0:
        return 0.0
    dist = np.linalg.norm(mu.points[:, None, :] - nu.points[None, :, :], axis=2)
    cand = np.unique(np.concatenate([[0.0], dist.ravel()]))
    cache = {}

    def unmatched(r):
        if r not in cache:
            cache[r] = max(0.0, total - _max_flow(mu, nu, dist, cand[r] + 1e-12))
        return cache[r]

    lo, hi = 0, len(cand) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cand[mid] >= unmatched(mid) - tol:
            hi = mid
        else:
            lo = mid + 1
    best = cand[lo]
    if lo > 0:
        best = min(best, unmatched(lo - 1))
    return float(min(best, total))


def partition_measure(s, kappa):
    """``s0·δ_0 + Σ s_n δ_{s_n e_{i_n}}`` on the κ-cube."""
    pts = [np.zeros(kappa)]
    ms = [max(s.s0, 0.0)]
    for m, t in s.atoms:
        e = np.zeros(kappa)
        e[t - 1] = m
        pts.append(e)
        ms.append(m)
    return AtomicMeasure(np.array(pts), np.array(ms))


def partition_distance(a, b, kappa=None):
    if kappa is None:
        kappa = max([1] + a.types + b.types)
    return prokhorov_distance(partition_measure(a, kappa), partition_measure(b, kappa))

"""Leaf-labeled metric trees, matched-label tree distance and KS statistics."""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .frag import MarginalTree


@dataclass(frozen=True)
class LeafLabeledMetricTree:
    """Root-augmented distance matrix: row/column 0 is the root, then the labels in order."""

    labels: tuple
    matrix: np.ndarray

    @property
    def depths(self):
        return self.matrix[0, 1:]

    @property
    def distances(self):
        return self.matrix[1:, 1:]

    @property
    def is_integer(self):
        return np.issubdtype(self.matrix.dtype, np.integer)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["root"] + list(self.labels))
        for row in self.matrix.tolist():
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        labels = tuple(int(b) for b in rows[0][1:])
        body = rows[1:]
        is_int = all(x.lstrip("-").isdigit() for r in body for x in r)
        m = np.array([[int(x) if is_int else float(x) for x in r] for r in body])
        return cls(labels, m)


def _ancestry(parent, v):
    out = []
    while v >= 0:
        out.append(v)
        v = int(parent[v])
    return out


def distance_matrix(tree, labels):
    """Depths and pairwise leaf distances through lowest common ancestors."""
    labels = tuple(labels)
    if isinstance(tree, MarginalTree):
        parent, height = tree.parent, np.asarray(tree.heights, dtype=float)
    else:
        parent, height = tree.parent, np.asarray(tree.depth, dtype=np.int64)
    nodes = [tree.node_of_label(b) for b in labels]
    paths = [_ancestry(parent, v) for v in nodes]
    k = len(labels)
    m = np.zeros((k + 1, k + 1), dtype=height.dtype)
    for a in range(k):
        ha = height[nodes[a]]
        m[0, a + 1] = m[a + 1, 0] = ha
        anc = set(paths[a])
        for b in range(a + 1, k):
            lca = next(v for v in paths[b] if v in anc)
            d = ha + height[nodes[b]] - 2 * height[lca]
            m[a + 1, b + 1] = m[b + 1, a + 1] = d
    return LeafLabeledMetricTree(labels, m)


def four_point_violation(t):
    """Largest excess of the four-point condition over all quadruples (root included)."""
    d = np.asarray(t.matrix, dtype=float)
    n = len(d)
    worst = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                for e in range(c + 1, n):
                    s = sorted((d[a, b] + d[c, e], d[a, c] + d[b, e], d[a, e] + d[b, c]))
                    worst = max(worst, s[2] - s[1])
    return worst


def gromov_products_ok(t):
    """d(root,a) + d(root,b) − d(a,b) is nonnegative, and even for integer trees."""
    d = t.matrix
    g = d[0, 1:, None] + d[0, None, 1:] - d[1:, 1:]
    ok = bool(np.all(g >= -1e-9))
    if t.is_integer:
        ok = ok and bool(np.all(g % 2 == 0))
    return ok


def labeled_tree_distance(a, b):
    """Half the sup-norm gap of the root-augmented matrices under the identity matching."""
    if tuple(a.labels) != tuple(b.labels):
        raise ValueError("label sets differ")
    return 0.5 * float(np.max(np.abs(np.asarray(a.matrix, float) - np.asarray(b.matrix, float))))


def ks_statistic(sample_a, sample_b=None, cdf=None):
    """Two-sample KS statistic, or one-sample against ``cdf``."""
    a = np.asarray(sample_a, dtype=float)
    if a.size == 0:
        raise ValueError("empty sample")
    if cdf is not None:
        return float(stats.kstest(a, cdf).statistic)
    b = np.asarray(sample_b, dtype=float)
    if b.size == 0:
        raise ValueError("empty sample")
    return float(stats.ks_2samp(a, b).statistic)


def ks_critical(n, m=None, alpha=0.01):
    """Asymptotic critical value of the KS statistic."""
    c = np.sqrt(-0.5 * np.log(alpha / 2))
    eff = n if m is None else n * m / (n + m)
    return float(c / np.sqrt(eff))

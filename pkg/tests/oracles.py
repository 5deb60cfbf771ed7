"""Independent reference computations used by the tests.

Nothing here calls into mbtrees; each oracle recomputes its quantity from
first principles (explicit enumeration, closed forms or quadrature).
"""

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, stats


# ---------------------------------------------------------------- GW trees


def gw_trees(laws, i, n):
    """Every planted GW tree of root type i with exactly n type-1 vertices.

    ``laws[i-1]`` lists (z, p). Trees are nested tuples (type, children);
    the children of a vertex with offspring vector z are listed type by type.
    Returns a list of (tree, exact probability).
    """
    laws = [[(tuple(z), Fraction(p)) for z, p in law] for law in laws]

    @lru_cache(maxsize=None)
    def build(j, m):
        r = m - (j == 1)
        if r < 0:
            return ()
        out = []
        for z, p in laws[j - 1]:
            kids = [t + 1 for t, c in enumerate(z) for _ in range(c)]
            for sizes in _compositions(r, len(kids)):
                options = [build(t, s) for t, s in zip(kids, sizes)]
                for combo in itertools.product(*options):
                    prob = p
                    for _, q in combo:
                        prob *= q
                    out.append(((j, tuple(c for c, _ in combo)), prob))
        return tuple(out)

    return list(build(i, n))


def _compositions(total, parts):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for s in range(total + 1):
        for rest in _compositions(total - s, parts - 1):
            yield (s,) + rest


def type1_count(tree):
    t, kids = tree
    return (t == 1) + sum(type1_count(c) for c in kids)


def census_root_law(laws, i, n):
    """{ranked root partition (size, type) tuple: conditional probability}."""
    trees = gw_trees(laws, i, n)
    total = sum(p for _, p in trees)
    out = {}
    for (t, kids), p in trees:
        key = tuple(sorted(((type1_count(c), c[0]) for c in kids), reverse=True))
        out[key] = out.get(key, Fraction(0)) + p / total
    return out, total


def binary_size_prob(n):
    """P(#T = n) for the critical binary GW tree: Catalan((n-1)/2)/2^n on odd n."""
    if n % 2 == 0:
        return 0.0
    m = (n - 1) // 2
    return math.comb(2 * m, m) / (m + 1) / 2.0**n


def binary_forest_prob(p, n):
    """P(#F = n) for p independent critical binary trees, by the ±1 walk."""
    if (n - p) % 2 or n < p:
        return 0.0
    ups = (n - p) // 2
    return p / n * math.comb(n, ups) / 2.0**n


# ---------------------------------------------------------------- Prokhorov


def prokhorov_bruteforce(pts_a, m_a, pts_b, m_b):
    """Prokhorov distance from the subset definition, by checking every subset.

    d = inf{e : mu(A) <= nu(A^e) + e and nu(B) <= mu(B^e) + e for all A, B}.
    """
    pts_a, pts_b = np.atleast_2d(pts_a), np.atleast_2d(pts_b)
    d = np.linalg.norm(pts_a[:, None, :] - pts_b[None, :, :], axis=2)

    def excess(dist, ma, mb, eps):
        worst = 0.0
        for mask in range(1, 2 ** len(ma)):
            idx = [k for k in range(len(ma)) if mask >> k & 1]
            near = np.any(dist[idx] <= eps + 1e-12, axis=0)
            worst = max(worst, sum(ma[k] for k in idx) - float(np.sum(np.asarray(mb)[near])))
        return worst

    breaks = sorted(set([0.0] + list(d.ravel())))
    best = float(max(sum(m_a), sum(m_b)))
    for lo, hi in zip(breaks, breaks[1:] + [math.inf]):
        f = max(excess(d, m_a, m_b, lo), excess(d.T, m_b, m_a, lo))
        if f <= lo + 1e-12:
            best = min(best, lo)
        elif f < hi:
            best = min(best, f)
    return best


# ---------------------------------------------------------------- growth


def remy_J_prob(n, k):
    """Exact P(J_n = k) for Rémy's algorithm: the root edge is one of 2l+1 edges at step l+1."""
    if k == 0:
        return 0.0
    edges = lambda step: 2 * (step - 1) + 1  # edges before gluing at this step
    logp = -math.log(edges(k))
    for step in range(k + 1, n + 1):
        logp += math.log1p(-1.0 / edges(step))
    return math.exp(logp)


def remy_component_weight(k):
    """E[1 − max(X, 1−X)] for X ~ Beta(k − 1/2, 1/2), the Rémy component k."""
    dist = stats.beta(k - 0.5, 0.5)
    val, _ = integrate.quad(lambda x: (1 - max(x, 1 - x)) * dist.pdf(x), 0, 1, limit=200, points=[0.5])
    return val


def remy_ell(k):
    """ℓ_k for Rémy from the Gamma-ratio formula with n_A = n_i = 1."""
    return math.exp(math.lgamma(k - 0.5) - math.lgamma(k)) / 2.0


# ---------------------------------------------------------------- Brownian


def brownian_nu(x):
    return math.sqrt(2.0 / (math.pi * x**3 * (1 - x) ** 3))


def brownian_biased_moments():
    """(total mass of (1−s₁)ν, mean of s₁ under the normalized biased law), by quadrature."""
    total, _ = integrate.quad(lambda x: (1 - x) * brownian_nu(x), 0.5, 1, limit=400)
    first, _ = integrate.quad(lambda x: x * (1 - x) * brownian_nu(x), 0.5, 1, limit=400)
    return total, first / total


# ---------------------------------------------------------------- RNG


def splitmix64_outputs(seed, count):
    """Reference splitmix64 outputs, written from the published constants."""
    mask = (1 << 64) - 1
    out, x = [], seed & mask
    for _ in range(count):
        x = (x + 0x9E3779B97F4A7C15) & mask
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def xoshiro256ss_outputs(state, count):
    """Reference xoshiro256** outputs from a given 4-word state."""
    mask = (1 << 64) - 1
    rotl = lambda v, k: ((v << k) | (v >> (64 - k))) & mask
    s0, s1, s2, s3 = state
    out = []
    for _ in range(count):
        out.append((rotl((s1 * 5) & mask, 7) * 9) & mask)
        t = (s1 << 17) & mask
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = rotl(s3, 45)
    return out

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbtrees.partitions import (AtomicMeasure, DiscreteTypedPartition, MassPartition, paintbox_sample,
                                partition_distance, partition_measure, prokhorov_distance,
                                rank_mass_partition, validate_partition)

from oracles import prokhorov_bruteforce


def test_validate_partition_examples():
    assert validate_partition(DiscreteTypedPartition(((3, 1), (2, 2)), 5))
    assert not validate_partition(DiscreteTypedPartition(((2, 2), (3, 1)), 5))
    assert not validate_partition(DiscreteTypedPartition(((2, 1), (2, 2)), 4))


def test_validate_rejects_overfull_zero_and_bad_types():
    assert not validate_partition(DiscreteTypedPartition(((4, 1), (2, 1)), 5))
    assert not validate_partition(DiscreteTypedPartition(((3, 1), (0, 1)), 3))
    assert validate_partition(DiscreteTypedPartition(((3, 1), (0, 1)), 3, allow_zero=True))
    assert not validate_partition(DiscreteTypedPartition(((3, 3),), 3), kappa=2)


def test_rank_examples():
    assert rank_mass_partition([(0.2, 2), (0.5, 1)]).atoms == ((0.5, 1), (0.2, 2))
    assert rank_mass_partition([(0.3, 1), (0.3, 2)]).atoms == ((0.3, 2), (0.3, 1))
    empty = rank_mass_partition([])
    assert empty.atoms == () and empty.s0 == 1.0


def test_rank_rejects_bad_input():
    with pytest.raises(ValueError):
        rank_mass_partition([(0.7, 1), (0.7, 1)])
    with pytest.raises(ValueError):
        rank_mass_partition([(-0.1, 1)])


def test_mass_partition_json_roundtrip():
    s = rank_mass_partition([(1 / 3, 1), (2 / 7, 2), (0.1, 1)])
    back = MassPartition.from_json(s.to_json())
    assert back == s


def test_paintbox_single_atom():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = paintbox_sample(MassPartition(((1.0, 3),)), 5, rng)
        assert p.blocks == (((1, 2, 3, 4, 5), 3),)


def test_paintbox_two_halves():
    rng = np.random.default_rng(1)
    s = MassPartition(((0.5, 1), (0.5, 2)))
    reps = 20000
    same = type1 = 0
    for _ in range(reps):
        p = paintbox_sample(s, 2, rng)
        same += len(p.blocks) == 1
        type1 += p.block_of(1)[1] == 1
    se = math.sqrt(0.25 / reps)
    assert abs(same / reps - 0.5) < 4 * se
    assert abs(type1 / reps - 0.5) < 4 * se


def test_paintbox_frequencies_match_masses():
    rng = np.random.default_rng(2)
    s = rank_mass_partition([(0.5, 1), (0.3, 2), (0.2, 3)])
    reps = 100000
    hits = np.zeros(4)
    for _ in range(reps):
        hits[paintbox_sample(s, 1, rng).block_of(1)[1]] += 1
    freq = hits[1:] / reps
    want = np.array([0.5, 0.3, 0.2])
    se = np.sqrt(want * (1 - want) / reps)
    assert np.all(np.abs(freq - want) < 3 * se)


def test_paintbox_needs_conservative():
    with pytest.raises(ValueError):
        paintbox_sample(MassPartition(((0.5, 1),)), 2, np.random.default_rng(0))


def test_prokhorov_examples():
    a = AtomicMeasure([[0.0, 0.0]], [1.0])
    assert prokhorov_distance(a, a) == 0.0
    assert prokhorov_distance(a, AtomicMeasure([[0.3, 0.0]], [1.0])) == pytest.approx(0.3, abs=1e-12)
    assert prokhorov_distance(a, AtomicMeasure([[2.0, 0.0]], [1.0])) == pytest.approx(1.0, abs=1e-12)


def test_prokhorov_mass_mismatch():
    with pytest.raises(ValueError):
        prokhorov_distance(AtomicMeasure([[0.0]], [1.0]), AtomicMeasure([[0.0]], [0.5]))


def test_partition_distance_type_flip():
    a, b = MassPartition(((1.0, 1),)), MassPartition(((1.0, 2),))
    want = prokhorov_bruteforce([[1.0, 0.0]], [1.0], [[0.0, 1.0]], [1.0])
    assert partition_distance(a, b) == pytest.approx(want, abs=1e-12)
    assert partition_distance(a, a) == 0.0


def test_partition_measure_puts_dust_at_origin():
    m = partition_measure(MassPartition(((0.5, 2),)), 2)
    assert m.total == pytest.approx(1.0)
    assert np.allclose(m.points[0], 0) and m.masses[0] == pytest.approx(0.5)


# ---------------------------------------------------------------- properties

atoms = st.lists(st.tuples(st.floats(0.001, 1.0), st.integers(1, 3)), min_size=1, max_size=6)


@st.composite
def mass_partitions(draw):
    raw = draw(atoms)
    scale = draw(st.floats(0.1, 1.0))
    total = sum(m for m, _ in raw)
    return rank_mass_partition([(m / total * scale, t) for m, t in raw])


@st.composite
def measures(draw, k_max=8, dim=2, total=1.0):
    k = draw(st.integers(1, k_max))
    pts = draw(st.lists(st.lists(st.floats(-1, 1), min_size=dim, max_size=dim), min_size=k, max_size=k))
    w = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    w = np.array(w) / sum(w) * total
    return AtomicMeasure(np.array(pts), w)


@given(mass_partitions())
def test_rank_idempotent_and_preserves_atoms(s):
    again = rank_mass_partition(s.atoms)
    assert again == s
    assert sorted(again.atoms) == sorted(s.atoms)


@given(st.lists(st.tuples(st.floats(0.0, 0.2), st.integers(1, 4)), max_size=5))
def test_rank_preserves_positive_atom_multiset(raw):
    s = rank_mass_partition(raw)
    assert sorted(s.atoms) == sorted((float(m), t) for m, t in raw if m > 0)
    assert all(a[0] >= b[0] for a, b in zip(s.atoms, s.atoms[1:]))


@settings(max_examples=60, deadline=None)
@given(measures(), measures(), measures())
def test_prokhorov_metric_axioms(mu, nu, rho):
    d = prokhorov_distance
    assert d(mu, mu) <= 1e-9
    assert abs(d(mu, nu) - d(nu, mu)) <= 1e-9
    assert d(mu, nu) <= d(mu, rho) + d(rho, nu) + 1e-9


@settings(max_examples=60, deadline=None)
@given(measures(k_max=4), measures(k_max=4))
def test_prokhorov_matches_subset_definition(mu, nu):
    want = prokhorov_bruteforce(mu.points, mu.masses, nu.points, nu.masses)
    assert prokhorov_distance(mu, nu) == pytest.approx(want, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(mass_partitions(), mass_partitions())
def test_partition_distance_bounded(a, b):
    assert 0.0 <= partition_distance(a, b, kappa=3) <= 1.0 + 1e-12


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 3)), max_size=5))
def test_ranked_discrete_partitions_validate(parts):
    total = sum(s for s, _ in parts) + 1
    p = DiscreteTypedPartition.ranked(parts, total, allow_zero=True)
    assert validate_partition(p, kappa=3)

import os
import subprocess
import sys

import numpy as np
import pytest

from mbtrees._kernels import BACKEND, backend
from mbtrees.gw import GWSpec, count_tables
from mbtrees.growth import GrowthSpec, build_brick_set
from mbtrees.models import KernelModel

from oracles import splitmix64_outputs, xoshiro256ss_outputs

try:
    compiled = backend("compiled")
except ImportError:
    compiled = None

py = backend("python")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

SPEC_B = GWSpec(([((0, 0), 0.25), ((0, 4), 0.75)],
                 [((0, 0), 0.5), ((1, 0), 0.25), ((0, 1), 0.25)])).validate()
TWO_BRICK = GrowthSpec((-1, 0, 1), (((-1, 0), 0.5), ((-1, 0, 1), 0.5)))


def same(a, b):
    if isinstance(a, tuple):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            same(x, y)
    elif isinstance(a, np.ndarray):
        assert a.dtype.kind == np.asarray(b).dtype.kind
        assert np.array_equal(a, b)
    else:
        assert a == b


def test_splitmix_known_answer():
    assert splitmix64_outputs(0, 1)[0] == 0xE220A8397B1DCDAF


def test_python_stream_matches_reference():
    state = splitmix64_outputs(12345, 4)
    want = [(x >> 11) / 2.0**53 for x in xoshiro256ss_outputs(state, 50)]
    assert py.rng_stream(12345, 50).tolist() == want


def test_default_backend_reported():
    assert BACKEND in ("compiled", "python")


@needs_compiled
@pytest.mark.parametrize("seed", [0, 1, 2**63 - 1, 987654321])
def test_streams_identical(seed):
    same(py.rng_stream(seed, 1000), compiled.rng_stream(seed, 1000))


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_tabulated_tree_and_chain(seed):
    tables = KernelModel("two_type_mixed", {}).build(60).tables()
    same(py.tab_sample_tree(*tables, 60, 1, seed, 10**5), compiled.tab_sample_tree(*tables, 60, 1, seed, 10**5))
    same(py.tab_tagged_chain(*tables, 60, 2, seed, 10**5), compiled.tab_tagged_chain(*tables, 60, 2, seed, 10**5))


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_urn(seed):
    init = np.array([[1.0, 1.5, 2.25]] * 20)
    vals, cum = np.array([1.0, 2.0]), np.array([0.5, 1.0])
    same(py.urn_run_many(init, vals, cum, 300, seed), compiled.urn_run_many(init, vals, cum, 300, seed))


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_growth(seed):
    b = build_brick_set(TWO_BRICK)
    par, types = b.trees[0]
    t0 = (np.array(par, dtype=np.int64), np.array(types, dtype=np.int64))
    same(py.grow_tree(*t0, *b.brick_arrays(), 300, seed), compiled.grow_tree(*t0, *b.brick_arrays(), 300, seed))
    args = b.root_split_arrays(1)
    same(py.growth_root_split(200, 1, *args, 30, seed), compiled.growth_root_split(200, 1, *args, 30, seed))


@needs_compiled
@pytest.mark.parametrize("expand", [False, True])
def test_gw_sampler(expand):
    arrays = count_tables(SPEC_B, 300).sampler_arrays()
    for seed in range(3):
        same(py.gw_sample_tree(*arrays, 300, 1, seed, expand, 10**6),
             compiled.gw_sample_tree(*arrays, 300, 1, seed, expand, 10**6))


def test_forced_python_fallback():
    env = dict(os.environ, MBTREES_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from mbtrees._kernels import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

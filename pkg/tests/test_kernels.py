import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sthg import _pykernels, kernels
from sthg.synth import oracle_edit_distance

NATIVE = "native" in kernels.BACKENDS


def random_csr(rng, n_dst, n_src, p=0.4):
    rows = [np.flatnonzero(rng.random(n_src) < p) for _ in range(n_dst)]
    indptr = np.concatenate([[0], np.cumsum([len(r) for r in rows])]).astype(np.int64)
    indices = np.concatenate(rows + [np.zeros(0, dtype=np.int64)]).astype(np.int64)
    return indptr, indices


def test_mean_example():
    indptr = np.array([0, 2, 2, 3])
    indices = np.array([0, 2, 1])
    m = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(_pykernels.csr_mean(indptr, indices, m), [[3.0, 4.0], [0.0, 0.0], [3.0, 4.0]])


def test_max_ties_pick_lowest_source():
    indptr = np.array([0, 3])
    indices = np.array([0, 1, 2])
    m = np.array([[1.0, 5.0], [1.0, 7.0], [0.0, 7.0]])
    for name in kernels.BACKENDS:
        with kernels.using(name):
            out, arg = kernels.csr_max(indptr, indices, m)
        np.testing.assert_array_equal(out, [[1.0, 7.0]])
        np.testing.assert_array_equal(arg, [[0, 1]])


def test_empty_rows_are_zero_with_no_winner():
    indptr = np.array([0, 0, 0])
    out, arg = _pykernels.csr_max(indptr, np.zeros(0, dtype=np.int64), np.ones((3, 2)))
    assert not out.any() and np.all(arg == -1)


@pytest.mark.skipif(not NATIVE, reason="compiled kernels not built")
@pytest.mark.parametrize("seed", range(10))
def test_native_matches_python(seed):
    rng = np.random.default_rng(seed)
    n_dst, n_src, d = rng.integers(1, 12), rng.integers(1, 12), rng.integers(1, 5)
    indptr, indices = random_csr(rng, n_dst, n_src)
    # integer-valued messages force plenty of ties
    m = rng.integers(-2, 3, size=(n_src, d)).astype(float)
    g = rng.normal(size=(n_dst, d))
    res = {}
    for name in ("python", "native"):
        with kernels.using(name):
            mean = kernels.csr_mean(indptr, indices, m)
            mean_b = kernels.csr_mean_backward(indptr, indices, g, n_src)
            mx, arg = kernels.csr_max(indptr, indices, m)
            mx_b = kernels.csr_max_backward(arg, g, n_src)
        res[name] = (mean, mean_b, mx, arg, mx_b)
    for a, b in zip(res["python"], res["native"]):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_mean_backward_is_adjoint():
    rng = np.random.default_rng(3)
    indptr, indices = random_csr(rng, 7, 5)
    m, g = rng.normal(size=(5, 3)), rng.normal(size=(7, 3))
    for name in kernels.BACKENDS:
        with kernels.using(name):
            lhs = np.sum(kernels.csr_mean(indptr, indices, m) * g)
            rhs = np.sum(m * kernels.csr_mean_backward(indptr, indices, g, 5))
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.set_backend("gpu")
    with kernels.using("python"):
        assert kernels.backend_name() == "python"


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 2), max_size=5), st.lists(st.integers(0, 2), max_size=5))
def test_edit_distance_matches_alignment_oracle(a, b):
    want = oracle_edit_distance(a, b)
    for name in kernels.BACKENDS:
        with kernels.using(name):
            assert kernels.edit_distance(a, b) == want


@pytest.mark.parametrize("a,b,d", [("", "", 0), ("abc", "", 3), ("", "ab", 2), ("kitten", "sitting", 3),
                                   ("flaw", "lawn", 2)])
def test_edit_distance_examples(a, b, d):
    for name in kernels.BACKENDS:
        with kernels.using(name):
            got = kernels.edit_distance(np.array([ord(c) for c in a]), np.array([ord(c) for c in b]))
            assert got == d and type(got) is int


def test_env_forces_fallback_at_import():
    import os
    import subprocess
    import sys
    env = dict(os.environ, STHG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from sthg import kernels; print(kernels.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

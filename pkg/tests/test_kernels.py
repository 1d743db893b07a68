import numpy as np
import pytest

from coldec import kernels

from oracles import cif_interval_oracle, levenshtein_oracle, topk_oracle


def test_backend_flag_is_known():
    assert kernels.BACKEND in kernels.backends()


def test_topk_matches_sort(backend, rng):
    for _ in range(200):
        n = int(rng.integers(1, 60))
        v = rng.integers(0, 6, size=n).astype(float)  # many ties
        k = int(rng.integers(1, n + 3))
        assert list(backend.topk_desc(v, k)) == topk_oracle(list(v), k)


def test_topk_edge_cases(backend):
    assert list(backend.topk_desc(np.array([]), 3)) == []
    assert list(backend.topk_desc(np.array([1.0, 2.0]), 0)) == []
    assert list(backend.topk_desc(np.array([-np.inf, 0.0, -np.inf]), 3)) == [1, 0, 2]


def test_edit_distance_matches_recursion(backend, rng):
    for _ in range(300):
        a = list(rng.integers(0, 3, size=int(rng.integers(0, 8))))
        b = list(rng.integers(0, 3, size=int(rng.integers(0, 8))))
        assert backend.edit_distance(a, b) == levenshtein_oracle(a, b)


def test_edit_distance_known():
    ed = kernels.edit_distance
    assert ed([], []) == 0
    assert ed([1, 2, 3], []) == 3
    assert ed([], [4, 5]) == 2
    # kitten -> sitting
    k = [ord(c) for c in "kitten"]
    s = [ord(c) for c in "sitting"]
    assert ed(k, s) == 3


def test_cif_matches_interval_oracle(backend, rng):
    for _ in range(200):
        T = int(rng.integers(1, 25))
        w = rng.uniform(0, 1, size=T)
        thr = float(rng.choice([0.5, 1.0, 1.7]))
        tail = bool(rng.integers(0, 2))
        emb, integ = backend.cif_fire(np.eye(T), w, thr, tail)
        expect = np.array(cif_interval_oracle(list(w), thr, tail)).reshape(-1, T)
        assert emb.shape == expect.shape
        np.testing.assert_allclose(emb, expect, atol=1e-9)
        np.testing.assert_allclose(integ, expect.sum(axis=1), atol=1e-9)


def test_backends_agree_bitwise(rng):
    found = kernels.backends()
    if len(found) < 2:
        pytest.skip("compiled backend not built")
    py, cy = found["python"], found["cython"]
    for _ in range(100):
        T = int(rng.integers(1, 30))
        frames = rng.normal(size=(T, 5))
        w = rng.uniform(0, 1, size=T)
        w[rng.uniform(size=T) < 0.2] = 0.0
        for tail in (True, False):
            e1, i1 = py.cif_fire(frames, w, 1.0, tail)
            e2, i2 = cy.cif_fire(frames, w, 1.0, tail)
            assert np.array_equal(e1, e2) and np.array_equal(i1, i2)
        v = np.round(rng.normal(size=50), 1)
        assert np.array_equal(py.topk_desc(v, 7), cy.topk_desc(v, 7))


def test_env_forces_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, COLDEC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import coldec.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

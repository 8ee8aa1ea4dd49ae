import math

import numpy as np
import pytest

import eslift


def test_exp_log_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = rng.normal(size=4)
        p /= np.linalg.norm(p)
        v = rng.normal(size=3)
        v *= 2.5 * rng.random() / np.linalg.norm(v)
        q = eslift.so3_exp(p, v)
        assert np.allclose(eslift.so3_log(p, q), v, atol=1e-9)
        assert math.isclose(eslift.so3_distance(p, q), np.linalg.norm(v), abs_tol=1e-9)


def test_simplex_projection():
    w, cutoff = eslift.project_simplex(np.array([0.3, 0.2, -1.0]))
    assert np.allclose(w, [0.55, 0.45, 0.0])
    assert cutoff == 2


def test_lifted_weights_and_errors():
    d = eslift.lifted_weights(np.array([0.4, 0.1, 0.3]), 1e-12, 0.5)
    assert d["index"] == [1]
    with pytest.raises(eslift.EslError):
        eslift.lifted_weights(np.array([0.4, 0.1]), -1.0, 0.5)


def test_base_mesh_and_esl():
    X = eslift.so3_mesh(0)
    assert X.shape == (1821, 4)
    target = X[100]
    f = np.array([eslift.so3_distance(x, target) ** 2 for x in X])
    r = eslift.esl_minimise_so3(f, X)
    assert eslift.so3_distance(r["barycentre"], target) < 0.4
    assert abs(sum(r["weights"]["weight"]) - 1.0) < 1e-10
    lo, hi = eslift.sparsity_bounds(len(X), 15.0, 0.66, 3)
    assert lo < hi


def test_small_pipeline():
    n = 12
    vol = eslift.make_phantom(n)
    h = eslift.default_voxel_size(n)
    k = eslift.wavenumber_for_voltage(200.0)
    imgs, gt, noise = eslift.generate_dataset(vol, h, 6, snr=1e6, seed=3, wavenumber=k)
    assert imgs.shape == (6, n, n)
    X = eslift.so3_mesh(0)
    L = eslift.rotation_losses(vol, imgs, h, X, 1.0, wavenumber=k)
    assert L.shape == (6, 1821)
    assert L.min() >= 0.0
    rots, argmax, l0, gammas = eslift.update_rotations(L, X)
    errors, mean, std, reflected = eslift.align_rotations(rots, gt)
    assert len(errors) == 6
    assert np.degrees(mean) < 30.0

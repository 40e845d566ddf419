"""Smoke tests for the python bindings.

Importable either as the installed ``rancor`` package or as the bare
in-build extension module ``_rancor``.
"""

import numpy as np
import pytest

try:
    import rancor
except ImportError:
    import _rancor as rancor


def test_sad_and_warp_identity():
    rng = np.random.default_rng(1)
    vol = rng.standard_normal((8, 8, 8))
    assert rancor.sad(vol, vol) == 0.0

    zero = np.zeros((8, 8, 8, 3))
    out = rancor.warp(vol, zero)
    np.testing.assert_array_equal(out, vol)


def test_normalize():
    rng = np.random.default_rng(2)
    vol = 40.0 + 7.0 * rng.standard_normal((10, 10, 10))
    out = rancor.normalize(vol)
    assert abs(out.mean()) < 1e-6
    assert abs(out.std() - 1.0) < 0.05


def test_target_overlap():
    labels = np.zeros((6, 6, 6), dtype=np.int32)
    labels[1:4, 1:4, 1:4] = 2
    aggregate, per_label = rancor.target_overlap(labels, labels)
    assert aggregate == 1.0
    assert per_label[2] == 1.0


def test_endpoint_error():
    u = np.zeros((4, 4, 4, 3))
    v = np.zeros((4, 4, 4, 3))
    v[..., 0] = 3.0
    v[..., 1] = 4.0
    mean, peak = rancor.endpoint_error(u, v)
    assert mean == pytest.approx(5.0)
    assert peak == pytest.approx(5.0)


def test_deformation_generator():
    field = rancor.make_smooth_deformation((24, 24, 24), amplitude=2.0, sigma=6.0, seed=3)
    assert field.shape == (24, 24, 24, 3)
    norms = np.linalg.norm(field, axis=-1)
    assert norms.max() <= 2.0 + 1e-9

    again = rancor.make_smooth_deformation((24, 24, 24), amplitude=2.0, sigma=6.0, seed=3)
    np.testing.assert_array_equal(field, again)


def test_registration_recovers_synthetic_pair():
    fixed, moving, truth = rancor.make_test_pair(
        "blobs", (24, 24, 24), amplitude=2.0, sigma=6.0, noise=0.01, seed=5
    )
    disp, info = rancor.register_volumes(fixed, moving, levels=2)
    assert disp.shape == (24, 24, 24, 3)
    assert info["final_sad"] <= info["initial_sad"]
    assert info["final_sad"] < 0.7 * info["initial_sad"]
    mean_epe, _ = rancor.endpoint_error(disp, truth)
    truth_mean = np.linalg.norm(truth, axis=-1).mean()
    assert mean_epe < truth_mean


def test_warp_labels_shift():
    labels = np.zeros((6, 6, 6), dtype=np.int32)
    labels[3, :, :] = 7
    disp = np.zeros((6, 6, 6, 3))
    disp[..., 0] = 1.0
    out = rancor.warp_labels(labels, disp)
    assert (out[2, :, :] == 7).all()
    assert (out[3, :, :] == 0).all()


def test_errors_are_typed():
    with pytest.raises(Exception) as exc_info:
        rancor.sad(np.zeros((4, 4, 4)), np.zeros((4, 4, 5)))
    assert "mismatch" in str(exc_info.value)


def test_certify_small():
    report = rancor.certify(cases=2, seed=7)
    assert report["all_pass"]
    assert len(report["cases"]) == 2

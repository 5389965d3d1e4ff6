"""Static masking, homography estimation, warping, disparity alignment."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoshot.alignment import (AlignmentError, CorrespondenceSet,
                               DisparityAlignment, Homography,
                               correspondences_from_flow, estimate_homography,
                               fit_disparity_alignment, static_mask,
                               warp_to_reference)
from twoshot.imaging import DenseMap, sanitize_disparity


def _flow_map(mags):
    """(1, N, 2) flow whose x-components realize the given magnitudes."""
    arr = np.zeros((1, len(mags), 2), dtype=np.float32)
    arr[0, :, 0] = mags
    return DenseMap(arr)


def _grid_correspondences(h: np.ndarray, n: int = 20, scale: float = 10.0):
    ys, xs = np.mgrid[0:n, 0:n].astype(np.float64)
    p0 = np.stack([xs.ravel() * scale, ys.ravel() * scale], axis=1)
    p1 = Homography(h).apply(p0)
    return p0, p1


# --- static_mask -----------------------------------------------------------

def test_static_mask_rejects_large_flow():
    mask = static_mask(_flow_map([1.0, 1.0, 1.0, 50.0]), keep_fraction=0.6)
    assert mask.tolist() == [[True, True, True, False]]


def test_static_mask_keeps_all_when_uniform():
    mask = static_mask(DenseMap(np.zeros((3, 4, 2), dtype=np.float32)))
    assert np.all(mask)


def test_static_mask_quantile_example():
    mask = static_mask(_flow_map([1.0, 2.0, 3.0, 4.0, 5.0]), keep_fraction=0.4)
    assert mask.tolist() == [[True, True, False, False, False]]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=2, max_size=40, unique=True),
       st.floats(0.05, 0.95))
def test_static_mask_count_property(mags, kf):
    # integer magnitudes stay distinct after the float32 cast inside DenseMap
    mask = static_mask(_flow_map([float(m) for m in mags]), keep_fraction=kf)
    assert int(mask.sum()) == math.ceil(kf * len(mags))


# --- correspondences_from_flow ---------------------------------------------

def test_correspondences_follow_flow():
    flow = DenseMap(np.full((12, 12, 2), [2.0, 0.0], dtype=np.float32))
    corrs = correspondences_from_flow(flow, np.ones((12, 12), dtype=bool))
    np.testing.assert_array_equal(corrs.p1, corrs.p0 + [2.0, 0.0])


def test_correspondences_drop_out_of_bounds_targets():
    flow = np.zeros((16, 16, 2), dtype=np.float32)
    flow[:, :, 0] = 100.0
    flow[:, 0, 0] = 1.0  # only column 0 targets stay inside
    corrs = correspondences_from_flow(DenseMap(flow), np.ones((16, 16), dtype=bool))
    assert len(corrs) == 4
    assert np.all(corrs.p0[:, 0] == 0)


def test_correspondences_empty_mask_errors():
    flow = DenseMap(np.zeros((8, 8, 2), dtype=np.float32))
    with pytest.raises(AlignmentError, match="insufficient static support"):
        correspondences_from_flow(flow, np.zeros((8, 8), dtype=bool))


# --- Homography type --------------------------------------------------------

def test_homography_normalizes_h33():
    h = Homography(2.0 * np.eye(3))
    assert h.matrix[2, 2] == 1.0
    np.testing.assert_allclose(h.matrix, np.eye(3))


def test_homography_rejects_singular():
    with pytest.raises(ValueError):
        Homography(np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 0, 1.0]]))


def test_homography_inverse_round_trip():
    h = Homography(np.array([[1.1, 0.02, 3.0], [-0.01, 0.95, -2.0],
                             [1e-4, -2e-5, 1.0]]))
    pts = np.random.default_rng(0).uniform(0, 100, size=(50, 2))
    np.testing.assert_allclose(h.inverse().apply(h.apply(pts)), pts, atol=1e-9)


# --- estimate_homography -----------------------------------------------------

def test_identity_correspondences_give_identity():
    p0, _ = _grid_correspondences(np.eye(3), n=10)
    corrs = CorrespondenceSet(p0=p0, p1=p0.copy(), weights=np.ones(len(p0)))
    h = estimate_homography(corrs, seed=1)
    assert np.abs(h.matrix - np.eye(3)).max() < 1e-6


def test_translation_recovered():
    p0, p1 = _grid_correspondences(
        np.array([[1.0, 0, 5.0], [0, 1.0, 3.0], [0, 0, 1.0]]), n=10)
    corrs = CorrespondenceSet(p0=p0, p1=p1, weights=np.ones(len(p0)))
    h = estimate_homography(corrs, seed=2)
    assert abs(h.matrix[0, 2] - 5.0) < 1e-6
    assert abs(h.matrix[1, 2] - 3.0) < 1e-6


def test_recovery_with_outliers():
    truth = np.array([[1.02, 0.01, 2.0], [-0.01, 0.99, -1.0], [1e-4, 0.0, 1.0]])
    p0, p1 = _grid_correspondences(truth, n=20)
    rng = np.random.default_rng(7)
    bad = rng.choice(len(p0), size=int(0.3 * len(p0)), replace=False)
    p1 = p1.copy()
    p1[bad] = rng.uniform(0, 200, size=(len(bad), 2))
    corrs = CorrespondenceSet(p0=p0, p1=p1, weights=np.ones(len(p0)))
    h = estimate_homography(corrs, seed=3)
    assert np.linalg.norm(h.matrix - truth) < 1e-3


def test_noiseless_fit_is_projectively_exact():
    truth = np.array([[0.98, -0.03, 12.0], [0.02, 1.05, -6.0], [2e-4, -1e-4, 1.0]])
    p0, p1 = _grid_correspondences(truth, n=12)
    corrs = CorrespondenceSet(p0=p0, p1=p1, weights=np.ones(len(p0)))
    h = estimate_homography(corrs, seed=4)
    err = np.linalg.norm(h.apply(p0) - p1, axis=1)
    err += np.linalg.norm(h.inverse().apply(p1) - p0, axis=1)
    assert err.max() < 1e-4


def test_low_inlier_ratio_fails():
    rng = np.random.default_rng(11)
    p0 = rng.uniform(0, 1000, size=(100, 2))
    p1 = p0.copy()
    p1[20:] = rng.uniform(0, 1000, size=(80, 2))  # only 20% coherent
    corrs = CorrespondenceSet(p0=p0, p1=p1, weights=np.ones(100))
    with pytest.raises(AlignmentError, match="alignment failed"):
        estimate_homography(corrs, seed=5)


def test_too_few_correspondences():
    corrs = CorrespondenceSet(p0=np.zeros((3, 2)), p1=np.zeros((3, 2)),
                              weights=np.ones(3))
    with pytest.raises(AlignmentError):
        estimate_homography(corrs)


def test_seeded_estimation_is_deterministic():
    truth = np.array([[1.01, 0.0, 4.0], [0.0, 0.99, 1.0], [0.0, 0.0, 1.0]])
    p0, p1 = _grid_correspondences(truth, n=15)
    rng = np.random.default_rng(9)
    p1 = p1 + 0.0
    bad = rng.choice(len(p0), size=40, replace=False)
    p1[bad] += rng.uniform(5, 20, size=(40, 2))
    corrs = CorrespondenceSet(p0=p0, p1=p1, weights=np.ones(len(p0)))
    a = estimate_homography(corrs, seed=42).matrix
    b = estimate_homography(corrs, seed=42).matrix
    np.testing.assert_array_equal(a, b)


# --- warp_to_reference -------------------------------------------------------

def _smooth_image(h, w):
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    img = np.stack([0.5 + 0.4 * np.sin(xs / 17.0),
                    0.5 + 0.4 * np.cos(ys / 13.0),
                    0.5 + 0.3 * np.sin((xs + ys) / 23.0),
                    np.ones_like(xs)], axis=-1)
    return DenseMap(img.astype(np.float32))


def test_identity_warp_is_noop():
    img = _smooth_image(20, 30)
    disp = sanitize_disparity(np.full((20, 30), 0.25, dtype=np.float32))
    flow = DenseMap(np.zeros((20, 30, 2), dtype=np.float32))
    out_img, out_disp, out_flow, valid = warp_to_reference(
        img, disp, flow, Homography(np.eye(3)))
    np.testing.assert_allclose(out_img.data, img.data, atol=1e-6)
    np.testing.assert_allclose(out_disp.values, disp.values, atol=1e-6)
    np.testing.assert_allclose(out_flow.data, 0.0, atol=1e-6)
    assert np.all(valid)


def test_translation_warp_shifts_content():
    img = np.zeros((16, 16, 4), dtype=np.float32)
    img[8, 9] = 1.0  # impulse
    h = Homography(np.array([[1.0, 0, 5.0], [0, 1.0, 3.0], [0, 0, 1.0]]))
    disp = sanitize_disparity(np.full((16, 16), 0.5, dtype=np.float32))
    flow = DenseMap(np.zeros((16, 16, 2), dtype=np.float32))
    out_img, _, _, valid = warp_to_reference(DenseMap(img), disp, flow, h)
    # content at (9, 8) in the source appears at (9-5, 8-3) = (4, 5)
    assert out_img.data[5, 4, 0] == pytest.approx(1.0)
    assert not valid[0, 15] and not valid[15, 15]  # sources fall outside


def test_constant_image_stays_constant():
    img = DenseMap(np.full((12, 12, 4), 0.7, dtype=np.float32))
    disp = sanitize_disparity(np.full((12, 12), 0.2, dtype=np.float32))
    flow = DenseMap(np.zeros((12, 12, 2), dtype=np.float32))
    h = Homography(np.array([[1.02, 0.01, 1.0], [0.0, 0.98, -0.5],
                             [1e-4, 0.0, 1.0]]))
    out_img, _, _, valid = warp_to_reference(img, disp, flow, h)
    assert np.allclose(out_img.data[valid], 0.7, atol=1e-6)


def test_warp_round_trip_psnr():
    img = _smooth_image(64, 80)
    disp = sanitize_disparity(np.full((64, 80), 0.3, dtype=np.float32))
    flow = DenseMap(np.zeros((64, 80, 2), dtype=np.float32))
    h = Homography(np.array([[1.01, 0.015, 2.0], [-0.01, 0.99, 1.5],
                             [1e-4, -5e-5, 1.0]]))
    once, d1, f1, v1 = warp_to_reference(img, disp, flow, h)
    back, _, _, v2 = warp_to_reference(once, d1, f1, h.inverse())
    interior = v1 & v2
    interior[:4] = interior[-4:] = False
    interior[:, :4] = interior[:, -4:] = False
    mse = float(np.mean((back.data[interior] - img.data[interior]) ** 2))
    assert 10 * math.log10(1.0 / mse) > 40.0


# --- fit_disparity_alignment -------------------------------------------------

def _corr_grid(n=10):
    ys, xs = np.mgrid[0:n, 0:n].astype(np.float64)
    p = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return CorrespondenceSet(p0=p, p1=p.copy(), weights=np.ones(len(p)))


def test_fit_identity():
    vals = np.random.default_rng(0).uniform(0.2, 0.8, size=(10, 10)).astype(np.float32)
    d = sanitize_disparity(vals)
    fit = fit_disparity_alignment(d, d, _corr_grid())
    assert fit.scale == pytest.approx(1.0, abs=1e-9)
    assert fit.shift == pytest.approx(0.0, abs=1e-9)


def test_fit_exact_scale_shift():
    rng = np.random.default_rng(1)
    d1_vals = rng.uniform(0.1, 0.4, size=(10, 10)).astype(np.float32)
    d0 = sanitize_disparity(2.0 * d1_vals + 0.1)
    d1 = sanitize_disparity(d1_vals)
    fit = fit_disparity_alignment(d0, d1, _corr_grid())
    assert fit.scale == pytest.approx(2.0, abs=1e-6)
    assert fit.shift == pytest.approx(0.1, abs=1e-6)


def test_fit_fallback_on_constant_d1():
    d0 = sanitize_disparity(np.full((10, 10), 0.4, dtype=np.float32))
    d1 = sanitize_disparity(np.full((10, 10), 0.3, dtype=np.float32))
    fit = fit_disparity_alignment(d0, d1, _corr_grid())
    assert fit.scale == 1.0
    assert fit.shift == pytest.approx(0.1, abs=1e-7)


def test_fit_beats_unit_baseline():
    rng = np.random.default_rng(2)
    d1_vals = rng.uniform(0.1, 0.5, size=(10, 10)).astype(np.float32)
    d0_vals = (1.7 * d1_vals + 0.05 + rng.normal(0, 0.01, size=(10, 10))).astype(np.float32)
    d0, d1 = sanitize_disparity(d0_vals), sanitize_disparity(d1_vals)
    corrs = _corr_grid()
    fit = fit_disparity_alignment(d0, d1, corrs)
    xs = d1_vals.ravel().astype(np.float64)
    ys = d0_vals.ravel().astype(np.float64)
    fitted = np.sum((fit.scale * xs + fit.shift - ys) ** 2)
    baseline = np.sum((xs - ys) ** 2)
    assert fitted <= baseline + 1e-12


def test_alignment_apply_keeps_valid_positive():
    d1 = sanitize_disparity(np.array([[0.3, 0.01], [0.5, 0.2]], dtype=np.float32))
    out = DisparityAlignment(scale=0.5, shift=-0.05).apply(d1)
    assert np.all(out.values[out.valid] > 0)
    assert not out.valid[0, 1]  # 0.5*0.01 - 0.05 <= 0 drops out


def test_disparity_alignment_requires_positive_scale():
    with pytest.raises(ValueError):
        DisparityAlignment(scale=0.0, shift=0.1)

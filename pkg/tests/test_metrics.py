"""Volume metrics against an all-pairs brute-force oracle."""

import math

import numpy as np
import pytest

from pless.io import VolumeMeta
from pless.metrics import asd, dsc_3d, evaluate, hd95, surface_voxels

### oracle


def surface_oracle(mask):
    """Foreground voxels with a 6-connected background-or-outside neighbor."""
    h, w, d = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for i in range(h):
        for j in range(w):
            for k in range(d):
                if not mask[i, j, k]:
                    continue
                for di, dj, dk in (
                    (-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1),
                ):
                    ni, nj, nk = i + di, j + dj, k + dk
                    if not (0 <= ni < h and 0 <= nj < w and 0 <= nk < d) or not mask[ni, nj, nk]:
                        out[i, j, k] = True
                        break
    return out


def _surface_points(mask, spacing):
    pts = []
    surf = surface_oracle(mask)
    for idx in np.argwhere(surf):
        pts.append(tuple(float(i) * s for i, s in zip(idx, spacing)))
    return pts


def directed_oracle(points_a, points_b):
    dists = []
    for pa in points_a:
        best = math.inf
        for pb in points_b:
            d = math.sqrt(sum((x - y) ** 2 for x, y in zip(pa, pb)))
            if d < best:
                best = d
        dists.append(best)
    return dists


def hd95_oracle(pred, gt, spacing):
    p = _surface_points(pred, spacing)
    g = _surface_points(gt, spacing)
    if not p or not g:
        return math.nan
    fwd = sorted(directed_oracle(p, g))
    bwd = sorted(directed_oracle(g, p))
    return max(fwd[math.ceil(0.95 * len(fwd)) - 1], bwd[math.ceil(0.95 * len(bwd)) - 1])


def asd_oracle(pred, gt, spacing):
    p = _surface_points(pred, spacing)
    g = _surface_points(gt, spacing)
    if not p or not g:
        return math.nan
    pooled = directed_oracle(p, g) + directed_oracle(g, p)
    return sum(pooled) / len(pooled)


def _random_mask(rng, shape=(8, 8, 3)):
    mask = rng.random(shape) < 0.4
    if not mask.any():
        mask[tuple(rng.integers(0, s) for s in shape)] = True
    return mask


### dsc


def test_dsc_identity():
    rng = np.random.default_rng(0)
    vol = rng.integers(0, 4, size=(6, 6, 4)).astype(np.uint8)
    for c in range(4):
        assert dsc_3d(vol, vol, c) == 1.0


def test_dsc_both_empty_is_one():
    vol = np.zeros((4, 4, 2), dtype=np.uint8)
    assert dsc_3d(vol, vol, 3) == 1.0


def test_dsc_hand_case():
    pred = np.zeros((1, 4, 1), dtype=np.uint8)
    gt = np.zeros((1, 4, 1), dtype=np.uint8)
    pred[0, 0:2, 0] = 1
    gt[0, 1:3, 0] = 1
    assert dsc_3d(pred, gt, 1) == 0.5


### surface voxels


def test_surface_full_volume_is_shell():
    mask = np.ones((4, 5, 3), dtype=bool)
    surf = surface_voxels(mask)
    assert np.array_equal(surf, surface_oracle(mask))
    assert not surf[1:-1, 1:-1, 1:-1].any()


def test_surface_single_voxel():
    mask = np.zeros((3, 3, 3), dtype=bool)
    mask[1, 1, 1] = True
    assert np.array_equal(surface_voxels(mask), mask)


def test_surface_cube_shell_count():
    mask = np.zeros((5, 5, 5), dtype=bool)
    mask[1:4, 1:4, 1:4] = True
    surf = surface_voxels(mask)
    assert surf.sum() == 26  # 27 minus the hidden center
    assert np.array_equal(surf, surface_oracle(mask))


def test_surface_matches_oracle_random():
    rng = np.random.default_rng(1)
    for _ in range(10):
        mask = _random_mask(rng)
        assert np.array_equal(surface_voxels(mask), surface_oracle(mask))


### distances


def test_hd95_identity_zero():
    rng = np.random.default_rng(2)
    mask = _random_mask(rng)
    assert hd95(mask, mask) == 0.0
    assert asd(mask, mask) == 0.0


def test_single_voxel_offsets():
    a = np.zeros((3, 3, 3), dtype=bool)
    b = np.zeros((3, 3, 3), dtype=bool)
    a[1, 1, 0] = True
    b[1, 1, 1] = True
    assert hd95(a, b, (1.0, 1.0, 2.5)) == pytest.approx(2.5)
    c = np.zeros((5, 3, 3), dtype=bool)
    d = np.zeros((5, 3, 3), dtype=bool)
    c[0, 1, 1] = True
    d[2, 1, 1] = True
    assert asd(c, d, (1.0, 1.0, 1.0)) == pytest.approx(2.0)


def test_distances_match_brute_force_oracle():
    rng = np.random.default_rng(3)
    spacing = (1.0, 1.0, 2.5)
    for _ in range(20):
        pred = _random_mask(rng)
        gt = _random_mask(rng)
        assert hd95(pred, gt, spacing) == pytest.approx(hd95_oracle(pred, gt, spacing), abs=1e-9)
        assert asd(pred, gt, spacing) == pytest.approx(asd_oracle(pred, gt, spacing), abs=1e-9)


def test_distance_symmetry():
    rng = np.random.default_rng(4)
    spacing = (1.0, 1.0, 2.5)
    for _ in range(5):
        a = _random_mask(rng)
        b = _random_mask(rng)
        assert hd95(a, b, spacing) == hd95(b, a, spacing)
        assert asd(a, b, spacing) == asd(b, a, spacing)


def test_empty_mask_gives_nan():
    a = np.zeros((3, 3, 3), dtype=bool)
    b = np.zeros((3, 3, 3), dtype=bool)
    b[1, 1, 1] = True
    assert math.isnan(hd95(a, b))
    assert math.isnan(asd(a, b))


def test_axis_permutation_invariance():
    rng = np.random.default_rng(5)
    spacing = np.array([1.0, 1.25, 2.5])
    pred = _random_mask(rng, (6, 7, 4))
    gt = _random_mask(rng, (6, 7, 4))
    base_hd = hd95(pred, gt, tuple(spacing))
    base_asd = asd(pred, gt, tuple(spacing))
    for perm in ((1, 0, 2), (2, 1, 0), (0, 2, 1)):
        ph = hd95(pred.transpose(perm), gt.transpose(perm), tuple(spacing[list(perm)]))
        pa = asd(pred.transpose(perm), gt.transpose(perm), tuple(spacing[list(perm)]))
        assert ph == pytest.approx(base_hd, abs=1e-12)
        assert pa == pytest.approx(base_asd, abs=1e-12)


### evaluate


def test_evaluate_identity():
    rng = np.random.default_rng(6)
    vol = rng.integers(0, 4, size=(8, 8, 3)).astype(np.uint8)
    report = evaluate(vol, vol, VolumeMeta())
    assert report.dsc_avg == 1.0
    assert report.hd95_avg_mm == 0.0
    assert report.asd_avg_mm == 0.0
    assert report.defined_distance_classes == 3


def test_evaluate_undefined_class_excluded():
    vol = np.zeros((6, 6, 2), dtype=np.uint8)
    vol[2:4, 2:4, :] = 1  # classes 2 and 3 absent everywhere
    report = evaluate(vol, vol, VolumeMeta())
    assert report.dsc[2] == 1.0
    assert math.isnan(report.hd95_mm[2])
    assert report.defined_distance_classes == 1
    assert report.hd95_avg_mm == 0.0
    cleaned = report.to_dict()
    assert cleaned["hd95_mm"]["2"] is None


def test_evaluate_dilated_prediction_matches_oracle():
    from scipy import ndimage as ndi

    rng = np.random.default_rng(7)
    gt = np.zeros((8, 8, 3), dtype=np.uint8)
    gt[2:5, 2:5, 1] = 1
    grown = ndi.binary_dilation(gt == 1)
    pred = np.where(grown, 1, 0).astype(np.uint8)
    meta = VolumeMeta(class_names=["BG", "RV"])
    report = evaluate(pred, gt, meta)
    assert report.asd_mm[1] == pytest.approx(asd_oracle(pred == 1, gt == 1, (1.0, 1.0, 1.0)), abs=1e-9)

"""Fusion, masking, and the tolerance schedule."""

import json

import numpy as np
import pytest

from pless.enhancement import (
    EnhancementConfig,
    FusionStrategy,
    enhance_pseudo_labels,
    enhancement_mask,
    fuse_predictions,
)

UNL = 255


def _softmax_stack(rng, c, h, w):
    logits = rng.normal(size=(c, h, w))
    e = np.exp(logits - logits.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


### fusion


def test_fusion_identical_inputs_any_strategy():
    rng = np.random.default_rng(0)
    ps = _softmax_stack(rng, 4, 6, 6)
    expected = ps.argmax(axis=0)
    for strategy in FusionStrategy:
        assert np.array_equal(fuse_predictions(ps, ps, strategy), expected)


def test_fusion_hand_case():
    ps = np.array([0.6, 0.4]).reshape(2, 1, 1)
    pt = np.array([0.2, 0.8]).reshape(2, 1, 1)
    assert fuse_predictions(ps, pt, "average")[0, 0] == 1
    assert fuse_predictions(ps, pt, "confidence")[0, 0] == 1
    assert fuse_predictions(ps, pt, "student")[0, 0] == 0


def test_fusion_tie_takes_smallest_code():
    flat = np.array([0.5, 0.5]).reshape(2, 1, 1)
    assert fuse_predictions(flat, flat, "average")[0, 0] == 0


def test_confidence_tie_goes_to_student():
    ps = np.array([0.7, 0.3]).reshape(2, 1, 1)
    pt = np.array([0.3, 0.7]).reshape(2, 1, 1)
    # equal confidence, different winners: student's argmax wins
    assert fuse_predictions(ps, pt, "confidence")[0, 0] == 0


def test_fusion_scale_invariance():
    # renormalizing both maps identically cannot move the average argmax
    rng = np.random.default_rng(1)
    ps = _softmax_stack(rng, 3, 5, 5)
    pt = _softmax_stack(rng, 3, 5, 5)
    base = fuse_predictions(ps, pt, "average")
    assert np.array_equal(fuse_predictions(pt, ps, "average"), base)


def test_fusion_rejects_unnormalized():
    bad = np.full((2, 2, 2), 0.9)
    with pytest.raises(ValueError, match="sum to 1"):
        fuse_predictions(bad, bad, "average")


def test_fusion_rejects_shape_mismatch():
    rng = np.random.default_rng(2)
    ps = _softmax_stack(rng, 3, 4, 4)
    pt = _softmax_stack(rng, 3, 4, 5)
    with pytest.raises(ValueError, match="shape"):
        fuse_predictions(ps, pt, "average")


### mask


def test_mask_all_unlabeled():
    assert not enhancement_mask(np.full((3, 3), UNL, dtype=np.uint8)).any()


def test_mask_fully_labeled():
    assert enhancement_mask(np.zeros((3, 3), dtype=np.uint8)).all()


def test_mask_single_bit():
    labels = np.full((2, 2), UNL, dtype=np.uint8)
    labels[1, 0] = 2
    mask = enhancement_mask(labels)
    assert mask.tolist() == [[False, False], [True, False]]


### schedule


def test_schedule_past_cutoff_is_bitwise_identity():
    cfg = EnhancementConfig(tau=0.25, e_max=100)
    p_pl = np.ones((4, 4), dtype=np.uint8)
    s_enh = np.zeros((4, 4), dtype=np.uint8)
    out = enhance_pseudo_labels(p_pl, s_enh, 30, cfg)  # 30 > 25
    assert np.array_equal(out, p_pl)


def test_schedule_zero_mask_identity():
    cfg = EnhancementConfig()
    p_pl = np.full((3, 3), 2, dtype=np.uint8)
    s_enh = np.full((3, 3), UNL, dtype=np.uint8)
    assert np.array_equal(enhance_pseudo_labels(p_pl, s_enh, 0, cfg), p_pl)


def test_schedule_blend_hand_case():
    cfg = EnhancementConfig()
    p_pl = np.array([[3, 3, 3]], dtype=np.uint8)
    s_enh = np.array([[0, UNL, 1]], dtype=np.uint8)
    out = enhance_pseudo_labels(p_pl, s_enh, 0, cfg)
    assert out.tolist() == [[0, 3, 1]]


def test_schedule_cutoff_inclusive_and_real_valued():
    # tau * e_max = 15.75: epoch 15 blends, epoch 16 does not
    cfg = EnhancementConfig(tau=0.25, e_max=63)
    p_pl = np.full((2, 2), 3, dtype=np.uint8)
    s_enh = np.zeros((2, 2), dtype=np.uint8)
    assert (enhance_pseudo_labels(p_pl, s_enh, 15, cfg) == 0).all()
    assert (enhance_pseudo_labels(p_pl, s_enh, 16, cfg) == 3).all()


def test_blend_partitions_pixels():
    rng = np.random.default_rng(5)
    cfg = EnhancementConfig(tau=1.0, e_max=10)
    p_pl = rng.integers(0, 4, size=(8, 8)).astype(np.uint8)
    s_enh = rng.integers(0, 5, size=(8, 8)).astype(np.uint8)
    s_enh[s_enh == 4] = UNL
    out = enhance_pseudo_labels(p_pl, s_enh, 5, cfg)
    mask = s_enh != UNL
    assert np.array_equal(out[mask], s_enh[mask])
    assert np.array_equal(out[~mask], p_pl[~mask])


def test_schedule_rejects_unlabeled_pseudo_labels():
    cfg = EnhancementConfig()
    p_pl = np.full((2, 2), UNL, dtype=np.uint8)
    with pytest.raises(ValueError, match="fully labeled"):
        enhance_pseudo_labels(p_pl, np.zeros((2, 2), dtype=np.uint8), 0, cfg)


### config


def test_config_json_roundtrip(tmp_path):
    cfg = EnhancementConfig(tau=0.5, e_max=60, variant="enh+bg+prop", fusion="confidence")
    path = tmp_path / "cfg.json"
    cfg.to_json(path)
    back = EnhancementConfig.from_json(path)
    assert back == cfg
    doc = json.loads(path.read_text())
    assert doc == {"tau": 0.5, "e_max": 60, "variant": "enh+bg+prop", "fusion": "confidence"}


def test_config_validates_ranges():
    with pytest.raises(ValueError, match="tau"):
        EnhancementConfig(tau=1.5)
    with pytest.raises(ValueError, match="e_max"):
        EnhancementConfig(e_max=0)
    with pytest.raises(ValueError, match="fusion"):
        EnhancementConfig(fusion="mystery")

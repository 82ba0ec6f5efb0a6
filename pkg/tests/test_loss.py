"""Dice loss values and the analytic gradient against finite differences."""

import numpy as np
import pytest

from pless.loss import DiceConfig, pseudo_label_loss, soft_dice_grad, soft_dice_loss


def finite_difference_grad(pred, target, cfg, h=1e-4):
    grad = np.zeros_like(pred)
    it = np.nditer(pred, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = pred.copy()
        minus = pred.copy()
        plus[idx] += h
        minus[idx] -= h
        lp, _ = soft_dice_loss(plus, target, cfg)
        lm, _ = soft_dice_loss(minus, target, cfg)
        grad[idx] = (lp - lm) / (2 * h)
        it.iternext()
    return grad


def _one_hot(target, c):
    out = np.zeros((c,) + target.shape)
    for k in range(c):
        out[k][target == k] = 1.0
    return out


def test_perfect_prediction_zero_loss():
    rng = np.random.default_rng(0)
    target = rng.integers(0, 4, size=(6, 6)).astype(np.uint8)
    for code in range(4):  # make every class present
        target[0, code] = code
    pred = _one_hot(target, 4)
    for eps in (1e-5, 1e-3, 1.0):
        total, per_class = soft_dice_loss(pred, target, DiceConfig(epsilon=eps))
        assert total == 0.0
        assert (per_class == 0.0).all()


def test_uniform_prediction_hand_case():
    # two pixels, target [0, 1], both predictions (0.5, 0.5):
    # dice_c = 2*0.5 / (1 + 2) -> loss 0.5 per class as eps -> 0
    target = np.array([[0, 1]], dtype=np.uint8)
    pred = np.full((2, 1, 2), 0.5)
    total, per_class = soft_dice_loss(pred, target, DiceConfig(epsilon=1e-12))
    assert per_class == pytest.approx([0.5, 0.5], abs=1e-9)
    assert total == pytest.approx(0.5, abs=1e-9)


def test_wrong_prediction_near_one():
    target = np.zeros((4, 4), dtype=np.uint8)
    pred = _one_hot(np.ones((4, 4), dtype=np.uint8), 2)  # everything class 1
    total, _ = soft_dice_loss(pred, target, DiceConfig(epsilon=1e-5))
    assert total == pytest.approx(1.0, abs=1e-4)


def test_loss_bounds():
    rng = np.random.default_rng(1)
    for _ in range(20):
        pred = rng.random((4, 5, 5))
        target = rng.integers(0, 4, size=(5, 5)).astype(np.uint8)
        _, per_class = soft_dice_loss(pred, target)
        assert (per_class >= 0.0).all()
        assert (per_class < 1.0).all()


def test_foreground_only_average():
    target = np.zeros((3, 3), dtype=np.uint8)
    target[0, 0] = 1
    pred = _one_hot(target, 3)
    pred[2] = 0.0
    total_all, per_class = soft_dice_loss(pred, target, DiceConfig(class_average=True))
    total_fg, _ = soft_dice_loss(pred, target, DiceConfig(class_average=False))
    assert total_all == pytest.approx(per_class.mean())
    assert total_fg == pytest.approx(per_class[1:].mean())


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    cfg = DiceConfig()
    worst = 0.0
    for _ in range(50):
        pred = rng.uniform(0.05, 0.95, size=(4, 8, 8))
        target = rng.integers(0, 4, size=(8, 8)).astype(np.uint8)
        analytic = soft_dice_grad(pred, target, cfg)
        numeric = finite_difference_grad(pred, target, cfg)
        denom = np.maximum(np.abs(numeric), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    assert worst <= 1e-4


def test_gradient_nonpositive_for_true_class_at_optimum():
    target = np.zeros((3, 3), dtype=np.uint8)
    target[1, 1] = 1
    pred = _one_hot(target, 2)
    grad = soft_dice_grad(pred, target, DiceConfig(epsilon=1e-3))
    onehot = _one_hot(target, 2).astype(bool)
    assert (grad[onehot] <= 0).all()


def test_gradient_of_absent_class_symbolic_value():
    # class 3 in neither target nor prediction mass: N = D = eps, so the
    # entry-wise gradient is N/D^2 = 1/eps, scaled by the 1/C average
    target = np.zeros((4, 4), dtype=np.uint8)
    pred = np.zeros((4, 4, 4))
    pred[0] = 1.0
    eps = 1e-5
    grad = soft_dice_grad(pred, target, DiceConfig(epsilon=eps))
    assert grad[3] == pytest.approx(np.full((4, 4), 1.0 / (4 * eps)))


def test_pseudo_label_loss_equal_maps():
    rng = np.random.default_rng(3)
    ps = rng.random((4, 6, 6))
    target = rng.integers(0, 4, size=(6, 6)).astype(np.uint8)
    total, _ = soft_dice_loss(ps, target)
    assert pseudo_label_loss(ps, ps, target) == pytest.approx(total)


def test_pseudo_label_loss_half_when_one_map_perfect():
    target = np.zeros((4, 4), dtype=np.uint8)
    target[:2] = 1
    perfect = _one_hot(target, 2)
    wrong = _one_hot((1 - target).astype(np.uint8), 2)
    cfg = DiceConfig(epsilon=1e-12)
    assert pseudo_label_loss(perfect, wrong, target, cfg) == pytest.approx(0.5, abs=1e-6)


def test_pseudo_label_loss_symmetry_exact():
    rng = np.random.default_rng(4)
    for _ in range(10):
        ps = rng.random((4, 5, 5))
        pt = rng.random((4, 5, 5))
        target = rng.integers(0, 4, size=(5, 5)).astype(np.uint8)
        assert pseudo_label_loss(ps, pt, target) == pseudo_label_loss(pt, ps, target)


def test_loss_rejects_unlabeled_target():
    pred = np.full((4, 2, 2), 0.25)
    target = np.full((2, 2), 255, dtype=np.uint8)
    with pytest.raises(ValueError, match="class"):
        soft_dice_loss(pred, target)


def test_dice_config_validates_epsilon():
    with pytest.raises(ValueError, match="epsilon"):
        DiceConfig(epsilon=0.0)

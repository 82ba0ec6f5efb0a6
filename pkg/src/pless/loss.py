"""Smoothed soft Dice loss against hard targets, with its closed-form
gradient, and the two-branch pseudo-label loss built on it.

Per class c over pixels p, with g the one-hot target,

    loss_c = 1 - (2 * sum_p pred_c(p) * g_c(p) + eps)
                 / (sum_p pred_c(p) + sum_p g_c(p) + eps)

and the total is the mean over classes. The pseudo-label loss averages
the Dice losses of the student and teacher maps against one shared hard
target, so it is symmetric in the two maps by construction.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_labelmap, check_prob_map


@dataclass
class DiceConfig:
    """Smoothing and averaging knobs.

    class_average=True takes the mean over all classes including
    background; False restricts the mean to foreground classes (code > 0),
    matching evaluation protocols that ignore background.
    """

    epsilon: float = 1e-5
    class_average: bool = True

    def __post_init__(self):
        self.epsilon = float(self.epsilon)
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def _check_pred_target(pred, target):
    pred = check_prob_map(pred, name="predictions")
    target = check_labelmap(target, name="target")
    if pred.shape[1:] != target.shape:
        raise ValueError(
            f"prediction grid {pred.shape[1:]} does not match target {target.shape}"
        )
    n_classes = pred.shape[0]
    if target.max() >= n_classes:
        raise ValueError(
            f"target contains class {int(target.max())} but predictions have {n_classes} classes"
        )
    return pred, target


def _one_hot(target, n_classes):
    flat = np.zeros((n_classes, target.size), dtype=np.float64)
    flat[target.ravel(), np.arange(target.size)] = 1.0
    return flat.reshape((n_classes,) + target.shape)


def _class_indices(n_classes, cfg):
    if cfg.class_average:
        return np.arange(n_classes)
    return np.arange(1, n_classes)


def soft_dice_loss(pred, target, cfg=None):
    """Return (total, per_class) smoothed soft Dice loss.

    ``per_class`` always has one entry per class; ``total`` is the mean
    over the classes selected by cfg.class_average.
    """
    cfg = cfg or DiceConfig()
    pred, target = _check_pred_target(pred, target)
    n_classes = pred.shape[0]
    onehot = _one_hot(target, n_classes)
    axes = tuple(range(1, pred.ndim))
    inter = (pred * onehot).sum(axis=axes)
    denom = pred.sum(axis=axes) + onehot.sum(axis=axes)
    per_class = 1.0 - (2.0 * inter + cfg.epsilon) / (denom + cfg.epsilon)
    total = float(per_class[_class_indices(n_classes, cfg)].mean())
    return total, per_class


def soft_dice_grad(pred, target, cfg=None):
    """Gradient of the total soft Dice loss with respect to pred.

    loss_c is N_c / D_c with N_c = 2*inter + eps and D_c = sums + eps;
    d loss_c / d pred_c(p) = -(2 g_c(p) D_c - N_c) / D_c^2, scaled by the
    1/|averaged classes| of the mean. Classes outside the average have a
    zero gradient.
    """
    cfg = cfg or DiceConfig()
    pred, target = _check_pred_target(pred, target)
    n_classes = pred.shape[0]
    onehot = _one_hot(target, n_classes)
    axes = tuple(range(1, pred.ndim))
    inter = (pred * onehot).sum(axis=axes)
    denom = pred.sum(axis=axes) + onehot.sum(axis=axes)
    num = 2.0 * inter + cfg.epsilon
    den = denom + cfg.epsilon
    shape = (n_classes,) + (1,) * (pred.ndim - 1)
    grad = -(2.0 * onehot * den.reshape(shape) - num.reshape(shape)) / (den ** 2).reshape(shape)
    averaged = _class_indices(n_classes, cfg)
    scale = np.zeros(n_classes)
    scale[averaged] = 1.0 / len(averaged)
    return grad * scale.reshape(shape)


def pseudo_label_loss(ps, pt, p_enh, cfg=None):
    """Average of the student and teacher Dice losses against p_enh."""
    cfg = cfg or DiceConfig()
    ls, _ = soft_dice_loss(ps, p_enh, cfg)
    lt, _ = soft_dice_loss(pt, p_enh, cfg)
    return 0.5 * (ls + lt)

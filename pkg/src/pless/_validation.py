"""Input checking helpers shared across the package."""

import numpy as np


def check_slice(values, name="slice"):
    """Return a finite float64 2D array, raising on anything else."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2D array")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_labelmap(codes, shape=None, name="labels"):
    """Return labels as a 2D uint8 array of class codes.

    Accepts any integer dtype whose values fit in [0, 255].
    """
    arr = np.asarray(codes)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2D array")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must have an integer dtype, got {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(f"{name} values must fit in [0, 255]")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr.astype(np.uint8, copy=False)


def check_prob_map(probs, name="probabilities"):
    """Return a (C, H, W) float64 stack of per-class probabilities.

    Values must be finite and in [0, 1]; columns need not sum to one
    exactly (upstream softmaxes rarely do after serialization).
    """
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] < 2:
        raise ValueError(f"{name} must be (C, H, W) with C >= 2")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_same_shape(a, b, name_a="first", name_b="second"):
    if a.shape != b.shape:
        raise ValueError(f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}")


def check_volume_mask(mask, name="mask"):
    """Return a 3D boolean array."""
    arr = np.asarray(mask)
    if arr.ndim != 3 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 3D array")
    if arr.dtype != bool:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} must be boolean or integer")
        arr = arr != 0
    return arr

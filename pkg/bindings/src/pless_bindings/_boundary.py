"""Array checks applied at the binding boundary.

Every exposed function funnels its inputs through these before touching
the core operations, so a bad call fails here with a message naming the
offending argument. Arrays come back C-contiguous in the dtype the core
expects; inputs already in that layout cross without a copy.
"""

import numpy as np


def image_2d(values, name="image"):
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name}: expected a non-empty 2D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number):
        raise TypeError(f"{name}: expected a numeric dtype, got {arr.dtype}")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains NaN or Inf")
    return arr


def labelmap(codes, name, ndim=2):
    arr = np.asarray(codes)
    if arr.ndim != ndim or arr.size == 0:
        raise ValueError(f"{name}: expected a non-empty {ndim}D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"{name}: expected an integer dtype, got {arr.dtype}")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError(f"{name}: class codes must fit in [0, 255]")
    return np.ascontiguousarray(arr, dtype=np.uint8)


def same_shape(a, b, name_a, name_b):
    if a.shape != b.shape:
        raise ValueError(f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}")


def spacing_3d(spacing, name="spacing"):
    values = tuple(float(s) for s in spacing)
    if len(values) != 3 or any(s <= 0 for s in values):
        raise ValueError(f"{name}: expected 3 positive reals, got {spacing!r}")
    return values

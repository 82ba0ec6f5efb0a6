"""Per-batch access to scribble spreading, pseudo-label enhancement, and
evaluation metrics, for training loops that hold their data as arrays.

The three functions are pure: they never mutate their inputs and keep no
state between calls, so callers may invoke them concurrently across batch
items. Outputs match the ``pless`` command line bit for bit on identical
data. Heavy work happens inside vectorized numpy and scipy kernels.
"""

import numpy as np

from pless.enhancement import EnhancementConfig, enhance_pseudo_labels
from pless.io import DEFAULT_UNLABELED, VolumeMeta
from pless.metrics import evaluate
from pless.spreading import enhance_scribbles

from ._boundary import image_2d, labelmap, same_shape, spacing_3d
from ._version import __version__

__all__ = [
    "__version__",
    "py_enhance_scribbles",
    "py_enhance_pseudo_labels",
    "py_metrics",
]


def py_enhance_scribbles(image, scribbles, variant="enh+bg"):
    """Spread scribbles over the image's region hierarchy.

    image and scribbles are matching 2D arrays; variant is one of
    "enh", "enh+bg", "enh+bg+prop". Returns a uint8 labelmap with
    unlabeled pixels carrying code 255.
    """
    image = image_2d(image)
    scribbles = labelmap(scribbles, "scribbles")
    same_shape(image, scribbles, "image", "scribbles")
    return enhance_scribbles(image, scribbles, variant=variant)


def py_enhance_pseudo_labels(ppl, s_enh, e, tau, e_max):
    """Blend enhanced scribbles over pseudo-labels on the early-epoch
    schedule; past the cutoff the pseudo-labels pass through unchanged.

    ppl and s_enh are matching uint8 labelmaps, either a single (H, W)
    slice or an (N, H, W) batch handled slice by slice.
    """
    ppl = np.asarray(ppl)
    batched = ppl.ndim == 3
    ndim = 3 if batched else 2
    ppl = labelmap(ppl, "ppl", ndim=ndim)
    s_enh = labelmap(s_enh, "s_enh", ndim=ndim)
    same_shape(ppl, s_enh, "ppl", "s_enh")
    cfg = EnhancementConfig(tau=tau, e_max=e_max)
    if not batched:
        return enhance_pseudo_labels(ppl, s_enh, e, cfg)
    return np.stack([enhance_pseudo_labels(p, s, e, cfg) for p, s in zip(ppl, s_enh)])


def py_metrics(pred, gt, spacing=(1.0, 1.0, 1.0)):
    """Per-class DSC, HD95, and ASD between two 3D label volumes.

    spacing is (x, y, z) voxel size in millimeters. Class codes are
    taken from the label range; every non-background code up to the
    largest present is scored. Returns a plain mapping with per-class
    values keyed by code plus an "avg" entry; distance metrics for a
    class absent from both volumes are None.
    """
    pred = labelmap(pred, "pred", ndim=3)
    gt = labelmap(gt, "gt", ndim=3)
    same_shape(pred, gt, "pred", "gt")
    if int(pred.max()) == DEFAULT_UNLABELED or int(gt.max()) == DEFAULT_UNLABELED:
        raise ValueError("volumes must be fully labeled; code 255 is the unlabeled marker")
    num_classes = max(int(pred.max()), int(gt.max())) + 1
    if num_classes < 2:
        num_classes = 2
    meta = VolumeMeta(
        spacing_mm=spacing_3d(spacing),
        class_names=[f"class_{c}" for c in range(num_classes)],
        unlabeled_code=DEFAULT_UNLABELED,
    )
    return evaluate(pred, gt, meta).to_dict()

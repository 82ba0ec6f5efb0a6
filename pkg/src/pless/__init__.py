"""Pseudo-label enhancement for scribble-supervised segmentation.

The pipeline partitions each slice into a waterfall hierarchy, spreads
the scribbles through regions with a unique class candidate, expands
the background over isolated gaps, and blends the result over fused
network pseudo-labels during the early part of training. Losses and 3D
metrics round out what a training loop needs.
"""

from ._version import __version__
from .enhancement import (
    EnhancementConfig,
    FusionStrategy,
    enhance_pseudo_labels,
    enhancement_mask,
    fuse_predictions,
)
from .estimators import PseudoLabelEnhancer, WaterfallPartitioner
from .hierarchy import (
    PartitionHierarchy,
    build_hierarchy,
    gradient_magnitude,
    preprocess,
    waterfall_hierarchy,
    watershed,
)
from .io import (
    DEFAULT_UNLABELED,
    TensorFormatError,
    VolumeMeta,
    read_labelmap_image,
    read_tensor,
    write_labelmap_pgm,
    write_tensor,
)
from .loss import DiceConfig, pseudo_label_loss, soft_dice_grad, soft_dice_loss
from .metrics import MetricReport, asd, dsc_3d, evaluate, hd95, surface_voxels
from .spreading import (
    SpreadVariant,
    enhance_scribbles,
    expand_background,
    full_propagation,
    spread_scribbles,
)
from .synth import PhantomSample, make_phantom, phantom_suite

__all__ = [
    "__version__",
    "DEFAULT_UNLABELED",
    "DiceConfig",
    "EnhancementConfig",
    "FusionStrategy",
    "MetricReport",
    "PartitionHierarchy",
    "PhantomSample",
    "PseudoLabelEnhancer",
    "SpreadVariant",
    "TensorFormatError",
    "VolumeMeta",
    "WaterfallPartitioner",
    "asd",
    "build_hierarchy",
    "dsc_3d",
    "enhance_pseudo_labels",
    "enhance_scribbles",
    "enhancement_mask",
    "evaluate",
    "expand_background",
    "full_propagation",
    "fuse_predictions",
    "gradient_magnitude",
    "hd95",
    "make_phantom",
    "phantom_suite",
    "preprocess",
    "pseudo_label_loss",
    "read_labelmap_image",
    "read_tensor",
    "soft_dice_grad",
    "soft_dice_loss",
    "spread_scribbles",
    "surface_voxels",
    "waterfall_hierarchy",
    "watershed",
    "write_labelmap_pgm",
    "write_tensor",
]

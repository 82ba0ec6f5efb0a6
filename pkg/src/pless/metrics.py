"""Volume metrics: 3D Dice overlap and surface distances in millimetres.

Distances are measured between surface voxel centers, where a surface
voxel is a foreground voxel with at least one six-connected neighbor
that is background or outside the volume. Anisotropic spacing scales
each axis before the Euclidean distance. HD95 uses the nearest-rank
95th percentile of the directed distances; ASD is the mean over the
pooled directed multisets. A class with an empty mask on either side
has undefined distances, reported as NaN and excluded from averages.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from ._validation import check_volume_mask

_CROSS_3D = ndi.generate_binary_structure(3, 1)
_CHUNK = 2048  # pairwise-distance rows per block, bounds peak memory


@dataclass
class MetricReport:
    """Per-class and class-averaged metrics.

    Keys of the per-class dicts are class codes. Undefined distances are
    NaN; ``defined_distance_classes`` counts the classes that entered
    the HD95/ASD averages.
    """

    dsc: dict = field(default_factory=dict)
    hd95_mm: dict = field(default_factory=dict)
    asd_mm: dict = field(default_factory=dict)
    dsc_avg: float = math.nan
    hd95_avg_mm: float = math.nan
    asd_avg_mm: float = math.nan
    defined_distance_classes: int = 0

    def to_dict(self):
        def _clean(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

        return {
            "dsc": {str(c): _clean(v) for c, v in self.dsc.items()},
            "hd95_mm": {str(c): _clean(v) for c, v in self.hd95_mm.items()},
            "asd_mm": {str(c): _clean(v) for c, v in self.asd_mm.items()},
            "avg": {
                "dsc": _clean(self.dsc_avg),
                "hd95_mm": _clean(self.hd95_avg_mm),
                "asd_mm": _clean(self.asd_avg_mm),
            },
            "defined_distance_classes": self.defined_distance_classes,
        }


def dsc_3d(pred, gt, class_code):
    """Dice overlap of one class; 1.0 when the class is absent from both."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"pred shape {pred.shape} does not match gt shape {gt.shape}")
    p = pred == class_code
    g = gt == class_code
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def surface_voxels(mask):
    """Boolean volume marking foreground voxels with a six-connected
    background-or-outside neighbor."""
    mask = check_volume_mask(mask)
    eroded = ndi.binary_erosion(mask, structure=_CROSS_3D, border_value=0)
    return mask & ~eroded


def _surface_points_mm(mask, spacing_mm):
    coords = np.argwhere(surface_voxels(mask)).astype(np.float64)
    return coords * np.asarray(spacing_mm, dtype=np.float64)


def _directed_distances(points_a, points_b):
    """Distance from each point of A to the nearest point of B."""
    out = np.empty(len(points_a), dtype=np.float64)
    for start in range(0, len(points_a), _CHUNK):
        block = points_a[start : start + _CHUNK]
        diff = block[:, None, :] - points_b[None, :, :]
        sq = (diff * diff).sum(axis=2)
        out[start : start + len(block)] = np.sqrt(sq.min(axis=1))
    return out


def _surface_distance_pair(pred_mask, gt_mask, spacing_mm):
    """Directed surface-distance multisets (pred→gt, gt→pred) or None
    when either mask is empty."""
    p = _surface_points_mm(pred_mask, spacing_mm)
    g = _surface_points_mm(gt_mask, spacing_mm)
    if len(p) == 0 or len(g) == 0:
        return None
    return _directed_distances(p, g), _directed_distances(g, p)


def _nearest_rank_95(distances):
    d = np.sort(distances)
    rank = math.ceil(0.95 * len(d))
    return float(d[rank - 1])


def hd95(pred_mask, gt_mask, spacing_mm=(1.0, 1.0, 1.0)):
    """95th-percentile Hausdorff distance in mm; NaN if a mask is empty."""
    pair = _surface_distance_pair(check_volume_mask(pred_mask), check_volume_mask(gt_mask), spacing_mm)
    if pair is None:
        return math.nan
    fwd, bwd = pair
    return max(_nearest_rank_95(fwd), _nearest_rank_95(bwd))


def _pooled_mean(fwd, bwd):
    # scalar addition commutes, so this is exactly symmetric in (A, B)
    return float((fwd.sum() + bwd.sum()) / (len(fwd) + len(bwd)))


def asd(pred_mask, gt_mask, spacing_mm=(1.0, 1.0, 1.0)):
    """Average symmetric surface distance in mm; NaN if a mask is empty."""
    pair = _surface_distance_pair(check_volume_mask(pred_mask), check_volume_mask(gt_mask), spacing_mm)
    if pair is None:
        return math.nan
    fwd, bwd = pair
    return _pooled_mean(fwd, bwd)


def evaluate(pred, gt, meta):
    """Per-class metrics for every non-background class, plus unweighted
    averages. Distance averages skip classes with an empty mask."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.ndim != 3 or gt.ndim != 3:
        raise ValueError("expected 3D volumes")
    if pred.shape != gt.shape:
        raise ValueError(f"pred shape {pred.shape} does not match gt shape {gt.shape}")
    report = MetricReport()
    spacing = meta.spacing_mm
    codes = [c for c in range(meta.num_classes) if c != 0]
    for c in codes:
        p = pred == c
        g = gt == c
        report.dsc[c] = dsc_3d(pred, gt, c)
        pair = _surface_distance_pair(p, g, spacing)
        if pair is None:
            report.hd95_mm[c] = math.nan
            report.asd_mm[c] = math.nan
        else:
            fwd, bwd = pair
            report.hd95_mm[c] = max(_nearest_rank_95(fwd), _nearest_rank_95(bwd))
            report.asd_mm[c] = _pooled_mean(fwd, bwd)
    report.dsc_avg = float(np.mean([report.dsc[c] for c in codes]))
    defined = [c for c in codes if not math.isnan(report.hd95_mm[c])]
    report.defined_distance_classes = len(defined)
    if defined:
        report.hd95_avg_mm = float(np.mean([report.hd95_mm[c] for c in defined]))
        report.asd_avg_mm = float(np.mean([report.asd_mm[c] for c in defined]))
    return report

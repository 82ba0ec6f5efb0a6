"""Scribble spreading over region hierarchies.

Three stages, composable per variant:

* ``spread_scribbles`` walks the hierarchy coarsest to finest and fills
  every region whose labeled pixels agree on a single class; conflicted
  or empty regions pass through untouched.
* ``expand_background`` relabels unlabeled components that touch no
  foreground pixel, closing gaps and border holes.
* ``full_propagation`` floods whatever is still unlabeled from the
  nearest labeled pixels (ties to the smallest class code).

All stages preserve existing labels; the labeled set only grows.
"""

import enum

import numpy as np
from scipy import ndimage as ndi

from ._validation import check_labelmap, check_same_shape
from .hierarchy import build_hierarchy
from .io import DEFAULT_UNLABELED

_CROSS = ndi.generate_binary_structure(2, 1)
_BACKGROUND = 0


class SpreadVariant(enum.Enum):
    """Which stages run, named as in the CLI and config files."""

    ENH = "enh"
    ENH_BG = "enh+bg"
    ENH_BG_PROP = "enh+bg+prop"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name))
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown spread variant {name!r}; choose one of: {choices}") from None


def spread_scribbles(hier, scribbles, unlabeled_code=DEFAULT_UNLABELED):
    """Spread scribble classes through the hierarchy, coarse to fine.

    At each layer a region's candidate set is the distinct classes among
    its already-labeled pixels (original scribbles plus anything a
    coarser layer committed). Exactly one candidate labels the region's
    unlabeled pixels; zero or several leave it unchanged. Scribbled
    pixels are never overwritten.
    """
    labels = check_labelmap(scribbles, name="scribbles").copy()
    if hier.layers[0].shape != labels.shape:
        raise ValueError(
            f"hierarchy shape {hier.layers[0].shape} does not match scribbles {labels.shape}"
        )
    for regions in reversed(hier.layers):
        n = int(regions.max()) + 1
        labeled = labels != unlabeled_code
        if not labeled.any():
            break
        # region × class presence via one bincount over packed pairs
        packed = regions[labeled].astype(np.int64) * 256 + labels[labeled]
        presence = np.bincount(packed, minlength=n * 256).reshape(n, 256) > 0
        n_classes = presence.sum(axis=1)
        unique = n_classes == 1
        winner = presence.argmax(axis=1).astype(np.uint8)
        fill = unique[regions] & ~labeled
        labels[fill] = winner[regions[fill]]
    return labels


def expand_background(spread, unlabeled_code=DEFAULT_UNLABELED, background_code=_BACKGROUND):
    """Relabel isolated unlabeled components as background.

    A 4-connected unlabeled component becomes background iff none of its
    pixels is 4-adjacent to a foreground label (anything other than
    background or unlabeled). The image border counts as non-foreground,
    so border holes close too.
    """
    labels = check_labelmap(spread, name="labels").copy()
    unlabeled = labels == unlabeled_code
    if not unlabeled.any():
        return labels
    foreground = ~unlabeled & (labels != background_code)
    comp, n = ndi.label(unlabeled, structure=_CROSS)
    near_fg = ndi.binary_dilation(foreground, structure=_CROSS)
    touched = np.unique(comp[near_fg & unlabeled])
    blocked = np.zeros(n + 1, dtype=bool)
    blocked[touched] = True
    labels[unlabeled & ~blocked[comp]] = background_code
    return labels


def full_propagation(partial, unlabeled_code=DEFAULT_UNLABELED):
    """Assign every unlabeled pixel the class of its nearest labeled pixel.

    Multi-source BFS over the 4-neighborhood; pixels equidistant from
    several classes take the smallest class code. Raises on a fully
    unlabeled input.
    """
    labels = check_labelmap(partial, name="labels").copy()
    unlabeled = labels == unlabeled_code
    if unlabeled.all():
        raise ValueError("nothing to propagate: every pixel is unlabeled")
    while unlabeled.any():
        snapshot = labels.copy()
        for code in np.unique(snapshot[~unlabeled]):
            reach = ndi.binary_dilation(snapshot == code, structure=_CROSS)
            take = reach & unlabeled
            labels[take] = code
            unlabeled &= ~take
    return labels


def enhance_scribbles(
    image,
    scribbles,
    variant=SpreadVariant.ENH_BG,
    max_layers=4,
    unlabeled_code=DEFAULT_UNLABELED,
    hier=None,
):
    """Produce enhanced scribbles from a raw slice: spread, then the
    optional background and propagation stages of the chosen variant.

    Pass ``hier`` to reuse a prebuilt hierarchy for the same slice.
    """
    variant = SpreadVariant.parse(variant)
    image = np.asarray(image)
    scribbles = check_labelmap(scribbles, name="scribbles")
    check_same_shape(image, scribbles, "image", "scribbles")
    if hier is None:
        hier = build_hierarchy(image, max_layers=max_layers)
    out = spread_scribbles(hier, scribbles, unlabeled_code=unlabeled_code)
    if variant in (SpreadVariant.ENH_BG, SpreadVariant.ENH_BG_PROP):
        out = expand_background(out, unlabeled_code=unlabeled_code)
    if variant is SpreadVariant.ENH_BG_PROP:
        out = full_propagation(out, unlabeled_code=unlabeled_code)
    return out

"""Estimator-style wrappers around the functional pipeline.

Training loops pay the hierarchy and spreading cost once per slice but
re-blend pseudo-labels every epoch, which maps naturally onto the
fit/transform split: ``fit`` digests the slice and its scribbles,
``transform`` applies the schedule to a fresh pseudo-label map.
Parameters follow scikit-learn conventions (constructor kwargs only,
``get_params``/``set_params``, trailing-underscore fitted attributes).
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_labelmap, check_same_shape
from .enhancement import (
    EnhancementConfig,
    FusionStrategy,
    enhance_pseudo_labels,
    enhancement_mask,
    fuse_predictions,
)
from .hierarchy import (
    build_hierarchy,
    gradient_magnitude,
    preprocess,
    waterfall_hierarchy,
    watershed,
)
from .io import DEFAULT_UNLABELED
from .spreading import SpreadVariant, enhance_scribbles, spread_scribbles


class WaterfallPartitioner(BaseEstimator):
    """Nested region partitions of a 2D slice.

    Parameters
    ----------
    max_layers : int, default 4
        Upper bound on hierarchy depth, the finest watershed included.

    Attributes
    ----------
    hierarchy_ : PartitionHierarchy
    relief_ : ndarray
        Gradient relief the watershed flooded.
    """

    def __init__(self, max_layers=4):
        self.max_layers = max_layers

    def fit(self, X, y=None):
        slice_values = preprocess(X)
        self.relief_ = gradient_magnitude(slice_values)
        finest = watershed(self.relief_)
        self.hierarchy_ = waterfall_hierarchy(self.relief_, finest, max_layers=self.max_layers)
        return self

    def transform(self, X=None):
        """Region labelings, finest first, for the fitted slice."""
        self._check_fitted()
        return [layer.copy() for layer in self.hierarchy_.layers]

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform()

    def _check_fitted(self):
        if not hasattr(self, "hierarchy_"):
            raise NotFittedError("this WaterfallPartitioner is not fitted; call fit first")


class PseudoLabelEnhancer(BaseEstimator):
    """Scribble spreading plus the scheduled pseudo-label blend.

    ``fit(image, scribbles)`` builds the hierarchy, spreads the
    scribbles, and stores the enhancement mask. ``transform`` then maps
    a fused pseudo-label slice (or a (ps, pt) pair via ``predict``) to
    its enhanced version for a given epoch.

    Parameters
    ----------
    tau : float, default 0.25
        Fraction of e_max during which enhancement applies.
    e_max : int, default 100
        Schedule horizon in epochs.
    variant : str or SpreadVariant, default "enh+bg"
    fusion : str or FusionStrategy, default "average"
    max_layers : int, default 4
    unlabeled_code : int, default 255

    Attributes
    ----------
    hierarchy_ : PartitionHierarchy
    spread_labels_ : ndarray, S^w
    enhanced_scribbles_ : ndarray, S^Enh
    mask_ : ndarray of bool, the enhancement mask M
    config_ : EnhancementConfig
    """

    def __init__(
        self,
        tau=0.25,
        e_max=100,
        variant="enh+bg",
        fusion="average",
        max_layers=4,
        unlabeled_code=DEFAULT_UNLABELED,
    ):
        self.tau = tau
        self.e_max = e_max
        self.variant = variant
        self.fusion = fusion
        self.max_layers = max_layers
        self.unlabeled_code = unlabeled_code

    def fit(self, X, y):
        """Digest one slice: X is the image, y the scribble map."""
        config = EnhancementConfig(
            tau=self.tau, e_max=self.e_max, variant=self.variant, fusion=self.fusion
        )
        scribbles = check_labelmap(np.asarray(y), name="scribbles")
        image = np.asarray(X)
        check_same_shape(image, scribbles, "image", "scribbles")
        self.config_ = config
        self.hierarchy_ = build_hierarchy(image, max_layers=self.max_layers)
        self.spread_labels_ = spread_scribbles(
            self.hierarchy_, scribbles, unlabeled_code=self.unlabeled_code
        )
        self.enhanced_scribbles_ = enhance_scribbles(
            image,
            scribbles,
            variant=config.variant,
            unlabeled_code=self.unlabeled_code,
            hier=self.hierarchy_,
        )
        self.mask_ = enhancement_mask(self.enhanced_scribbles_, unlabeled_code=self.unlabeled_code)
        return self

    def transform(self, p_pl, epoch=0):
        """Blend the fitted enhanced scribbles into pseudo-labels."""
        self._check_fitted()
        return enhance_pseudo_labels(
            p_pl,
            self.enhanced_scribbles_,
            epoch,
            self.config_,
            unlabeled_code=self.unlabeled_code,
        )

    def predict(self, ps, pt, epoch=0):
        """Fuse raw probability maps, then blend. Convenience for loops
        that have not materialized P^pl themselves."""
        self._check_fitted()
        fused = fuse_predictions(ps, pt, self.config_.fusion)
        return self.transform(fused, epoch=epoch)

    def _check_fitted(self):
        if not hasattr(self, "enhanced_scribbles_"):
            raise NotFittedError("this PseudoLabelEnhancer is not fitted; call fit first")

"""Pseudo-label fusion and the tolerance-scheduled enhancement blend.

Student and teacher probability maps are fused into a hard pseudo-label
map; during the early fraction of training controlled by ``tau`` and
``e_max``, pixels covered by enhanced scribbles are overwritten with the
scribble class. Past the cutoff the pseudo-labels pass through
untouched, so the schedule is exactly

    output = s_enh where mask and e <= tau * e_max, else p_pl.
"""

import enum
import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_labelmap, check_prob_map, check_same_shape
from .io import DEFAULT_UNLABELED
from .spreading import SpreadVariant

_PROB_SUM_TOL = 1e-5


class FusionStrategy(enum.Enum):
    """How the student and teacher maps combine into one hard labeling."""

    AVERAGE_ARGMAX = "average"
    CONFIDENCE_SELECT = "confidence"
    STUDENT_ONLY = "student"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name))
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown fusion strategy {name!r}; choose one of: {choices}") from None


@dataclass
class EnhancementConfig:
    """Schedule and pipeline knobs, round-trippable through JSON."""

    tau: float = 0.25
    e_max: int = 100
    variant: SpreadVariant = SpreadVariant.ENH_BG
    fusion: FusionStrategy = FusionStrategy.AVERAGE_ARGMAX

    def __post_init__(self):
        self.tau = float(self.tau)
        self.e_max = int(self.e_max)
        self.variant = SpreadVariant.parse(self.variant)
        self.fusion = FusionStrategy.parse(self.fusion)
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.e_max < 1:
            raise ValueError(f"e_max must be >= 1, got {self.e_max}")

    @property
    def cutoff(self):
        """Last epoch (real-valued) at which enhancement applies."""
        return self.tau * self.e_max

    def to_json(self, path):
        doc = {
            "tau": self.tau,
            "e_max": self.e_max,
            "variant": self.variant.value,
            "fusion": self.fusion.value,
        }
        with open(path, "w", encoding="ascii") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_mapping(cls, doc):
        known = {k: doc[k] for k in ("tau", "e_max", "variant", "fusion") if k in doc}
        extra = set(doc) - {"tau", "e_max", "variant", "fusion"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**known)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="ascii") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config must be a JSON object")
        return cls.from_mapping(doc)


def _check_pair(ps, pt):
    ps = check_prob_map(ps, name="student probabilities")
    pt = check_prob_map(pt, name="teacher probabilities")
    if ps.shape != pt.shape:
        raise ValueError(f"student shape {ps.shape} does not match teacher shape {pt.shape}")
    for name, arr in (("student", ps), ("teacher", pt)):
        sums = arr.sum(axis=0)
        if np.abs(sums - 1.0).max() > _PROB_SUM_TOL:
            raise ValueError(f"{name} probabilities do not sum to 1 per pixel")
    return ps, pt


def fuse_predictions(ps, pt, strategy=FusionStrategy.AVERAGE_ARGMAX):
    """Combine student and teacher probability maps into hard labels.

    average: argmax of the mean map. confidence: per pixel, argmax of
    whichever map is more confident (its own max probability); exact
    confidence ties go to the student. student: argmax of ps alone.
    Argmax ties always resolve to the smallest class code.
    """
    strategy = FusionStrategy.parse(strategy)
    ps, pt = _check_pair(ps, pt)
    if strategy is FusionStrategy.AVERAGE_ARGMAX:
        fused = (ps + pt) / 2.0
        labels = fused.argmax(axis=0)
    elif strategy is FusionStrategy.CONFIDENCE_SELECT:
        teacher_wins = pt.max(axis=0) > ps.max(axis=0)
        labels = np.where(teacher_wins, pt.argmax(axis=0), ps.argmax(axis=0))
    else:
        labels = ps.argmax(axis=0)
    return labels.astype(np.uint8)


def enhancement_mask(s_enh, unlabeled_code=DEFAULT_UNLABELED):
    """Binary indicator of pixels carrying an enhanced scribble label."""
    labels = check_labelmap(s_enh, name="enhanced scribbles")
    return labels != unlabeled_code


def enhance_pseudo_labels(p_pl, s_enh, epoch, cfg, unlabeled_code=DEFAULT_UNLABELED):
    """Blend enhanced scribbles over pseudo-labels while the schedule allows.

    For epoch e <= tau * e_max (inclusive, no rounding) every masked
    pixel takes its scribble class and the rest keep the pseudo-label;
    afterwards the pseudo-labels are returned bit for bit.
    """
    p_pl = check_labelmap(p_pl, name="pseudo-labels")
    s_enh = check_labelmap(s_enh, name="enhanced scribbles")
    check_same_shape(p_pl, s_enh, "pseudo-labels", "enhanced scribbles")
    if (p_pl == unlabeled_code).any():
        raise ValueError("pseudo-labels must be fully labeled")
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    if epoch > cfg.cutoff:
        return p_pl.copy()
    mask = s_enh != unlabeled_code
    return np.where(mask, s_enh, p_pl)

"""
Gaussian affinities between detections.

Each of the four box parameters (cx, cy, w, h) contributes a Gaussian factor
``exp(-d**2 / (2 * scale**2))`` of its difference ``d``; the product is
multiplied by a label factor and, optionally, by the geometric mean of the two
confidences. Unlike IoU, the score never drops to zero for finite
displacements, so boxes that do not overlap can still be linked.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError
from .model import BBox, StereoDetection

__all__ = (
    "AffinityConfig",
    "pair_score",
    "score_matrix",
    "stereo_pair_score",
    "stereo_score_matrix",
)

DEFAULT_SCALE = 0.1
DEFAULT_LABEL_MISMATCH_FACTOR = 0.5

STEREO_SIDES = ("left", "right")


@dataclass(frozen=True)
class AffinityConfig:
    """
    Parameters of :func:`pair_score`.

    :param scale: Gaussian width (temperature) in fractional image units.
            Smaller values make matching stricter.
    :type scale: float, default = 0.1
    :param label_mismatch_factor: Multiplier applied when labels differ.
    :type label_mismatch_factor: float, default = 0.5
    :param use_confidence: If True, scores are weighted by
            ``sqrt(a.confidence * b.confidence)``.
    :type use_confidence: bool, default = True
    :param cx_factor: Multiplier of ``scale`` on the horizontal center axis.
            Stereo matching widens this axis to tolerate disparity.
    :type cx_factor: float, default = 1.0
    """

    scale: float = DEFAULT_SCALE
    label_mismatch_factor: float = DEFAULT_LABEL_MISMATCH_FACTOR
    use_confidence: bool = True
    cx_factor: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ConfigurationError(
                "scale must be a positive number, got {!r}".format(self.scale)
            )
        if not 0.0 <= self.label_mismatch_factor <= 1.0:
            raise ConfigurationError(
                "label_mismatch_factor must be in [0, 1], got {!r}".format(
                    self.label_mismatch_factor
                )
            )
        if not (math.isfinite(self.cx_factor) and self.cx_factor > 0):
            raise ConfigurationError(
                "cx_factor must be a positive number, got {!r}".format(self.cx_factor)
            )

    @property
    def scales(self):
        """
        Per-parameter scales, in ``(cx, cy, w, h)`` order.
        """
        return (self.scale * self.cx_factor, self.scale, self.scale, self.scale)


def pair_score(a: BBox, b: BBox, cfg: AffinityConfig) -> float:
    """
    Similarity of two boxes, in [0, 1].

    Symmetric in ``a`` and ``b``; 1.0 for identical boxes with equal labels
    and unit confidences.
    """
    exponent = sum(
        ((pa - pb) / scale) ** 2
        for pa, pb, scale in zip(a.params, b.params, cfg.scales)
    )
    score = math.exp(-0.5 * exponent)
    if a.label != b.label:
        score *= cfg.label_mismatch_factor
    if cfg.use_confidence:
        score *= math.sqrt(a.confidence * b.confidence)
    return score


def _as_arrays(boxes: Sequence[BBox]):
    params = np.array([box.params for box in boxes], dtype=float).reshape(-1, 4)
    labels = np.array([box.label for box in boxes], dtype=object)
    confidences = np.array([box.confidence for box in boxes], dtype=float)
    return params, labels, confidences


def score_matrix(
    as_: Sequence[BBox], bs: Sequence[BBox], cfg: AffinityConfig
) -> np.ndarray:
    """
    ``len(as_) x len(bs)`` matrix of :func:`pair_score` values.
    """
    a_params, a_labels, a_conf = _as_arrays(as_)
    b_params, b_labels, b_conf = _as_arrays(bs)

    diff = (a_params[:, None, :] - b_params[None, :, :]) / np.asarray(cfg.scales)
    scores = np.exp(-0.5 * np.sum(np.square(diff), axis=2))

    same = a_labels[:, None] == b_labels[None, :]
    scores = np.where(same, scores, scores * cfg.label_mismatch_factor)
    if cfg.use_confidence:
        scores = scores * np.sqrt(a_conf[:, None] * b_conf[None, :])

    return scores.reshape(len(as_), len(bs))


def stereo_pair_score(
    a: StereoDetection, b: StereoDetection, cfg: AffinityConfig
) -> float:
    """
    Mean :func:`pair_score` over the sides present in both detections; 0.0
    when they share no side.
    """
    scores = [
        pair_score(getattr(a, side), getattr(b, side), cfg)
        for side in STEREO_SIDES
        if getattr(a, side) is not None and getattr(b, side) is not None
    ]
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


def stereo_score_matrix(
    as_: Sequence[StereoDetection], bs: Sequence[StereoDetection], cfg: AffinityConfig
) -> np.ndarray:
    """
    ``len(as_) x len(bs)`` matrix of :func:`stereo_pair_score` values.
    """
    total = np.zeros((len(as_), len(bs)))
    shared = np.zeros((len(as_), len(bs)))
    for side in STEREO_SIDES:
        rows = [i for i, det in enumerate(as_) if getattr(det, side) is not None]
        cols = [j for j, det in enumerate(bs) if getattr(det, side) is not None]
        if not rows or not cols:
            continue
        block = np.ix_(rows, cols)
        total[block] += score_matrix(
            [getattr(as_[i], side) for i in rows],
            [getattr(bs[j], side) for j in cols],
            cfg,
        )
        shared[block] += 1

    return np.divide(total, shared, out=np.zeros_like(total), where=shared > 0)

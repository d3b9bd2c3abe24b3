"""
Combining detections of several sources at the same time point: a stereo
camera pair, or an ensemble of detectors.

Exact assignment over more than two detection sets is too expensive, so both
cases are reduced to a sequence of two-set matches.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .affinity import AffinityConfig, stereo_score_matrix
from .assign import DEFAULT_CUTOFF, match
from .exceptions import ConfigurationError, PairingError
from .model import BBox, Frame, StereoDetection, Track
from .tracking import TrackerConfig, run
from .util import parallel_map

__all__ = (
    "ConsensusConfig",
    "StereoConfig",
    "align_frames",
    "consensus_all",
    "consensus_track",
    "ensemble_consensus",
    "stereo_link",
    "stereo_link_all",
    "stereo_track",
)

DEFAULT_DISPARITY_FACTOR = 3.0


@dataclass(frozen=True)
class StereoConfig:
    """
    :param affinity: Scoring between left and right boxes. The default
            widens the horizontal axis by :data:`DEFAULT_DISPARITY_FACTOR`.
    :param cutoff: Minimum score for a left/right pair.
    :param track: If False, only link the cameras, not time points.
    """

    affinity: AffinityConfig = field(
        default_factory=lambda: AffinityConfig(cx_factor=DEFAULT_DISPARITY_FACTOR)
    )
    cutoff: float = DEFAULT_CUTOFF
    track: bool = True


@dataclass(frozen=True)
class ConsensusConfig:
    """
    :param affinity: Scoring between detections and cluster representatives.
    :param cutoff: Minimum score for a detection to join a cluster.
    :param min_support: Number of detectors that must contribute to a
            cluster for it to be reported. None means a majority,
            ``ceil(N / 2)`` of N detectors.
    :param track: If False, only produce per-frame consensus.
    """

    affinity: AffinityConfig = field(default_factory=AffinityConfig)
    cutoff: float = DEFAULT_CUTOFF
    min_support: Optional[int] = None
    track: bool = True

    def __post_init__(self):
        if self.min_support is not None and self.min_support < 1:
            raise ConfigurationError(
                "min_support must be at least 1, got {!r}".format(self.min_support)
            )

    def support_for(self, n_detectors: int) -> int:
        support = (
            self.min_support
            if self.min_support is not None
            else math.ceil(n_detectors / 2)
        )
        if support > n_detectors:
            raise ConfigurationError(
                "min_support {} exceeds the number of detectors ({})".format(
                    support, n_detectors
                )
            )
        return support


def align_frames(sequences: Sequence[Sequence[Frame]]) -> List[Tuple[Frame, ...]]:
    """
    Group frames of several sources by timestamp.

    A source without a frame at some time point contributes an empty frame,
    named after the first source that has one.

    :return: One tuple per timestamp (ascending), one frame per source.
    """
    by_source: List[Dict[int, Frame]] = [
        {frame.time: frame for frame in frames} for frames in sequences
    ]
    times = sorted(set().union(*by_source)) if by_source else []

    aligned = []
    for time in times:
        present = [frames[time] for frames in by_source if time in frames]
        name = present[0].name
        if len(present) < len(by_source):
            logger.warning(
                "time {} ({}): {} of {} sources have no frame",
                time,
                name,
                len(by_source) - len(present),
                len(by_source),
            )
        aligned.append(
            tuple(frames.get(time, Frame(name, time)) for frames in by_source)
        )
    return aligned


def stereo_link(left: Frame, right: Frame, cfg: StereoConfig) -> List[StereoDetection]:
    """
    Pair the detections of a left and a right frame taken at the same time.

    Paired detections come first, in left order, followed by unmatched
    left and then unmatched right detections as one-sided values.

    :raises PairingError: if the frames have different timestamps.
    """
    if left.time != right.time:
        raise PairingError(
            "cannot link left frame {!r} (time {}) with right frame {!r} "
            "(time {})".format(left.name, left.time, right.name, right.time)
        )

    assignment = match(left.detections, right.detections, cfg.affinity, cfg.cutoff)
    partner = {i: j for i, j, _ in assignment.pairs}
    time = left.time

    linked = [
        StereoDetection(
            left=left.detections[i], right=right.detections[partner[i]], time=time
        )
        for i in sorted(partner)
    ]
    linked.extend(
        StereoDetection(left=left.detections[i], right=None, time=time)
        for i in assignment.unmatched_left
    )
    linked.extend(
        StereoDetection(left=None, right=right.detections[j], time=time)
        for j in assignment.unmatched_right
    )
    return linked


def _link_pair(pair: Tuple[Frame, Frame], cfg: StereoConfig) -> Frame:
    left, right = pair
    return Frame(left.name, left.time, stereo_link(left, right, cfg))


def stereo_link_all(
    left_frames: Sequence[Frame],
    right_frames: Sequence[Frame],
    cfg: StereoConfig,
    n_jobs=None,
) -> List[Frame]:
    """
    :func:`stereo_link` every time point of two frame sequences.

    :return: Frames holding :class:`~detlink.model.StereoDetection` values,
            named after the left frames.
    """
    pairs = align_frames([left_frames, right_frames])
    return parallel_map(_link_pair, pairs, n_jobs=n_jobs, cfg=cfg)


def stereo_track(
    left_frames: Sequence[Frame],
    right_frames: Sequence[Frame],
    cfg: StereoConfig,
    tcfg: TrackerConfig,
    n_jobs=None,
) -> List[Track]:
    """
    Link the cameras at every time point, then track the stereo detections.

    Temporal affinity between two stereo detections is the mean score over
    the sides they share, so a track survives one camera missing the object.
    """
    linked = stereo_link_all(left_frames, right_frames, cfg, n_jobs=n_jobs)
    return run(linked, tcfg, scorer=stereo_score_matrix)


def _weights(members: Sequence[BBox]) -> Optional[np.ndarray]:
    weights = np.array([box.confidence for box in members], dtype=float)
    return weights if weights.sum() > 0 else None


def _mean_params(members: Sequence[BBox]) -> Tuple[float, ...]:
    if len(members) == 1:
        return members[0].params
    params = np.array([box.params for box in members], dtype=float)
    mean = np.average(params, axis=0, weights=_weights(members))
    # Keep the mean inside the members' range despite rounding.
    mean = np.clip(mean, params.min(axis=0), params.max(axis=0))
    return tuple(float(value) for value in mean)


def _majority_label(members: Sequence[BBox]) -> str:
    weights = _weights(members)
    votes: Dict[str, float] = {}
    for index, box in enumerate(members):
        votes[box.label] = votes.get(box.label, 0.0) + (
            1.0 if weights is None else weights[index]
        )
    return min(votes, key=lambda label: (-votes[label], label))


def _mean_confidence(members: Sequence[BBox]) -> float:
    confidences = [box.confidence for box in members]
    mean = math.fsum(confidences) / len(confidences)
    return min(max(mean, min(confidences)), max(confidences))


def _representative(members: Sequence[BBox]) -> BBox:
    return BBox(
        *_mean_params(members), _majority_label(members), _mean_confidence(members)
    )


def _fuse(members: Sequence[BBox], n_detectors: int) -> BBox:
    # Summed confidence over the number of detectors; exact when all agree.
    confidence = _mean_confidence(members) * (len(members) / n_detectors)
    return BBox(*_mean_params(members), _majority_label(members), confidence)


def ensemble_consensus(frames: Sequence[Frame], cfg: ConsensusConfig) -> Frame:
    """
    Fuse the detections of several detectors on the same frame.

    Clusters start from the first detector's detections. Each further
    detector is matched against the current cluster representatives; its
    matched detections join those clusters and the rest start new ones.
    Clusters supported by at least ``min_support`` detectors are reported as
    the confidence-weighted mean box, with the confidence-weighted majority
    label and the summed confidence divided by the number of detectors.

    :param frames: One frame per detector, in command-line order.

    :raises PairingError: if the frames have different timestamps.
    """
    if not frames:
        raise ConfigurationError("consensus needs at least one detector frame")
    time = frames[0].time
    for frame in frames[1:]:
        if frame.time != time:
            raise PairingError(
                "cannot combine frame {!r} (time {}) with frame {!r} (time {})".format(
                    frames[0].name, time, frame.name, frame.time
                )
            )

    n_detectors = len(frames)
    support = cfg.support_for(n_detectors)

    clusters: List[List[BBox]] = [[box] for box in frames[0].detections]
    for frame in frames[1:]:
        representatives = [_representative(members) for members in clusters]
        assignment = match(
            frame.detections, representatives, cfg.affinity, cfg.cutoff
        )
        for i, j, _ in assignment.pairs:
            clusters[j].append(frame.detections[i])
        clusters.extend([frame.detections[i]] for i in assignment.unmatched_left)

    fused = [
        _fuse(members, n_detectors) for members in clusters if len(members) >= support
    ]
    logger.debug(
        "time {}: {} clusters, {} with support >= {}",
        time,
        len(clusters),
        len(fused),
        support,
    )
    return Frame(frames[0].name, time, fused)


def consensus_all(
    sequences: Sequence[Sequence[Frame]], cfg: ConsensusConfig, n_jobs=None
) -> List[Frame]:
    """
    :func:`ensemble_consensus` every time point of several detectors'
    frame sequences.
    """
    groups = align_frames(sequences)
    return parallel_map(ensemble_consensus, groups, n_jobs=n_jobs, cfg=cfg)


def consensus_track(
    sequences: Sequence[Sequence[Frame]],
    cfg: ConsensusConfig,
    tcfg: TrackerConfig,
    n_jobs=None,
) -> List[Track]:
    """
    Track the per-frame consensus of several detectors.
    """
    return run(consensus_all(sequences, cfg, n_jobs=n_jobs), tcfg)

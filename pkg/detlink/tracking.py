"""
Frame-by-frame tracking.

Each new frame is matched against the most recent observation of every active
track. Tracks that have gone unobserved for more than ``max_age`` time steps
are retired before matching, and unmatched detections start new tracks.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from .affinity import AffinityConfig, score_matrix
from .assign import DEFAULT_CUTOFF, match_scores
from .exceptions import ConfigurationError, OrderingError
from .model import BBox, Frame, Observation, StereoDetection, Track

__all__ = (
    "TrackerConfig",
    "TrackerState",
    "interpolate_track",
    "run",
    "step",
    "track_consensus_label",
)

DEFAULT_MAX_AGE = 0

# The confidence of boxes inserted by interpolation.
INTERPOLATED_CONFIDENCE = 0.0

Scorer = Callable[[Sequence, Sequence, AffinityConfig], object]


@dataclass(frozen=True)
class TrackerConfig:
    """
    :param affinity: Scoring parameters.
    :param cutoff: Minimum score for a track/detection pair to be linked.
    :type cutoff: float, default = 0.01
    :param max_age: Number of consecutive time steps a track may go
            unobserved and still be continued.
    :type max_age: int, default = 0
    :param interpolate: If True, :func:`run` fills track gaps with
            interpolated boxes of confidence 0.0.
    :type interpolate: bool, default = False
    :param unknown_label: Class token that should not win a track's
            consensus vote while other labels are present.
    :type unknown_label: str, optional
    """

    affinity: AffinityConfig = field(default_factory=AffinityConfig)
    cutoff: float = DEFAULT_CUTOFF
    max_age: int = DEFAULT_MAX_AGE
    interpolate: bool = False
    unknown_label: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.max_age, int) or self.max_age < 0:
            raise ConfigurationError(
                "max_age must be a non-negative integer, got {!r}".format(
                    self.max_age
                )
            )
        if not 0.0 <= self.cutoff < 1.0:
            raise ConfigurationError(
                "cutoff must be in [0, 1), got {!r}".format(self.cutoff)
            )


@dataclass(frozen=True)
class TrackerState:
    """
    Tracks in progress. ``last_time`` is the time of the last stepped frame.
    """

    active: Tuple[Track, ...] = ()
    retired: Tuple[Track, ...] = ()
    next_id: int = 0
    last_time: Optional[int] = None

    @property
    def tracks(self) -> List[Track]:
        """
        All tracks, sorted by id.
        """
        return sorted(self.active + self.retired, key=lambda track: track.id)


def _gap(track: Track, time: int) -> int:
    return time - track.last.time - 1


def step(
    state: TrackerState,
    frame: Frame,
    cfg: TrackerConfig,
    scorer: Optional[Scorer] = None,
) -> TrackerState:
    """
    Advance ``state`` by one frame.

    :param scorer: Builds the score matrix between track representatives and
            detections. Defaults to :func:`~detlink.affinity.score_matrix`.

    :raises OrderingError: if ``frame.time`` does not follow the last stepped
            time.
    """
    if state.last_time is not None and frame.time <= state.last_time:
        raise OrderingError(
            "frame {!r} at time {} does not follow time {}".format(
                frame.name, frame.time, state.last_time
            )
        )
    if scorer is None:
        scorer = score_matrix

    retired = list(state.retired)
    active = []
    for track in state.active:
        if _gap(track, frame.time) > cfg.max_age:
            logger.debug("track {} retired at time {}", track.id, frame.time)
            retired.append(track)
        else:
            active.append(track)

    representatives = [track.last.detection for track in active]
    assignment = match_scores(
        scorer(representatives, frame.detections, cfg.affinity), cfg.cutoff
    )

    def observe(index):
        return Observation(
            time=frame.time, detection=frame.detections[index], frame=frame.name
        )

    for i, j, _ in assignment.pairs:
        active[i] = active[i].extended(observe(j))

    next_id = state.next_id
    for j in assignment.unmatched_right:
        logger.debug("track {} born at time {}", next_id, frame.time)
        active.append(Track(next_id, (observe(j),)))
        next_id += 1

    logger.debug(
        "time {}: {} linked, {} new, {} active",
        frame.time,
        len(assignment),
        len(assignment.unmatched_right),
        len(active),
    )
    return TrackerState(
        active=tuple(active),
        retired=tuple(retired),
        next_id=next_id,
        last_time=frame.time,
    )


def run(
    frames: Sequence[Frame], cfg: TrackerConfig, scorer: Optional[Scorer] = None
) -> List[Track]:
    """
    Track objects through a time-ordered frame sequence.

    :return: All tracks, sorted by id; interpolated when ``cfg.interpolate``
            is set.
    """
    state = TrackerState()
    for frame in frames:
        state = step(state, frame, cfg, scorer)

    tracks = state.tracks
    if cfg.interpolate:
        names = {frame.time: frame.name for frame in frames}
        tracks = [interpolate_track(track, names) for track in tracks]

    logger.info(
        "{} frames, {} tracks, {} retired", len(frames), len(tracks), len(state.retired)
    )
    return tracks


def _lerp(alpha: float, v0: float, v1: float) -> float:
    return (1.0 - alpha) * v0 + alpha * v1


def _lerp_bbox(alpha: float, b0: BBox, b1: BBox) -> BBox:
    cx, cy, w, h = (_lerp(alpha, p0, p1) for p0, p1 in zip(b0.params, b1.params))
    return BBox(cx, cy, w, h, b0.label, INTERPOLATED_CONFIDENCE)


def _lerp_stereo(
    alpha: float, d0: StereoDetection, d1: StereoDetection, time: int
) -> StereoDetection:
    sides = {}
    for side in ("left", "right"):
        b0, b1 = getattr(d0, side), getattr(d1, side)
        sides[side] = None if b0 is None or b1 is None else _lerp_bbox(alpha, b0, b1)

    if sides["left"] is None and sides["right"] is None:
        # The flanks share no side: hold the earlier one.
        return StereoDetection(
            left=d0.left, right=d0.right, time=time
        ).with_confidence(INTERPOLATED_CONFIDENCE)
    return StereoDetection(time=time, **sides)


def interpolate_track(track: Track, names: Optional[Mapping[int, str]] = None) -> Track:
    """
    Fill every gap of ``track`` with linearly interpolated observations.

    Inserted boxes take the label of the earlier flanking observation and
    confidence exactly 0.0, and are flagged as interpolated.

    :param names: Frame name per time, used to name inserted observations.
    """
    names = names or {}
    observations = []
    for prev, curr in zip(track.observations, track.observations[1:]):
        observations.append(prev)
        span = curr.time - prev.time
        for time in range(prev.time + 1, curr.time):
            alpha = (time - prev.time) / span
            if isinstance(prev.detection, StereoDetection):
                detection = _lerp_stereo(alpha, prev.detection, curr.detection, time)
            else:
                detection = _lerp_bbox(alpha, prev.detection, curr.detection)
            observations.append(
                Observation(
                    time=time,
                    detection=detection,
                    interpolated=True,
                    frame=names.get(time),
                )
            )
    observations.append(track.last)
    return Track(track.id, tuple(observations))


def _boxes(observation: Observation) -> Tuple[BBox, ...]:
    if isinstance(observation.detection, StereoDetection):
        return observation.detection.boxes
    return (observation.detection,)


def track_consensus_label(
    track: Track, unknown_label: Optional[str] = None
) -> Tuple[str, float]:
    """
    The class a track most likely belongs to.

    Confidences of the observed (not interpolated) boxes are summed per label.
    ``unknown_label`` can only win when no other label was observed. Ties go
    to the lexicographically smallest label.

    :return: ``(label, share)`` where ``share`` is the winner's fraction of
            the eligible votes.
    """
    boxes = [
        box
        for observation in track.observations
        if not observation.interpolated
        for box in _boxes(observation)
    ]
    if not boxes:
        boxes = [
            box for observation in track.observations for box in _boxes(observation)
        ]

    votes: Dict[str, float] = {}
    counts: Dict[str, int] = {}
    for box in boxes:
        votes[box.label] = votes.get(box.label, 0.0) + box.confidence
        counts[box.label] = counts.get(box.label, 0) + 1

    eligible = [label for label in votes if label != unknown_label] or list(votes)
    if sum(votes[label] for label in eligible) == 0.0:
        votes = {label: float(count) for label, count in counts.items()}

    winner = min(eligible, key=lambda label: (-votes[label], label))
    return winner, votes[winner] / sum(votes[label] for label in eligible)

"""
Value types shared by every stage: boxes, frames, stereo pairs and tracks.

Boxes are stored in fractional center/size coordinates (the YOLO
convention). Pixel boxes are converted with :func:`normalize_bbox` when they
are read.
"""
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Tuple, Union

from loguru import logger

from .exceptions import ConfigurationError, RejectedDetectionError, ValidationError

__all__ = (
    "BBox",
    "Frame",
    "ImageShape",
    "Observation",
    "StereoDetection",
    "Track",
    "denormalize_bbox",
    "normalize_bbox",
)


@dataclass(frozen=True)
class BBox:
    """
    A detection in fractional image coordinates.

    :param cx: Horizontal center, in [0, 1].
    :param cy: Vertical center, in [0, 1].
    :param w: Width, in (0, 1].
    :param h: Height, in (0, 1].
    :param label: Class token (non-empty, no whitespace).
    :param confidence: Detector score, in [0, 1]. Exactly 0.0 marks an
            interpolated box.
    """

    cx: float
    cy: float
    w: float
    h: float
    label: str
    confidence: float = 1.0

    def __post_init__(self):
        for name in ("cx", "cy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(
                    "{} must be in [0, 1], got {!r}".format(name, value), field=name
                )
        for name in ("w", "h"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValidationError(
                    "{} must be in (0, 1], got {!r}".format(name, value), field=name
                )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(
                "confidence must be in [0, 1], got {!r}".format(self.confidence),
                field="confidence",
            )
        if (
            not isinstance(self.label, str)
            or not self.label
            or any(c.isspace() for c in self.label)
        ):
            raise ValidationError(
                "label must be a non-empty token without whitespace, got {!r}".format(
                    self.label
                ),
                field="label",
            )

    @property
    def params(self) -> Tuple[float, float, float, float]:
        return self.cx, self.cy, self.w, self.h

    def with_confidence(self, confidence: float) -> "BBox":
        return replace(self, confidence=confidence)


@dataclass(frozen=True)
class StereoDetection:
    """
    One object seen by a left/right camera pair. Either side may be missing,
    but not both.
    """

    left: Optional[BBox]
    right: Optional[BBox]
    time: int

    def __post_init__(self):
        if self.left is None and self.right is None:
            raise ValidationError(
                "a stereo detection needs at least one side", field="left"
            )

    @property
    def sides(self) -> Iterator[Tuple[str, BBox]]:
        """
        The present sides as ``(name, box)`` pairs, left first.
        """
        if self.left is not None:
            yield "left", self.left
        if self.right is not None:
            yield "right", self.right

    @property
    def boxes(self) -> Tuple[BBox, ...]:
        return tuple(box for _, box in self.sides)

    @property
    def is_paired(self) -> bool:
        return self.left is not None and self.right is not None

    def with_confidence(self, confidence: float) -> "StereoDetection":
        return StereoDetection(
            left=None if self.left is None else self.left.with_confidence(confidence),
            right=None
            if self.right is None
            else self.right.with_confidence(confidence),
            time=self.time,
        )


Detection = Union[BBox, StereoDetection]


@dataclass(frozen=True)
class Frame:
    """
    The detections of one camera (or detector) at one time point.

    :param name: Source identifier, usually the annotation file stem.
    :param time: Non-negative integer timestamp.
    :param detections: Boxes in detector order; may be empty. Stereo-linked
            frames hold :class:`StereoDetection` values instead.
    """

    name: str
    time: int
    detections: Tuple[Detection, ...] = ()

    def __post_init__(self):
        if not isinstance(self.time, int) or self.time < 0:
            raise ValidationError(
                "frame time must be a non-negative integer, got {!r}".format(
                    self.time
                ),
                field="time",
            )
        object.__setattr__(self, "detections", tuple(self.detections))

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class Observation:
    """
    A detection assigned to a track at a given time.
    """

    time: int
    detection: Detection
    interpolated: bool = False
    frame: Optional[str] = None

    def __post_init__(self):
        if self.interpolated:
            boxes = (
                self.detection.boxes
                if isinstance(self.detection, StereoDetection)
                else (self.detection,)
            )
            if any(box.confidence != 0.0 for box in boxes):
                raise ValidationError(
                    "interpolated observations must have confidence 0.0",
                    field="confidence",
                )

    @property
    def name(self) -> str:
        return self.frame if self.frame is not None else str(self.time)


@dataclass(frozen=True)
class Track:
    """
    An object identity and the observations linked to it, in time order.
    Gaps are allowed; two observations never share a timestamp.
    """

    id: int
    observations: Tuple[Observation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.id, int) or self.id < 0:
            raise ValidationError(
                "track id must be a non-negative integer, got {!r}".format(self.id),
                field="id",
            )
        observations = tuple(self.observations)
        for prev, curr in zip(observations, observations[1:]):
            if curr.time <= prev.time:
                raise ValidationError(
                    "track {} observation times must strictly increase "
                    "({} then {})".format(self.id, prev.time, curr.time),
                    field="observations",
                )
        object.__setattr__(self, "observations", observations)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self.observations)

    @property
    def last(self) -> Observation:
        return self.observations[-1]

    @property
    def times(self) -> Tuple[int, ...]:
        return tuple(obs.time for obs in self.observations)

    def extended(self, observation: Observation) -> "Track":
        """
        Return a copy with ``observation`` appended.
        """
        return Track(self.id, self.observations + (observation,))


@dataclass(frozen=True)
class ImageShape:
    """
    Image size in pixels, needed only for pixel-based input.
    """

    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError(
                "image shape must be positive, got {}x{}".format(
                    self.width, self.height
                )
            )

    @classmethod
    def parse(cls, text: str) -> "ImageShape":
        """
        Parse ``"W,H"``, e.g. ``"1228,1027"``.
        """
        try:
            width, height = (int(part) for part in text.split(","))
        except ValueError:
            raise ConfigurationError(
                "image shape must be given as W,H, got {!r}".format(text)
            ) from None
        return cls(width, height)


def _clamp(value: float, upper: float) -> float:
    return min(max(value, 0.0), upper)


def normalize_bbox(
    xmin: float,
    ymin: float,
    xmax: float,
    ymax: float,
    shape: ImageShape,
    label: str,
    confidence: float = 1.0,
    row=None,
) -> BBox:
    """
    Convert a pixel corner box to a fractional :class:`BBox`.

    Coordinates outside the image are clamped to its bounds first.

    :param row: Source row identifier, reported if the box is rejected.
    :raises RejectedDetectionError: if the clamped box has no positive
            width or height.
    """
    if not isinstance(shape, ImageShape):
        raise ConfigurationError("an image shape is required for pixel coordinates")

    width, height = float(shape.width), float(shape.height)
    clamped = (
        _clamp(xmin, width),
        _clamp(ymin, height),
        _clamp(xmax, width),
        _clamp(ymax, height),
    )
    if clamped != (xmin, ymin, xmax, ymax):
        logger.warning(
            "row {}: box ({}, {}, {}, {}) clamped to the {}x{} image",
            row,
            xmin,
            ymin,
            xmax,
            ymax,
            shape.width,
            shape.height,
        )
    xmin, ymin, xmax, ymax = clamped

    if xmax <= xmin or ymax <= ymin:
        raise RejectedDetectionError(
            "row {}: box has no positive extent ({}, {}, {}, {})".format(
                row, xmin, ymin, xmax, ymax
            ),
            row=row,
        )

    return BBox(
        cx=(xmin + xmax) / (2.0 * width),
        cy=(ymin + ymax) / (2.0 * height),
        w=(xmax - xmin) / width,
        h=(ymax - ymin) / height,
        label=label,
        confidence=confidence,
    )


def denormalize_bbox(b: BBox, shape: ImageShape) -> Tuple[float, float, float, float]:
    """
    Inverse of :func:`normalize_bbox`: ``(xmin, ymin, xmax, ymax)`` in pixels.
    """
    width, height = float(shape.width), float(shape.height)
    return (
        (b.cx - b.w / 2.0) * width,
        (b.cy - b.h / 2.0) * height,
        (b.cx + b.w / 2.0) * width,
        (b.cy + b.h / 2.0) * height,
    )

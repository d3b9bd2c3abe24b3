"""
Readers for detector output.

Three input kinds are understood:

* a directory of YOLO annotation files, one ``.txt`` file per frame holding
  lines ``label cx cy w h [confidence]`` in fractional coordinates;
* a pixel-based CSV file with rows
  ``frame,xmin,ymin,xmax,ymax,label[,confidence]``;
* a ``.frames`` file previously written by :mod:`detlink.writers`.
"""
import io
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd
from loguru import logger

from .exceptions import (
    ConfigurationError,
    ExtractionError,
    OrderingError,
    PairingError,
    ParseError,
    RejectedDetectionError,
    ValidationError,
)
from .model import BBox, Frame, ImageShape, StereoDetection, normalize_bbox
from .util import parallel_map

__all__ = (
    "InputSource",
    "TimePattern",
    "extract_time",
    "load_source",
    "load_sources",
    "parse_csv",
    "parse_frames_file",
    "parse_yolo_dir",
)

PLACEHOLDER = "{:d}"

YOLO_SUFFIX = ".txt"
CSV_SUFFIX = ".csv"
FRAMES_SUFFIX = ".frames"

CSV_COLUMNS = ("frame", "xmin", "ymin", "xmax", "ymax", "label", "confidence")

# Rendering of an absent value in a frames file.
MISSING = "-"

_PLAIN_NUMBER = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class TimePattern:
    """
    A frame-name template with a single integer placeholder, e.g.
    ``frame_{:d}.txt``.

    The placeholder matches a maximal run of decimal digits; leading zeros
    are allowed. Shell-escaped braces (``frame_\\{:d\\}.txt``) are accepted.
    """

    template: str
    _regex: "re.Pattern" = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        template = self.template.replace("\\{", "{").replace("\\}", "}")
        if template.count(PLACEHOLDER) != 1:
            raise ConfigurationError(
                "time pattern must contain exactly one {} placeholder, got {!r}".format(
                    PLACEHOLDER, self.template
                )
            )
        prefix, suffix = template.split(PLACEHOLDER)
        regex = re.compile("{}([0-9]+){}".format(re.escape(prefix), re.escape(suffix)))
        object.__setattr__(self, "template", template)
        object.__setattr__(self, "_regex", regex)

    def match(self, name: str) -> Optional[int]:
        """
        The integer in ``name``, or None if ``name`` does not fit the template.
        """
        m = self._regex.fullmatch(name)
        if m is None:
            return None
        return int(m.group(1))


def extract_time(name: str, pattern: Optional[TimePattern] = None) -> int:
    """
    Extract the integer timestamp of a frame name.

    With a pattern, the full name is tried first and then its basename.
    Without one, the name (or its stem) must be a plain number.

    :raises ExtractionError: if no timestamp can be extracted.
    """
    if pattern is not None:
        for candidate in (name, os.path.basename(name)):
            time = pattern.match(candidate)
            if time is not None:
                return time
        raise ExtractionError(
            "frame name {!r} does not match time pattern {!r}".format(
                name, pattern.template
            )
        )

    for candidate in (name, os.path.splitext(os.path.basename(name))[0]):
        if _PLAIN_NUMBER.fullmatch(candidate):
            return int(candidate)

    raise ExtractionError(
        "frame name {!r} is not a plain number and no time pattern was given".format(
            name
        )
    )


def _is_plain_number(name: str) -> bool:
    stem = os.path.splitext(os.path.basename(name))[0]
    return bool(_PLAIN_NUMBER.fullmatch(name) or _PLAIN_NUMBER.fullmatch(stem))


def _assign_times(
    keys: Sequence[str], pattern: Optional[TimePattern]
) -> Tuple[List[int], bool]:
    """
    Timestamps for frames identified by ``keys``, and whether they were
    extracted from the names (as opposed to numbered in input order).
    """
    if pattern is not None:
        return [extract_time(key, pattern) for key in keys], True
    if keys and all(_is_plain_number(key) for key in keys):
        return [extract_time(key) for key in keys], True
    return list(range(len(keys))), False


def _build_frames(
    names: Sequence[str],
    keys: Sequence[str],
    detections: Sequence[Sequence],
    pattern: Optional[TimePattern],
    source,
) -> List[Frame]:
    times, extracted = _assign_times(keys, pattern)
    frames = [
        Frame(name=name, time=time, detections=dets)
        for name, time, dets in zip(names, times, detections)
    ]
    if extracted:
        frames.sort(key=lambda frame: frame.time)
        for prev, curr in zip(frames, frames[1:]):
            if prev.time == curr.time:
                raise OrderingError(
                    "{}: frames {!r} and {!r} share timestamp {}".format(
                        source, prev.name, curr.name, curr.time
                    )
                )
    return frames


def _parse_float(token: str, column: str, path, line) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            "{} is not a number: {!r}".format(column, token), path, line
        ) from None


def _make_bbox(path, line, *args) -> BBox:
    try:
        return BBox(*args)
    except ValidationError as e:
        raise ValidationError("{}:{}: {}".format(path, line, e), field=e.field) from e


def _parse_yolo_line(tokens: Sequence[str], path, line) -> BBox:
    if len(tokens) not in (5, 6):
        raise ParseError(
            "expected 'label cx cy w h [confidence]', got {} fields".format(
                len(tokens)
            ),
            path,
            line,
        )
    label = tokens[0]
    cx, cy, w, h = (
        _parse_float(token, column, path, line)
        for token, column in zip(tokens[1:5], ("cx", "cy", "w", "h"))
    )
    confidence = (
        _parse_float(tokens[5], "confidence", path, line) if len(tokens) == 6 else 1.0
    )
    return _make_bbox(path, line, cx, cy, w, h, label, confidence)


def _read_text(path) -> str:
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data.count(b"\n", 0, e.start) + 1
        raise ParseError("not UTF-8 text: {}".format(e.reason), path, line) from None


def _parse_yolo_file(path: Path) -> Tuple[BBox, ...]:
    return tuple(
        _parse_yolo_line(line.split(), path, lineno)
        for lineno, line in enumerate(_read_text(path).splitlines(), start=1)
        if line.strip()
    )


def parse_yolo_dir(path, pattern: Optional[TimePattern] = None) -> List[Frame]:
    """
    Read a directory of YOLO annotation files, one :class:`Frame` per
    ``.txt`` file.

    Frames are named by file stem. With a time pattern (matched against the
    file name) or plain-number stems, frames are ordered by their timestamps.
    Otherwise they are taken in lexicographic file order and numbered
    0, 1, 2...

    :param path: The annotation directory.
    :param pattern: Time pattern applied to each file name.
    :type pattern: :class:`TimePattern`, optional

    :raises OSError: if the directory or a file cannot be read.
    :raises ParseError: for malformed lines.
    :raises ValidationError: for out-of-range values.
    """
    path = Path(path)
    files = sorted(
        (entry for entry in path.iterdir() if entry.suffix == YOLO_SUFFIX),
        key=lambda entry: entry.name,
    )
    frames = _build_frames(
        names=[entry.stem for entry in files],
        keys=[entry.name for entry in files],
        detections=[_parse_yolo_file(entry) for entry in files],
        pattern=pattern,
        source=path,
    )
    logger.info(
        "{}: {} frames, {} detections",
        path,
        len(frames),
        sum(len(frame) for frame in frames),
    )
    return frames


def _is_header(row) -> bool:
    if not row["xmin"].strip():
        return False
    try:
        float(row["xmin"])
    except ValueError:
        return True
    return False


def _read_csv_table(path) -> pd.DataFrame:
    try:
        table = pd.read_csv(
            io.StringIO(_read_text(path)),
            header=None,
            names=list(CSV_COLUMNS),
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=list(CSV_COLUMNS))
    except pd.errors.ParserError as e:
        raise ParseError(str(e), path) from None

    return table.fillna("")


def parse_csv(
    path, shape: Optional[ImageShape], pattern: Optional[TimePattern] = None
) -> List[Frame]:
    """
    Read a pixel-based detection CSV.

    Each row is ``frame,xmin,ymin,xmax,ymax,label[,confidence]``; a missing
    confidence reads as 1.0. A header row is recognised by a non-numeric
    ``xmin`` field and skipped. A row whose box fields are all empty declares
    a frame without detections. Rows are grouped by frame name in order of
    first appearance and normalized with :func:`~detlink.model.normalize_bbox`.

    :raises ConfigurationError: if ``shape`` is missing.
    :raises ParseError: for malformed rows (the row number is reported).
    """
    if shape is None:
        raise ConfigurationError(
            "{}: pixel-based CSV input needs the image size; pass --shape W,H".format(
                path
            )
        )

    table = _read_csv_table(path)
    grouped = {}
    for index, row in table.iterrows():
        rownum = index + 1
        if rownum == 1 and _is_header(row):
            continue

        name = row["frame"].strip()
        if not name:
            raise ParseError("empty frame name", path, rownum)
        boxes = grouped.setdefault(name, [])

        fields = [row[column].strip() for column in CSV_COLUMNS[1:5]]
        label = row["label"].strip()
        if not any(fields) and not label:
            continue

        xmin, ymin, xmax, ymax = (
            _parse_float(token, column, path, rownum)
            for token, column in zip(fields, CSV_COLUMNS[1:5])
        )
        confidence = row["confidence"].strip()
        confidence = (
            _parse_float(confidence, "confidence", path, rownum)
            if confidence
            else 1.0
        )
        where = "{}:{}".format(path, rownum)
        try:
            boxes.append(
                normalize_bbox(
                    xmin, ymin, xmax, ymax, shape, label, confidence, row=where
                )
            )
        except RejectedDetectionError:
            raise
        except ValidationError as e:
            raise ValidationError("{}: {}".format(where, e), field=e.field) from e

    names = list(grouped)
    frames = _build_frames(
        names=names,
        keys=names,
        detections=[grouped[name] for name in names],
        pattern=pattern,
        source=path,
    )
    logger.info(
        "{}: {} frames, {} detections",
        path,
        len(frames),
        sum(len(frame) for frame in frames),
    )
    return frames


def _parse_box_fields(tokens: Sequence[str], path, line) -> Optional[BBox]:
    if all(token == MISSING for token in tokens):
        return None
    return _parse_yolo_line(tokens, path, line)


def parse_frames_file(
    path, pattern: Optional[TimePattern] = None
) -> Tuple[List[Frame], List[Tuple[Optional[int], ...]]]:
    """
    Read a ``.frames`` file back.

    Single-camera lines are ``frame label cx cy w h confidence track``; stereo
    lines carry a second box between the first box and the track column.
    Absent values are written as ``-``.

    :return: The frames (stereo lines yield :class:`StereoDetection` values)
            and, for each frame, the track id of each detection (None when
            tracking was not performed).
    """
    grouped = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) == 8:
            box = _parse_yolo_line(tokens[1:7], path, lineno)
        elif len(tokens) == 14:
            left = _parse_box_fields(tokens[1:7], path, lineno)
            right = _parse_box_fields(tokens[7:13], path, lineno)
            if left is None and right is None:
                raise ParseError("stereo line has no box", path, lineno)
            box = (left, right)
        else:
            raise ParseError(
                "expected 8 or 14 fields, got {}".format(len(tokens)),
                path,
                lineno,
            )
        track = tokens[-1]
        if track == MISSING:
            track = None
        else:
            try:
                track = int(track)
            except ValueError:
                raise ParseError(
                    "track id is not an integer: {!r}".format(track), path, lineno
                ) from None
        grouped.setdefault(tokens[0], []).append((box, track))

    names = list(grouped)
    times, _ = _assign_times(names, pattern)
    by_name = dict(zip(names, times))

    def detection(box, time):
        if isinstance(box, tuple):
            return StereoDetection(left=box[0], right=box[1], time=time)
        return box

    frames = _build_frames(
        names=names,
        keys=names,
        detections=[
            [detection(box, by_name[name]) for box, _ in grouped[name]]
            for name in names
        ],
        pattern=pattern,
        source=path,
    )
    track_ids = [tuple(track for _, track in grouped[frame.name]) for frame in frames]
    return frames, track_ids


@dataclass(frozen=True)
class InputSource:
    """
    A detector output to read.

    :param kind: One of ``yolo-directory``, ``csv-file`` or ``frames-file``.
    :param path: Location of the input.
    :param shape: Image size, required for ``csv-file``.
    """

    YOLO = "yolo-directory"
    CSV = "csv-file"
    FRAMES = "frames-file"

    kind: str
    path: str
    shape: Optional[ImageShape] = None

    def __post_init__(self):
        if self.kind not in (self.YOLO, self.CSV, self.FRAMES):
            raise ConfigurationError("unknown input kind {!r}".format(self.kind))
        if self.kind == self.CSV and self.shape is None:
            raise ConfigurationError(
                "{}: pixel-based CSV input needs the image size; "
                "pass --shape W,H".format(self.path)
            )

    @classmethod
    def detect(cls, path, shape: Optional[ImageShape] = None) -> "InputSource":
        """
        Pick the input kind from the path: a directory holds YOLO files, a
        ``.csv`` file holds pixel boxes, a ``.frames`` file is earlier output.
        """
        path = str(path)
        if os.path.isdir(path):
            return cls(cls.YOLO, path, shape)
        suffix = os.path.splitext(path)[1].lower()
        if suffix == CSV_SUFFIX:
            return cls(cls.CSV, path, shape)
        if suffix == FRAMES_SUFFIX:
            return cls(cls.FRAMES, path, shape)
        if not os.path.exists(path):
            raise FileNotFoundError(2, "No such file or directory", path)
        raise ConfigurationError(
            "{}: expected a directory of YOLO files, a .csv or a .frames file".format(
                path
            )
        )

    def load(self, pattern: Optional[TimePattern] = None) -> List[Frame]:
        if self.kind == self.YOLO:
            return parse_yolo_dir(self.path, pattern)
        if self.kind == self.CSV:
            return parse_csv(self.path, self.shape, pattern)

        frames, _ = parse_frames_file(self.path, pattern)
        if any(
            isinstance(detection, StereoDetection)
            for frame in frames
            for detection in frame.detections
        ):
            raise ParseError("stereo frames files cannot be used as input", self.path)
        return frames


def load_source(
    path, shape: Optional[ImageShape] = None, pattern: Optional[TimePattern] = None
) -> List[Frame]:
    """
    Read one input of any supported kind.
    """
    return InputSource.detect(path, shape).load(pattern)


def load_sources(
    paths: Sequence,
    shape: Optional[ImageShape] = None,
    pattern: Optional[TimePattern] = None,
    n_jobs=None,
) -> List[List[Frame]]:
    """
    Read several inputs, in parallel batches when ``n_jobs`` allows it.

    Without a time pattern, inputs whose frames are numbered in input order
    are renumbered by frame name, so that a frame missing from one input does
    not shift the frames after it.

    :param n_jobs: See :func:`detlink.util.parallel_map`.
    """
    sources = [InputSource.detect(path, shape) for path in paths]
    sequences = parallel_map(_load, sources, n_jobs=n_jobs, pattern=pattern)
    if pattern is None and len(sequences) > 1 and all(map(_numbered, sequences)):
        sequences = _share_name_index(sequences, [source.path for source in sources])
    return sequences


def _numbered(frames: Sequence[Frame]) -> bool:
    # Times were assigned in input order rather than read from the names.
    return not (frames and all(_is_plain_number(frame.name) for frame in frames))


def _share_name_index(
    sequences: Sequence[Sequence[Frame]], paths: Sequence[str]
) -> List[List[Frame]]:
    """
    Renumber inputs whose frames were numbered in input order, so that frames
    of the same name get the same timestamp across inputs.

    :raises PairingError: if an input shares no frame name with the first.
    """
    first = {frame.name for frame in sequences[0]}
    for path, frames in zip(paths[1:], sequences[1:]):
        names = {frame.name for frame in frames}
        if first and names and first.isdisjoint(names):
            raise PairingError(
                "{} and {} have no frame names in common; pass --time_pattern to "
                "read timestamps from the names".format(paths[0], path)
            )

    names = sorted({frame.name for frames in sequences for frame in frames})
    index = {name: time for time, name in enumerate(names)}
    logger.debug("{} frame names shared by {} inputs", len(names), len(sequences))
    return [
        sorted(
            (replace(frame, time=index[frame.name]) for frame in frames),
            key=lambda frame: frame.time,
        )
        for frames in sequences
    ]


def _load(source: InputSource, pattern=None) -> List[Frame]:
    return source.load(pattern)

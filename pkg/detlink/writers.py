"""
Writers for the three output products.

``.frames``
    One line per detection: frame name, ``label cx cy w h confidence`` and the
    track id (``-`` when tracking was not performed). Stereo lines carry the
    left box, then the right box; an absent side is a run of ``-``.
``.tracks``
    One record per track: a ``track <id>`` line followed by one indented line
    per observation, ``time frame <box fields> observed|interpolated``.
``.pred``
    One line per track: ``id label support``.

Numbers are written with four decimals, so interpolated boxes show a
confidence of ``0.0000``.
"""
import sys
from functools import partial
from typing import Iterator, List, Optional, Sequence, TextIO, Union

from loguru import logger

from .ingest import MISSING
from .model import BBox, Frame, Observation, StereoDetection, Track
from .tracking import track_consensus_label

__all__ = (
    "frame_lines",
    "write_frames",
    "write_outputs",
    "write_pred",
    "write_tracks",
)

FRAMES_EXT = ".frames"
TRACKS_EXT = ".tracks"
PRED_EXT = ".pred"

BOX_FIELDS = 6

Results = Union[Sequence[Track], Sequence[Frame]]


def _number(value: float) -> str:
    return "{:.4f}".format(value)


def _box_fields(box: Optional[BBox]) -> List[str]:
    if box is None:
        return [MISSING] * BOX_FIELDS
    return [box.label] + [_number(value) for value in box.params + (box.confidence,)]


def _detection_fields(detection) -> List[str]:
    if isinstance(detection, StereoDetection):
        return _box_fields(detection.left) + _box_fields(detection.right)
    return _box_fields(detection)


def _line(fields: Sequence[str]) -> str:
    return " ".join(fields) + "\n"


def frame_lines(results: Results) -> Iterator[str]:
    """
    The lines of a ``.frames`` file, in time order. Lines of the same frame
    are ordered by track id, or by detection order for untracked frames.
    """
    if results and isinstance(results[0], Track):
        rows = sorted(
            (
                (observation.time, track.id, observation)
                for track in results
                for observation in track.observations
            ),
            key=lambda row: row[:2],
        )
        for _, track_id, observation in rows:
            yield _line(
                [observation.name]
                + _detection_fields(observation.detection)
                + [str(track_id)]
            )
    else:
        for frame in results:
            for detection in frame.detections:
                yield _line([frame.name] + _detection_fields(detection) + [MISSING])


def write_frames(results: Results, fp: TextIO) -> None:
    """
    Write tracks, or untracked frames, as a ``.frames`` product.
    """
    fp.writelines(frame_lines(results))


def _observation_line(observation: Observation) -> str:
    flag = "interpolated" if observation.interpolated else "observed"
    return "  " + _line(
        [str(observation.time), observation.name]
        + _detection_fields(observation.detection)
        + [flag]
    )


def write_tracks(tracks: Sequence[Track], fp: TextIO) -> None:
    """
    Write the ``.tracks`` product, tracks in ascending id order.
    """
    for track in sorted(tracks, key=lambda track: track.id):
        fp.write("track {}\n".format(track.id))
        fp.writelines(_observation_line(obs) for obs in track.observations)


def write_pred(
    tracks: Sequence[Track], fp: TextIO, unknown: Optional[str] = None
) -> None:
    """
    Write the ``.pred`` product: the consensus label of every track and its
    share of the vote.
    """
    for track in sorted(tracks, key=lambda track: track.id):
        label, support = track_consensus_label(track, unknown)
        fp.write(_line([str(track.id), label, _number(support)]))


def _write_file(path: str, writer, *args) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        writer(*args, fp)
    logger.info("wrote {}", path)


def write_outputs(
    results: Results,
    base: Optional[str] = None,
    tracked: bool = True,
    unknown: Optional[str] = None,
) -> List[str]:
    """
    Write all products for ``results``.

    Without ``base``, only the frames product is written, to stdout.
    Otherwise ``base.frames`` is written, plus ``base.tracks`` and
    ``base.pred`` when ``tracked``.

    :return: The paths written.
    """
    if base is None:
        write_frames(results, sys.stdout)
        sys.stdout.flush()
        return []

    paths = [base + FRAMES_EXT]
    _write_file(paths[0], write_frames, results)
    if tracked:
        paths.append(base + TRACKS_EXT)
        _write_file(paths[-1], write_tracks, results)
        paths.append(base + PRED_EXT)
        _write_file(paths[-1], partial(write_pred, unknown=unknown), results)
    return paths

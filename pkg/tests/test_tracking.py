import os
import time

import numpy as np
import pytest

from detlink.exceptions import *
from detlink.ingest import TimePattern, parse_yolo_dir
from detlink.model import BBox, Frame, Observation, StereoDetection, Track
from detlink.tracking import *


def abs_path(path):
    return os.path.join(os.path.dirname(__file__), path)


def box(cx, cy=0.5, label="fish", confidence=0.9):
    return BBox(cx, cy, 0.1, 0.1, label, confidence)


def lab_frames(pattern="frame_{:d}.txt"):
    return parse_yolo_dir(
        abs_path("data/lab"), None if pattern is None else TimePattern(pattern)
    )


def linear_scene(rng, n_frames=50, drop_rate=0.1, max_gap=3):
    """
    Three objects moving right at constant speed, with random missed
    detections of at most ``max_gap`` consecutive frames.

    :return: The frames and, per frame, the true object of each detection.
    """
    rows = (0.2, 0.5, 0.8)
    speeds = (0.012, 0.01, 0.014)
    missed = [0, 0, 0]
    frames, truth = [], []
    for t in range(n_frames):
        detections, objects = [], []
        for k, (cy, speed) in enumerate(zip(rows, speeds)):
            if t > 0 and missed[k] < max_gap and rng.uniform() < drop_rate:
                missed[k] += 1
                continue
            missed[k] = 0
            cx = 0.1 + speed * t + float(rng.normal(0, 0.002))
            detections.append(box(cx, cy, confidence=float(rng.uniform(0.6, 1.0))))
            objects.append(k)
        order = rng.permutation(len(detections))
        frames.append(Frame(str(t), t, [detections[i] for i in order]))
        truth.append([objects[i] for i in order])
    return frames, truth


def test_step():
    cfg = TrackerConfig(max_age=2)

    state = step(TrackerState(), Frame("frame_000152", 152, [box(0.3), box(0.7)]), cfg)
    assert [track.id for track in state.tracks] == [0, 1]
    assert state.next_id == 2
    assert state.last_time == 152

    # Two missing frames are bridged.
    later = step(state, Frame("frame_000155", 155, [box(0.31)]), cfg)
    assert later.tracks[0].times == (152, 155)
    assert later.tracks[0].last.name == "frame_000155"
    assert later.next_id == 2

    # Three are not.
    later = step(state, Frame("frame_000156", 156, [box(0.31)]), cfg)
    assert [track.id for track in later.retired] == [0, 1]
    assert [track.id for track in later.active] == [2]
    assert later.tracks[2].times == (156,)


def test_step_ordering():
    cfg = TrackerConfig()
    state = step(TrackerState(), Frame("a", 3, [box(0.5)]), cfg)
    with pytest.raises(OrderingError):
        step(state, Frame("b", 3, [box(0.5)]), cfg)
    with pytest.raises(OrderingError):
        step(state, Frame("c", 1), cfg)


def test_run():
    cfg = TrackerConfig()
    assert run([], cfg) == []

    tracks = run([Frame("0", 0, [box(0.5)]), Frame("1", 1, [box(0.5)])], cfg)
    assert len(tracks) == 1
    assert tracks[0].times == (0, 1)

    # New tracks are numbered in detection order.
    tracks = run([Frame("0", 0, [box(0.8), box(0.2)])], cfg)
    assert [track.last.detection.cx for track in tracks] == [0.8, 0.2]


def test_run_lab():
    assert len(run(lab_frames(), TrackerConfig())) == 4

    tracks = run(lab_frames(), TrackerConfig(max_age=2))
    assert [track.times for track in tracks] == [(152, 153, 154, 156), (152, 153, 156)]
    assert {box.label for box in (obs.detection for obs in tracks[1])} == {"1"}

    # Numbered in file order, frame_000156 directly follows frame_000154.
    tracks = run(lab_frames(pattern=None), TrackerConfig())
    assert [track.times for track in tracks] == [(0, 1, 2, 3), (0, 1), (3,)]


def test_run_interpolate_lab():
    cfg = TrackerConfig(max_age=2, interpolate=True)
    first, second = run(lab_frames(), cfg)

    assert first.times == (152, 153, 154, 155, 156)
    filled = first.observations[3]
    assert filled.interpolated
    assert filled.detection.confidence == 0.0
    assert filled.detection.cx == pytest.approx(0.33)
    # No frame has that time, so the observation is named by it.
    assert filled.name == "155"

    assert second.times == (152, 153, 154, 155, 156)
    assert [obs.interpolated for obs in second] == [False, False, True, True, False]
    assert second.observations[2].name == "frame_000154"


def test_run_linear_scene():
    rng = np.random.default_rng(11)
    frames, truth = linear_scene(rng)
    identity = {
        (frame.time, det): obj
        for frame, objects in zip(frames, truth)
        for det, obj in zip(frame.detections, objects)
    }

    start = time.perf_counter()
    tracks = run(frames, TrackerConfig(max_age=3))
    elapsed = time.perf_counter() - start

    assert len(tracks) == 3
    for track in tracks:
        objects = {identity[obs.time, obs.detection] for obs in track}
        assert len(objects) == 1
    assert elapsed < 1.0

    # Every detection ends up in exactly one track.
    assert sum(len(track) for track in tracks) == sum(len(f) for f in frames)


def test_run_conservation():
    rng = np.random.default_rng(12)
    for _ in range(20):
        frames = [
            Frame(
                str(t),
                t,
                [
                    box(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95)))
                    for _ in range(int(rng.integers(0, 5)))
                ],
            )
            for t in range(10)
        ]
        max_age = int(rng.integers(0, 3))
        tracks = run(frames, TrackerConfig(max_age=max_age))

        seen = sorted(
            (obs.time, obs.detection.params) for track in tracks for obs in track
        )
        expected = sorted(
            (frame.time, det.params) for frame in frames for det in frame.detections
        )
        assert seen == expected
        assert [track.id for track in tracks] == list(range(len(tracks)))
        for track in tracks:
            gaps = [b - a for a, b in zip(track.times, track.times[1:])]
            assert all(1 <= gap <= max_age + 1 for gap in gaps)


def test_interpolate_track():
    track = Track(0, [Observation(0, box(0.2)), Observation(2, box(0.4))])
    filled = interpolate_track(track)
    assert filled.times == (0, 1, 2)
    middle = filled.observations[1]
    assert middle.interpolated
    assert middle.detection.cx == pytest.approx(0.3)
    assert middle.detection.confidence == 0.0
    assert middle.detection.label == "fish"

    solid = Track(0, [Observation(t, box(0.2 + t / 10)) for t in range(3)])
    assert interpolate_track(solid) == solid

    track = Track(3, [Observation(0, box(0.2)), Observation(4, box(0.6, cy=0.9))])
    filled = interpolate_track(track, {2: "frame_2"})
    assert filled.times == (0, 1, 2, 3, 4)
    assert [obs.detection.cx for obs in filled] == pytest.approx(
        [0.2, 0.3, 0.4, 0.5, 0.6]
    )
    assert [obs.detection.cy for obs in filled] == pytest.approx(
        [0.5, 0.6, 0.7, 0.8, 0.9]
    )
    assert filled.observations[2].name == "frame_2"
    assert filled.id == 3


def test_interpolate_takes_earlier_label():
    track = Track(0, [Observation(0, box(0.2, label="a")), Observation(2, box(0.4))])
    assert interpolate_track(track).observations[1].detection.label == "a"


def test_interpolate_reproduces_linear_motion():
    rng = np.random.default_rng(13)
    for _ in range(50):
        start = [float(v) for v in rng.uniform(0.2, 0.4, size=2)]
        speed = [float(v) for v in rng.uniform(-0.02, 0.02, size=2)]
        truth = [
            box(start[0] + speed[0] * t, start[1] + speed[1] * t) for t in range(8)
        ]
        kept = sorted({0, 7} | set(rng.choice(8, size=3).tolist()))

        track = Track(0, [Observation(t, truth[t]) for t in kept])
        for obs in interpolate_track(track):
            assert obs.detection.params == pytest.approx(truth[obs.time].params)


def test_interpolate_is_repeatable():
    frames = lab_frames()
    names = {frame.time: frame.name for frame in frames}
    tracks = run(frames, TrackerConfig(max_age=2, interpolate=True))
    for track in tracks:
        observed = [obs for obs in track if not obs.interpolated]
        again = interpolate_track(Track(track.id, observed), names)
        assert again == track


def test_interpolate_stereo():
    d0 = StereoDetection(box(0.2), box(0.1), 0)
    d2 = StereoDetection(box(0.4), None, 2)
    track = Track(0, [Observation(0, d0), Observation(2, d2)])

    middle = interpolate_track(track).observations[1].detection
    assert middle.left.cx == pytest.approx(0.3)
    assert middle.right is None
    assert middle.time == 1

    # Flanks sharing no side: the earlier detection is held.
    d0 = StereoDetection(box(0.2), None, 0)
    d2 = StereoDetection(None, box(0.3), 2)
    track = Track(0, [Observation(0, d0), Observation(2, d2)])
    middle = interpolate_track(track).observations[1].detection
    assert middle.left.cx == 0.2
    assert middle.left.confidence == 0.0


def test_track_consensus_label():
    observations = [
        Observation(0, box(0.5, label="A", confidence=0.9)),
        Observation(1, box(0.5, label="A", confidence=0.8)),
        Observation(2, box(0.5, label="B", confidence=0.6)),
    ]
    label, share = track_consensus_label(Track(0, observations))
    assert label == "A"
    assert share == pytest.approx(1.7 / 2.3)

    unknown = [Observation(t, box(0.5, label="unk", confidence=0.9)) for t in range(5)]
    assert track_consensus_label(Track(0, unknown), "unk") == ("unk", 1.0)

    mixed = unknown + [Observation(5, box(0.5, label="A", confidence=0.2))]
    assert track_consensus_label(Track(0, mixed), "unk") == ("A", 1.0)
    assert track_consensus_label(Track(0, mixed))[0] == "unk"


def test_track_consensus_label_ties():
    observations = [
        Observation(0, box(0.5, label="b", confidence=0.5)),
        Observation(1, box(0.5, label="a", confidence=0.5)),
    ]
    assert track_consensus_label(Track(0, observations)) == ("a", 0.5)

    # Interpolated boxes do not vote.
    observations.append(Observation(2, box(0.5, label="b", confidence=0.0), True))
    assert track_consensus_label(Track(0, observations)) == ("a", 0.5)

    # Without any confidence, boxes are counted.
    zero = [
        Observation(0, box(0.5, label="b", confidence=0.0)),
        Observation(1, box(0.5, label="b", confidence=0.0)),
        Observation(2, box(0.5, label="a", confidence=0.0)),
    ]
    assert track_consensus_label(Track(0, zero)) == ("b", pytest.approx(2 / 3))


def test_tracker_config():
    with pytest.raises(ConfigurationError):
        TrackerConfig(max_age=-1)
    with pytest.raises(ConfigurationError):
        TrackerConfig(cutoff=1.0)

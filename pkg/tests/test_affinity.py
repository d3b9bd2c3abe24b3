import math

import numpy as np
import pytest

from detlink.affinity import *
from detlink.exceptions import *
from detlink.model import BBox, StereoDetection


def random_box(rng, label=None):
    return BBox(
        cx=float(rng.uniform(0, 1)),
        cy=float(rng.uniform(0, 1)),
        w=float(rng.uniform(0.01, 1)),
        h=float(rng.uniform(0.01, 1)),
        label=label or str(rng.integers(0, 3)),
        confidence=float(rng.uniform(0, 1)),
    )


def test_pair_score():
    cfg = AffinityConfig()
    box = BBox(0.5, 0.5, 0.1, 0.1, "fish", 1.0)

    assert pair_score(box, box, cfg) == 1.0

    moved = BBox(0.5 + cfg.scale, 0.5, 0.1, 0.1, "fish", 1.0)
    assert pair_score(box, moved, cfg) == pytest.approx(math.exp(-0.5))
    assert pair_score(box, moved, cfg) == pytest.approx(0.6065, abs=1e-4)

    other = BBox(0.5, 0.5, 0.1, 0.1, "cod", 1.0)
    assert pair_score(box, other, cfg) == pytest.approx(0.5)
    assert pair_score(box, other, AffinityConfig(label_mismatch_factor=0.0)) == 0.0

    weak = box.with_confidence(0.25)
    assert pair_score(box, weak, cfg) == pytest.approx(0.5)
    assert pair_score(box, weak, AffinityConfig(use_confidence=False)) == 1.0


def test_pair_score_without_overlap():
    cfg = AffinityConfig(scale=0.1)
    a = BBox(0.30, 0.5, 0.1, 0.1, "fish", 1.0)
    b = BBox(0.45, 0.5, 0.1, 0.1, "fish", 1.0)

    # Boxes are disjoint, yet still similar.
    assert abs(a.cx - b.cx) > (a.w + b.w) / 2
    assert pair_score(a, b, cfg) == pytest.approx(math.exp(-1.125))
    assert pair_score(a, b, cfg) > 0.3


def test_pair_score_properties():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = random_box(rng), random_box(rng)
        cfg = AffinityConfig(scale=float(rng.uniform(0.01, 1)))
        score = pair_score(a, b, cfg)
        assert 0.0 <= score <= 1.0
        assert score == pytest.approx(pair_score(b, a, cfg), abs=1e-15)

        # Sharper Gaussians never raise the score.
        sharper = AffinityConfig(scale=cfg.scale / 2)
        assert pair_score(a, b, sharper) <= score + 1e-15


def test_cx_factor():
    a = BBox(0.60, 0.5, 0.1, 0.1, "fish", 1.0)
    b = BBox(0.45, 0.5, 0.1, 0.1, "fish", 1.0)

    assert pair_score(a, b, AffinityConfig(scale=0.2)) == pytest.approx(
        math.exp(-(0.15 * 0.15) / (2 * 0.2 * 0.2))
    )
    assert pair_score(a, b, AffinityConfig(scale=0.2)) == pytest.approx(0.755, abs=1e-3)

    # Widening the horizontal axis only affects cx.
    wide = AffinityConfig(scale=0.1, cx_factor=3.0)
    assert wide.scales == pytest.approx((0.3, 0.1, 0.1, 0.1))
    assert pair_score(a, b, wide) == pytest.approx(math.exp(-0.125))


def test_score_matrix():
    cfg = AffinityConfig()
    box = BBox(0.5, 0.5, 0.1, 0.1, "fish", 1.0)

    assert score_matrix([], [box] * 3, cfg).shape == (0, 3)
    assert score_matrix([box], [], cfg).shape == (1, 0)
    assert score_matrix([], [], cfg).shape == (0, 0)
    assert score_matrix([box], [box], cfg).tolist() == [[1.0]]

    rng = np.random.default_rng(1)
    for _ in range(50):
        as_ = [random_box(rng) for _ in range(int(rng.integers(1, 6)))]
        bs = [random_box(rng) for _ in range(int(rng.integers(1, 6)))]
        expected = [[pair_score(a, b, cfg) for b in bs] for a in as_]
        assert score_matrix(as_, bs, cfg) == pytest.approx(np.array(expected))


def test_stereo_pair_score():
    cfg = AffinityConfig()
    box = BBox(0.5, 0.5, 0.1, 0.1, "fish", 1.0)
    moved = BBox(0.6, 0.5, 0.1, 0.1, "fish", 1.0)

    both = StereoDetection(box, box, 0)
    assert stereo_pair_score(both, both, cfg) == 1.0

    # Only the left side is shared: the score is the left score alone.
    left_only = StereoDetection(moved, None, 1)
    assert stereo_pair_score(both, left_only, cfg) == pytest.approx(math.exp(-0.5))

    right_only = StereoDetection(None, box, 1)
    assert stereo_pair_score(left_only, right_only, cfg) == 0.0

    mixed = StereoDetection(moved, box, 1)
    assert stereo_pair_score(both, mixed, cfg) == pytest.approx(
        (math.exp(-0.5) + 1.0) / 2
    )

    as_ = [both, left_only, right_only]
    bs = [mixed, right_only]
    expected = [[stereo_pair_score(a, b, cfg) for b in bs] for a in as_]
    assert stereo_score_matrix(as_, bs, cfg) == pytest.approx(np.array(expected))
    assert stereo_score_matrix([], bs, cfg).shape == (0, 2)


def test_affinity_config():
    for kwargs in [
        dict(scale=0.0),
        dict(scale=-0.1),
        dict(scale=float("inf")),
        dict(label_mismatch_factor=1.5),
        dict(cx_factor=0.0),
    ]:
        with pytest.raises(ConfigurationError):
            AffinityConfig(**kwargs)


def test_pair_score_decreases_with_displacement():
    cfg = AffinityConfig()
    a = BBox(0.5, 0.5, 0.1, 0.1, "fish", 0.9)
    scores = [
        pair_score(a, BBox(0.5 + d, 0.5, 0.1, 0.1, "fish", 0.9), cfg)
        for d in np.linspace(0.0, 0.3, 31)
    ]
    assert all(s > t for s, t in zip(scores, scores[1:]))
    assert scores[0] == pytest.approx(0.9)

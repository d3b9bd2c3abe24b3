"""
Optimal bipartite matching of score matrices.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import linear_sum_assignment

from .affinity import AffinityConfig, score_matrix
from .exceptions import ConfigurationError, NumericInputError
from .model import BBox

__all__ = ("Assignment", "hungarian", "match", "match_scores")

DEFAULT_CUTOFF = 0.01

# Absolute tolerance when comparing totals of alternative pairings.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Assignment:
    """
    Result of matching a left and a right detection set.

    :param pairs: ``(left_index, right_index, score)`` triples, by left index.
    :param unmatched_left: Left indices without a partner, ascending.
    :param unmatched_right: Right indices without a partner, ascending.
    """

    pairs: Tuple[Tuple[int, int, float], ...] = ()
    unmatched_left: Tuple[int, ...] = ()
    unmatched_right: Tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)


def _check_scores(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2:
        raise NumericInputError(
            "score matrix must be two-dimensional, got shape {}".format(scores.shape)
        )
    if not np.all(np.isfinite(scores)):
        raise NumericInputError("score matrix has non-finite entries")
    if np.any(scores < 0):
        raise NumericInputError("score matrix has negative entries")
    return scores


def _solve(scores: np.ndarray) -> Tuple[float, List[Tuple[int, int]]]:
    if scores.size == 0:
        return 0.0, []
    rows, cols = linear_sum_assignment(scores, maximize=True)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    return math.fsum(scores[i, j] for i, j in pairs), pairs


def _upper_bound(scores: np.ndarray, size: int) -> float:
    # Each row contributes at most its maximum; only `size` rows get a partner.
    if size == 0:
        return 0.0
    row_max = np.sort(scores.max(axis=1))[::-1]
    return math.fsum(row_max[:size])


def _settled_rows(scores: np.ndarray, total: float, incumbent: dict) -> set:
    """
    Rows whose partner, or lack of one, is the same in every optimal pairing.
    """
    penalty = total + 1.0
    settled = set()
    for i in range(scores.shape[0]):
        altered = scores.copy()
        if i in incumbent:
            altered[i, incumbent[i]] -= penalty
        else:
            altered[i] += penalty
        _, pairs = _solve(altered)
        if dict(pairs).get(i) == incumbent.get(i):
            settled.add(i)
        elif math.fsum(scores[r, c] for r, c in pairs) < total - TIE_TOLERANCE:
            settled.add(i)
    return settled


def _lexicographic(scores: np.ndarray, total: float, incumbent: dict) -> list:
    """
    Walk rows in order and move each one to the smallest column that still
    admits an optimal pairing, keeping earlier decisions fixed.
    """
    m, n = scores.shape
    settled = _settled_rows(scores, total, incumbent)
    size = min(m, n)
    pairs = []
    fixed = 0.0
    free_cols = list(range(n))

    for i in range(m):
        if len(pairs) == size:
            break
        target = incumbent.get(i)
        later_rows = list(range(i + 1, m))
        need = size - len(pairs) - 1

        candidates = () if i in settled else free_cols
        for j in candidates:
            if target is not None and j >= target:
                break
            other_cols = [c for c in free_cols if c != j]
            if min(len(later_rows), len(other_cols)) != need:
                continue
            sub = scores[np.ix_(later_rows, other_cols)]
            goal = total - fixed - scores[i, j]
            if _upper_bound(sub, need) < goal - TIE_TOLERANCE:
                continue
            best, sub_pairs = _solve(sub)
            if best >= goal - TIE_TOLERANCE:
                target = j
                incumbent = {
                    later_rows[r]: other_cols[c] for r, c in sub_pairs
                }
                incumbent[i] = j
                break

        if target is not None:
            pairs.append((i, target))
            free_cols.remove(target)
            fixed += scores[i, target]

    return pairs


def hungarian(scores) -> List[Tuple[int, int]]:
    """
    Maximum-score pairing of the rows and columns of ``scores``.

    Exactly ``min(m, n)`` pairs are returned. Among pairings with the optimal
    total, the lexicographically smallest list of ``(row, column)`` pairs is
    chosen, so results are reproducible.

    :param scores: Non-negative ``m x n`` matrix.
    :type scores: array-like.

    :raises NumericInputError: for non-finite or negative entries.

    :Examples:

    >>> hungarian([[0.9, 0.1], [0.1, 0.9]])
    [(0, 0), (1, 1)]
    """
    scores = _check_scores(scores)
    if scores.size == 0:
        return []

    total, pairs = _solve(scores)
    return _lexicographic(scores, total, dict(pairs))


def match_scores(scores, cutoff: float = DEFAULT_CUTOFF) -> Assignment:
    """
    Run :func:`hungarian` on ``scores`` and demote pairs scoring below
    ``cutoff`` to unmatched on both sides.
    """
    if not 0.0 <= cutoff < 1.0:
        raise ConfigurationError("cutoff must be in [0, 1), got {!r}".format(cutoff))

    scores = _check_scores(scores)
    m, n = scores.shape

    pairs = []
    for i, j in hungarian(scores):
        score = float(scores[i, j])
        if score >= cutoff:
            pairs.append((i, j, score))
        else:
            logger.debug(
                "pair ({}, {}) demoted, score {:.4g} < {}", i, j, score, cutoff
            )

    left = {i for i, _, _ in pairs}
    right = {j for _, j, _ in pairs}
    return Assignment(
        pairs=tuple(pairs),
        unmatched_left=tuple(i for i in range(m) if i not in left),
        unmatched_right=tuple(j for j in range(n) if j not in right),
    )


def match(
    as_: Sequence[BBox],
    bs: Sequence[BBox],
    cfg: AffinityConfig,
    cutoff: float = DEFAULT_CUTOFF,
) -> Assignment:
    """
    Match two detection sets by their :func:`~detlink.affinity.score_matrix`.
    """
    return match_scores(score_matrix(as_, bs, cfg), cutoff)

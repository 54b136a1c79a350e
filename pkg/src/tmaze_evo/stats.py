"""Significance tests for the decoders and the ablation battery.

The rank-sum test is hand-rolled (exact null distribution for small
untied samples, otherwise the normal approximation with midranks, tie
correction and continuity correction) so its behaviour is pinned by
this package's tests rather than by a library version.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import t as student_t

from .errors import DegenerateSamplesError


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the mean of their rank span."""
    _, inverse, counts = np.unique(values, return_inverse=True,
                                   return_counts=True)
    ends = np.cumsum(counts)
    mids = (ends - counts + 1 + ends) / 2.0
    return mids[inverse]


# largest per-sample size for which the untied null distribution of U is
# enumerated exactly instead of normal-approximated
EXACT_LIMIT = 8


def _exact_u_counts(n1: int, n2: int) -> np.ndarray:
    """counts[u] of rank subsets of size n1 with U statistic u, untied."""
    counts = np.zeros((n1 + 1, n1 * n2 + 1), dtype=np.float64)
    counts[0, 0] = 1.0
    for rank in range(1, n1 + n2 + 1):
        for k in range(min(rank, n1), 0, -1):
            # adding pooled rank `rank` as the k-th (largest) member of the
            # subset raises U by rank - k
            shift = rank - k
            counts[k, shift:] += counts[k - 1, :counts.shape[1] - shift]
    return counts[n1]


def rank_sum_test(a, b) -> float:
    """Two-sided Mann-Whitney p-value.

    Small untied samples (both sizes <= 8) are tested against the exact
    enumeration of the U null distribution; anything larger or tied uses
    the normal approximation with midranks, the tie-corrected variance
    and a 0.5 continuity correction toward the mean. Raises
    DegenerateSamplesError when every value in both samples is identical
    (no rank information).
    """
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("rank_sum_test needs two non-empty samples")
    pooled = np.concatenate([x, y])
    if np.all(pooled == pooled[0]):
        raise DegenerateSamplesError("all values identical across samples")
    n1, n2 = x.size, y.size
    n = n1 + n2
    ranks = _midranks(pooled)
    u1 = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tied = counts.size < n

    if not tied and n1 <= EXACT_LIMIT and n2 <= EXACT_LIMIT:
        dist = _exact_u_counts(n1, n2)
        total = dist.sum()
        u = int(round(u1))
        lo = dist[:u + 1].sum() / total
        hi = dist[u:].sum() / total
        return min(1.0, 2.0 * min(lo, hi))

    mu = n1 * n2 / 2.0
    tie = float((counts.astype(np.float64) ** 3 - counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    diff = u1 - mu
    if diff != 0.0:
        diff -= 0.5 * math.copysign(1.0, diff)
    z = diff / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def t_test_vs_chance(correct: int, total: int, chance: float) -> float:
    """Two-sided one-sample t-test of a hit rate against a chance level.

    The sample is the per-trial 0/1 correctness indicator. Raises
    DegenerateSamplesError when the indicator has zero variance.
    """
    if total <= 1:
        raise ValueError("t_test_vs_chance needs total > 1")
    if not 0 <= correct <= total:
        raise ValueError("correct must lie in [0, total]")
    mean = correct / total
    ss = correct * (1.0 - mean) ** 2 + (total - correct) * mean ** 2
    s2 = ss / (total - 1)
    if s2 == 0.0:
        raise DegenerateSamplesError("indicator has zero variance")
    t = (mean - chance) / math.sqrt(s2 / total)
    return float(2.0 * student_t.sf(abs(t), total - 1))

"""Template classification of speed-distorted traces with dynamic time
warping, plus maximin Hamming codebooks for the reduced code space the
classification approach implies."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence

import numpy as np
from numba import njit
from scipy.ndimage import uniform_filter1d
from sklearn.base import BaseEstimator, ClassifierMixin

from .channel import RssTrace

DEFAULT_RESAMPLE_LENGTH = 256

# Per-step cost of leaving the diagonal, in z-normalized signal units, used
# by the classifiers.  Free insertions let an alternating-stripe trace
# duplicate plateau samples and collapse onto the wrong template; a soft
# penalty keeps genuine speed warps affordable while pricing out wholesale
# stripe duplication.
DEFAULT_WARP_PENALTY = 0.5


@njit(cache=True)
def _dtw_kernel(a, b, radius, warp_penalty):
    """Min-cost DTW with |a_i - b_j| local cost and diagonal/right/down
    steps; returns (total cost, warping path length).  Ties prefer the
    diagonal so the reported path is the shortest min-cost one the DP sees.
    radius < 0 means no band constraint; warp_penalty is an extra cost per
    non-diagonal step."""
    n = len(a)
    m = len(b)
    inf = np.inf
    cost = np.full((n + 1, m + 1), inf)
    steps = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        j0, j1 = 1, m
        if radius >= 0:
            center = i * m / n
            j0 = max(1, int(np.floor(center - radius)))
            j1 = min(m, int(np.ceil(center + radius)))
        for j in range(j0, j1 + 1):
            best = cost[i - 1, j - 1]
            st = steps[i - 1, j - 1]
            if cost[i - 1, j] + warp_penalty < best:
                best = cost[i - 1, j] + warp_penalty
                st = steps[i - 1, j]
            if cost[i, j - 1] + warp_penalty < best:
                best = cost[i, j - 1] + warp_penalty
                st = steps[i, j - 1]
            if best == inf:
                continue
            cost[i, j] = best + abs(a[i - 1] - b[j - 1])
            steps[i, j] = st + 1
    return cost[n, m], steps[n, m]


def dtw_distance(
    a: Sequence[float],
    b: Sequence[float],
    radius: Optional[int] = None,
    warp_penalty: float = 0.0,
) -> float:
    """Path-length-normalized DTW distance; 0 for identical series."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("series must be non-empty")
    if warp_penalty < 0:
        raise ValueError("warp_penalty must be >= 0")
    cost, length = _dtw_kernel(
        a, b, -1 if radius is None else int(radius), warp_penalty
    )
    if not np.isfinite(cost):
        raise ValueError("warping band too narrow for these series")
    return float(cost / length)


def znormalize(samples: Sequence[float]) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    mean = x.mean()
    std = x.std()
    # a spread at rounding level of the mean is a constant series in disguise
    if std == 0 or std <= 16 * np.finfo(float).eps * abs(mean):
        raise ValueError("cannot z-normalize a constant series")
    return (x - mean) / std


def resample(samples: Sequence[float], length: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two samples to resample")
    pos = np.linspace(0.0, len(x) - 1, length)
    return np.interp(pos, np.arange(len(x)), x)


def trim_active(
    samples: Sequence[float], threshold_frac: float = 0.1, pad_frac: float = 0.05
) -> np.ndarray:
    """Slice out the active (above-baseline) portion of a trace, with a small
    pad on both sides.  Aligning on the signal itself rather than the full
    recording keeps the warping path anchored regardless of how much idle
    baseline surrounds the transit."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two samples to trim")
    s = uniform_filter1d(x, 5, mode="nearest")
    span = s.max() - s.min()
    if span == 0:
        return x
    idx = np.flatnonzero(s > s.min() + threshold_frac * span)
    pad = max(1, int(pad_frac * len(x)))
    lo = max(0, idx[0] - pad)
    hi = min(len(x), idx[-1] + 1 + pad)
    return x[lo:hi]


def _prepare(samples: Sequence[float], length: int) -> np.ndarray:
    return znormalize(resample(trim_active(samples), length))


@dataclass(frozen=True)
class Template:
    """Clean reference trace for one bit pattern."""

    label: str
    trace: RssTrace
    normalized: np.ndarray

    @classmethod
    def from_trace(
        cls, label: str, trace: RssTrace, length: int = DEFAULT_RESAMPLE_LENGTH
    ) -> "Template":
        return cls(label=label, trace=trace, normalized=_prepare(trace.samples, length))


@dataclass(frozen=True)
class DtwResult:
    distances: Dict[str, float]
    best_label: str
    margin: float


def classify_trace(
    trace: RssTrace,
    templates: Sequence[Template],
    radius: Optional[int] = None,
    warp_penalty: float = DEFAULT_WARP_PENALTY,
) -> DtwResult:
    """Nearest template under normalized DTW; ties break lexicographically
    by label.  margin = second-best / best distance (1 with one template)."""
    if not templates:
        raise ValueError("need at least one template")
    length = len(templates[0].normalized)
    query = _prepare(trace.samples, length)
    distances = {
        t.label: dtw_distance(
            query, t.normalized, radius=radius, warp_penalty=warp_penalty
        )
        for t in templates
    }
    ordered = sorted(distances.items(), key=lambda kv: (kv[1], kv[0]))
    best_label, best = ordered[0]
    if len(ordered) == 1:
        margin = 1.0
    else:
        second = ordered[1][1]
        margin = second / best if best > 0 else float("inf")
    return DtwResult(distances=distances, best_label=best_label, margin=margin)


class DtwClassifier(BaseEstimator, ClassifierMixin):
    """Sklearn-style wrapper: fit on clean template traces, predict labels
    for distorted ones."""

    def __init__(self, resample_length: int = DEFAULT_RESAMPLE_LENGTH,
                 radius: Optional[int] = None,
                 warp_penalty: float = DEFAULT_WARP_PENALTY):
        self.resample_length = resample_length
        self.radius = radius
        self.warp_penalty = warp_penalty

    def fit(self, X: Sequence[RssTrace], y: Sequence[str]):
        if len(X) != len(y):
            raise ValueError("X and y must have equal length")
        self.templates_ = [
            Template.from_trace(str(label), trace, self.resample_length)
            for trace, label in zip(X, y)
        ]
        self.classes_ = np.array(sorted({t.label for t in self.templates_}))
        return self

    def predict(self, X: Sequence[RssTrace]) -> np.ndarray:
        if not hasattr(self, "templates_"):
            raise ValueError("DtwClassifier is not fitted")
        return np.array(
            [
                classify_trace(
                    t, self.templates_, radius=self.radius,
                    warp_penalty=self.warp_penalty,
                ).best_label
                for t in X
            ]
        )


@dataclass(frozen=True)
class Codebook:
    codes: tuple
    min_hamming: int

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(self.codes))


def hamming(a: str, b: str) -> int:
    if len(a) != len(b):
        raise ValueError("codes must have equal length")
    return sum(x != y for x, y in zip(a, b))


def _feasible(codes: List[str], count: int, min_dist: int, candidates: List[str]):
    """Lexicographic backtracking for a size-``count`` code set with pairwise
    Hamming distance >= min_dist; codes already chosen are a prefix."""
    if len(codes) == count:
        return list(codes)
    start = candidates.index(codes[-1]) + 1 if codes else 0
    for i in range(start, len(candidates)):
        cand = candidates[i]
        if all(hamming(cand, c) >= min_dist for c in codes):
            found = _feasible(codes + [cand], count, min_dist, candidates)
            if found:
                return found
    return None


def build_codebook(bit_length: int, count: int) -> Codebook:
    """Deterministic maximin codebook over {0,1}^N containing the all-zero
    code: the largest pairwise Hamming distance achievable for ``count``
    codes, found by backtracking over distances N..1."""
    if bit_length <= 0:
        raise ValueError("bit_length must be > 0")
    if count < 1 or count > 2 ** bit_length:
        raise ValueError("count must lie in [1, 2^bit_length]")
    if bit_length > 16:
        raise ValueError("bit_length > 16 not supported")
    zero = "0" * bit_length
    if count == 1:
        return Codebook(codes=(zero,), min_hamming=bit_length)
    candidates = [format(v, f"0{bit_length}b") for v in range(2 ** bit_length)]
    for d in range(bit_length, 0, -1):
        found = _feasible([zero], count, d, candidates)
        if found:
            achieved = min(hamming(a, b) for a, b in combinations(found, 2))
            return Codebook(codes=tuple(found), min_hamming=achieved)
    raise AssertionError("distance 1 is always feasible for count <= 2^N")

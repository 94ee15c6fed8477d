"""Descriptor matching with the ratio test and geometric trimming of false matches.

Two images are laid side by side (the probe to the right of the template)
and every match becomes a line segment. Genuine matches between two
acquisitions of the same iris are close to parallel and of similar length;
trimming keeps only lines that agree with the predominant angle and length.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from irisift.scalespace import SiftParams

DEFAULT_MODE_WINDOW = 18.0
_CHUNK = 64


@dataclass(frozen=True)
class MatchPair:
    index_a: int
    index_b: int
    ratio: float
    theta: float
    length: float


@dataclass
class MatchResult:
    pairs: list = field(default_factory=list)
    theta_p: float = float("nan")
    length_p: float = float("nan")

    @property
    def score(self):
        return len(self.pairs)


def _line_geometry(xa, ya, xb, yb, width_a):
    dx = xb + width_a - xa
    dy = yb - ya
    theta = math.degrees(math.atan2(dy, dx))
    theta = (theta + 90.0) % 180.0 - 90.0
    if theta == -90.0:
        theta = 90.0
    return theta, math.hypot(dx, dy)


def _two_nearest(desc_a, desc_b, valid_b):
    """Index of nearest, its distance, and second-nearest distance for each row of a.

    Distances are exact Euclidean norms of differences. Ties go to the lower
    index in ``b``.
    """
    n = desc_a.shape[0]
    idx = np.full(n, -1, dtype=np.int64)
    d1 = np.full(n, np.inf)
    d2 = np.full(n, np.inf)
    cand = desc_b[valid_b]
    cand_idx = np.flatnonzero(valid_b)
    if cand.shape[0] == 0:
        return idx, d1, d2
    for start in range(0, n, _CHUNK):
        block = desc_a[start:start + _CHUNK]
        dist = np.sqrt(((block[:, None, :] - cand[None, :, :]) ** 2).sum(axis=2))
        best = np.argmin(dist, axis=1)
        rows = np.arange(block.shape[0])
        idx[start:start + _CHUNK] = cand_idx[best]
        d1[start:start + _CHUNK] = dist[rows, best]
        if cand.shape[0] > 1:
            dist[rows, best] = np.inf
            d2[start:start + _CHUNK] = dist.min(axis=1)
    return idx, d1, d2


def match_descriptors(a, b, ratio_threshold=0.76):
    """Ratio-test matches from template features ``a`` to probe features ``b``.

    A keypoint of ``a`` is paired with its nearest neighbour in ``b`` when
    ``d1 / d2 < ratio_threshold``; with a threshold of 1 or more every
    nearest neighbour is accepted. Degenerate descriptors never match.
    """
    if len(a) == 0 or len(b) == 0:
        return []
    valid_a = ~np.asarray(a.degenerate, dtype=bool)
    valid_b = ~np.asarray(b.degenerate, dtype=bool)
    idx, d1, d2 = _two_nearest(np.asarray(a.descriptors, dtype=np.float64),
                               np.asarray(b.descriptors, dtype=np.float64), valid_b)
    pairs = []
    for i in range(len(a)):
        if not valid_a[i] or idx[i] < 0:
            continue
        if np.isinf(d2[i]):
            ratio = 0.0
        elif d2[i] == 0.0:
            ratio = 1.0
        else:
            ratio = d1[i] / d2[i]
        if ratio_threshold < 1.0 and not ratio < ratio_threshold:
            continue
        ka, kb = a.keypoints[i], b.keypoints[int(idx[i])]
        theta, length = _line_geometry(ka.x, ka.y, kb.x, kb.y, a.width)
        pairs.append(MatchPair(i, int(idx[i]), float(ratio), theta, length))
    return pairs


def angle_diff(a, b):
    """Signed difference between two line angles, modulo 180, in [-90, 90)."""
    return (np.asarray(a) - b + 90.0) % 180.0 - 90.0


def predominant_geometry(pairs, window=DEFAULT_MODE_WINDOW):
    """Predominant line angle and length of a set of matches.

    The angle comes from the densest ``window``-wide band of line angles
    (the band centred on each line in turn; more members wins, then the
    tighter band, then the smaller angle). It is refined to the median
    angle inside the band; the length is the median length inside it.
    """
    if not pairs:
        return float("nan"), float("nan")
    theta = np.array([p.theta for p in pairs])
    length = np.array([p.length for p in pairs])
    diffs = angle_diff(theta[None, :], theta[:, None])
    inside = np.abs(diffs) <= window / 2.0
    counts = inside.sum(axis=1)
    spread = np.where(inside, np.abs(diffs), 0.0).sum(axis=1)
    order = np.lexsort((theta, spread, -counts))
    best = order[0]
    members = inside[best]
    centre = theta[best] + float(np.median(diffs[best][members]))
    theta_p = float(angle_diff(centre, 0.0))
    return theta_p, float(np.median(length[members]))


def trim_matches(pairs, angle_tol=18.0, length_tol=0.14, window=DEFAULT_MODE_WINDOW, geometry=None):
    """Keep matches with ``|theta - theta_p| < angle_tol`` and ``|l / l_p - 1| < length_tol``.

    The predominant geometry is estimated over a fixed ``window`` so that
    tightening either tolerance can only remove matches. ``geometry`` takes
    a precomputed ``(theta_p, length_p)``.
    """
    if not pairs:
        return MatchResult()
    theta_p, length_p = geometry if geometry is not None else predominant_geometry(pairs, window)
    kept = []
    for p in pairs:
        if abs(float(angle_diff(p.theta, theta_p))) >= angle_tol:
            continue
        if not length_p > 0 or abs(p.length / length_p - 1.0) >= length_tol:
            continue
        kept.append(p)
    return MatchResult(kept, theta_p, length_p)


def match_features(a, b, params=None):
    """Ratio-test matching followed by trimming (unless ``params.trim`` is off)."""
    params = params or SiftParams()
    pairs = match_descriptors(a, b, params.ratio_threshold)
    if not params.trim:
        return MatchResult(pairs)
    return trim_matches(pairs, params.angle_tolerance, params.length_tolerance)


def sift_score(a, b, params=None):
    """Number of matches surviving the ratio test and trimming; ``a`` is the template."""
    return match_features(a, b, params).score


def write_match_dump(path, result):
    lines = [f"# theta_p={result.theta_p:.6g} l_p={result.length_p:.6g} score={result.score}"]
    for p in result.pairs:
        lines.append(f"{p.index_a} {p.index_b} {p.ratio:.6g} {p.theta:.6g} {p.length:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")

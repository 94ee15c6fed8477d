"""SIFT keypoint detection, orientation assignment and 128-D descriptors."""
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from irisift import kernels
from irisift.errors import FormatError, ParameterError
from irisift.scalespace import SiftParams, build_scale_space

MAX_REANCHOR = 5
REGION_HALF = 8.0
ORIENTATION_BINS = 36
ORIENTATION_PEAK_RATIO = 0.8
ORIENTATION_WINDOW_FACTOR = 1.5
DESCRIPTOR_WINDOW_SIGMA = 8.0
DESCRIPTOR_CLAMP = 0.2
DESCRIPTOR_SIZE = 128


@dataclass(frozen=True)
class Keypoint:
    """An interest point in original-image coordinates."""

    x: float
    y: float
    octave: int
    level: int
    sigma: float
    orientation: float = 0.0
    contrast: float = 0.0

    @property
    def octave_scale(self):
        return 2.0 ** self.octave

    def octave_xy(self):
        f = self.octave_scale
        return self.x / f, self.y / f

    def sort_key(self):
        return (self.octave, self.level, self.y, self.x, self.orientation)


@dataclass
class SiftFeatures:
    """Keypoints of one image with their descriptors.

    ``descriptors`` is an (N, 128) array; ``degenerate[i]`` marks an
    all-zero descriptor, which never takes part in matching.
    """

    keypoints: list
    descriptors: np.ndarray
    degenerate: np.ndarray
    width: int
    height: int

    def __len__(self):
        return len(self.keypoints)

    def xy(self):
        return np.array([(k.x, k.y) for k in self.keypoints], dtype=np.float64).reshape(-1, 2)

    def save(self, path):
        write_keypoint_file(path, self)

    @classmethod
    def load(cls, path):
        return read_keypoint_file(path)


def detect_extrema(space):
    """Candidate (octave, level, x, y) samples that beat all 26 neighbours.

    Only DoG levels with a level on both sides are scanned.
    """
    out = []
    for octave in space.octaves:
        dogs = octave.dogs
        for level in range(1, len(dogs) - 1):
            hits = kernels.local_extrema(dogs[level - 1], dogs[level], dogs[level + 1])
            out.extend((octave.index, level, int(x), int(y)) for y, x in hits)
    return out


def _derivatives(dogs, level, y, x):
    d0, d1, d2 = dogs[level - 1], dogs[level], dogs[level + 1]
    c = d1[y, x]
    gx = 0.5 * (d1[y, x + 1] - d1[y, x - 1])
    gy = 0.5 * (d1[y + 1, x] - d1[y - 1, x])
    gs = 0.5 * (d2[y, x] - d0[y, x])
    hxx = d1[y, x + 1] + d1[y, x - 1] - 2.0 * c
    hyy = d1[y + 1, x] + d1[y - 1, x] - 2.0 * c
    hss = d2[y, x] + d0[y, x] - 2.0 * c
    hxy = 0.25 * (d1[y + 1, x + 1] - d1[y + 1, x - 1] - d1[y - 1, x + 1] + d1[y - 1, x - 1])
    hxs = 0.25 * (d2[y, x + 1] - d2[y, x - 1] - d0[y, x + 1] + d0[y, x - 1])
    hys = 0.25 * (d2[y + 1, x] - d2[y - 1, x] - d0[y + 1, x] + d0[y - 1, x])
    grad = np.array([gx, gy, gs])
    hess = np.array([[hxx, hxy, hxs], [hxy, hyy, hys], [hxs, hys, hss]])
    return c, grad, hess


def refine_candidate(space, octave, level, x, y, params):
    """Sub-pixel refinement and stability tests for one candidate.

    Returns a :class:`Keypoint` (orientation unset) or ``None`` when the
    candidate drifts away, has low contrast, or lies on an edge.
    """
    dogs = space.octaves[octave].dogs
    h, w = dogs[0].shape
    s = params.scales_per_octave
    for step in range(MAX_REANCHOR + 1):
        value, grad, hess = _derivatives(dogs, level, y, x)
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(offset)):
            return None
        if np.all(np.abs(offset) <= 0.5):
            break
        if step == MAX_REANCHOR:
            return None
        x += int(np.rint(offset[0]))
        y += int(np.rint(offset[1]))
        level += int(np.rint(offset[2]))
        if not (1 <= level <= s and 1 <= x <= w - 2 and 1 <= y <= h - 2):
            return None

    contrast = abs(value + 0.5 * float(grad @ offset))
    if contrast < params.contrast_threshold:
        return None

    hxx, hyy, hxy = hess[0, 0], hess[1, 1], hess[0, 1]
    tr = hxx + hyy
    det = hxx * hyy - hxy * hxy
    r = params.edge_threshold
    if det <= 0 or tr * tr / det >= (r + 1) ** 2 / r:
        return None

    f = 2.0 ** octave
    return Keypoint(
        x=(x + offset[0]) * f,
        y=(y + offset[1]) * f,
        octave=octave,
        level=level,
        sigma=params.sigma0 * params.k ** (level + offset[2]) * f,
        contrast=contrast,
    )


def refine_and_filter(candidates, space, params=None):
    """Refine every candidate; drop unstable ones and exact duplicates."""
    params = params or space.params
    seen = set()
    out = []
    for octave, level, x, y in candidates:
        kp = refine_candidate(space, octave, level, x, y, params)
        if kp is None:
            continue
        key = (kp.octave, kp.level, kp.x, kp.y)
        if key in seen:
            continue
        seen.add(key)
        out.append(kp)
    return out


def _region_inside(kx, ky, shape, half=REGION_HALF):
    h, w = shape
    return kx - half > 0 and kx + half < w - 1 and ky - half > 0 and ky + half < h - 1


def orientation_histogram(kp, space):
    octave = space.octaves[kp.octave]
    mag, ori = octave.gradients(kp.level)
    kx, ky = kp.octave_xy()
    sigma_w = ORIENTATION_WINDOW_FACTOR * kp.sigma / kp.octave_scale
    return kernels.orientation_histogram(mag, ori, kx, ky, sigma_w, REGION_HALF, ORIENTATION_BINS)


def assign_orientations(kp, space):
    """One keypoint per dominant orientation (peaks within 80 % of the maximum)."""
    octave = space.octaves[kp.octave]
    kx, ky = kp.octave_xy()
    if not _region_inside(kx, ky, octave.shape):
        return []
    hist = orientation_histogram(kp, space)
    top = hist.max()
    if top <= 0:
        return [replace(kp, orientation=0.0)]
    n = hist.size
    bin_width = 360.0 / n
    out = []
    for i in range(n):
        left, centre, right = hist[(i - 1) % n], hist[i], hist[(i + 1) % n]
        if centre < ORIENTATION_PEAK_RATIO * top or not (centre > left and centre >= right):
            continue
        denom = left - 2.0 * centre + right
        offset = 0.5 * (left - right) / denom if denom != 0 else 0.0
        angle = ((i + offset) * bin_width) % 360.0
        out.append(replace(kp, orientation=angle))
    return out


def compute_descriptor(kp, space):
    """128-D descriptor; returns ``(values, degenerate)``.

    Values are unit-normalised, clamped at 0.2 and renormalised. A region
    without any gradient yields zeros and ``degenerate=True``.
    """
    octave = space.octaves[kp.octave]
    mag, ori = octave.gradients(kp.level)
    kx, ky = kp.octave_xy()
    raw = kernels.descriptor_histogram(mag, ori, kx, ky, kp.orientation, REGION_HALF, DESCRIPTOR_WINDOW_SIGMA)
    return normalize_descriptor(raw)


def normalize_descriptor(raw):
    raw = np.asarray(raw, dtype=np.float64)
    norm = np.linalg.norm(raw)
    if not norm > 1e-12:
        return np.zeros(DESCRIPTOR_SIZE), True
    v = np.minimum(raw / norm, DESCRIPTOR_CLAMP)
    return v / np.linalg.norm(v), False


def _round_half_up(v):
    return int(math.floor(v + 0.5))


def filter_by_mask(kps, mask, image_shape=None):
    """Keep keypoints whose rounded position falls on a true mask pixel."""
    mask = np.asarray(mask, dtype=bool)
    if image_shape is not None and tuple(mask.shape) != tuple(image_shape):
        raise ParameterError(f"mask shape {mask.shape} does not match image shape {tuple(image_shape)}")
    h, w = mask.shape
    out = []
    for kp in kps:
        xi = min(max(_round_half_up(kp.x), 0), w - 1)
        yi = min(max(_round_half_up(kp.y), 0), h - 1)
        if mask[yi, xi]:
            out.append(kp)
    return out


def extract_features(img, params=None, mask=None, space=None):
    """Full SIFT pipeline, optionally restricted to a boolean region mask."""
    params = params or SiftParams()
    if space is None:
        space = build_scale_space(img, params)
    kps = refine_and_filter(detect_extrema(space), space, params)
    if mask is not None:
        kps = filter_by_mask(kps, mask, space.image_shape)
    oriented = []
    for kp in kps:
        oriented.extend(assign_orientations(kp, space))
    oriented.sort(key=Keypoint.sort_key)
    desc = np.zeros((len(oriented), DESCRIPTOR_SIZE))
    degenerate = np.zeros(len(oriented), dtype=bool)
    for i, kp in enumerate(oriented):
        desc[i], degenerate[i] = compute_descriptor(kp, space)
    h, w = space.image_shape
    return SiftFeatures(oriented, desc, degenerate, width=w, height=h)


def write_keypoint_file(path, features):
    lines = [
        f"# sift-keypoints v1 count={len(features)} width={features.width} height={features.height}"
    ]
    for kp, d in zip(features.keypoints, features.descriptors):
        fields = [kp.x, kp.y, kp.sigma, kp.orientation, *d]
        lines.append(" ".join(f"{v:.6g}" for v in fields))
    Path(path).write_text("\n".join(lines) + "\n")


def read_keypoint_file(path):
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# sift-keypoints v1"):
        raise FormatError(f"{path}: missing sift-keypoints header")
    meta = dict(tok.split("=", 1) for tok in text[0].split()[3:] if "=" in tok)
    try:
        count = int(meta["count"])
        width = int(meta.get("width", 0))
        height = int(meta.get("height", 0))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header") from exc
    rows = [ln for ln in text[1:] if ln.strip() and not ln.startswith("#")]
    if len(rows) != count:
        raise FormatError(f"{path}: header says {count} keypoints, found {len(rows)}")
    kps = []
    desc = np.zeros((count, DESCRIPTOR_SIZE))
    for i, row in enumerate(rows):
        vals = row.split()
        if len(vals) != 4 + DESCRIPTOR_SIZE:
            raise FormatError(f"{path}: line {i + 2} has {len(vals)} fields")
        x, y, sigma, ori = map(float, vals[:4])
        kps.append(Keypoint(x=x, y=y, octave=0, level=0, sigma=sigma, orientation=ori))
        desc[i] = np.array(vals[4:], dtype=np.float64)
    degenerate = ~np.any(desc != 0, axis=1)
    return SiftFeatures(kps, desc, degenerate, width=width, height=height)

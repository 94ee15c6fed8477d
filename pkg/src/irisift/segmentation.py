"""Pupil and iris boundary detection (circular Hough transform) and iris masks."""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from irisift import kernels
from irisift.errors import FormatError, ParameterError, SegmentationError
from irisift.imaging import as_gray, gaussian_blur, gradient_field

DEFAULT_PUPIL_RANGE = (20, 80)
DEFAULT_IRIS_RANGE = (80, 160)
EDGE_PERCENTILE = 90.0
EDGE_SMOOTHING = 1.0
PUPIL_CENTRE_TOLERANCE = 0.25
MIN_VOTE_FRACTION = 0.25


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"circle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class IrisAnnulus:
    pupil: Circle
    iris: Circle

    def __post_init__(self):
        if not self.pupil.radius < self.iris.radius:
            raise ParameterError("pupil radius must be smaller than iris radius")
        d = math.hypot(self.pupil.cx - self.iris.cx, self.pupil.cy - self.iris.cy)
        if not d < self.iris.radius:
            raise ParameterError("pupil centre must lie inside the iris circle")


def edge_map(img, percentile=EDGE_PERCENTILE, smoothing=EDGE_SMOOTHING):
    """Edge pixels and their unit gradient normals.

    An edge pixel has gradient magnitude strictly above the given percentile
    of all magnitudes. Returns ``(ys, xs, uy, ux)`` as float arrays.
    """
    img = as_gray(img)
    if smoothing > 0:
        img = gaussian_blur(img, smoothing)
    mag, ori = gradient_field(img)
    thr = np.percentile(mag, percentile)
    ys, xs = np.nonzero(mag > thr)
    theta = np.deg2rad(ori[ys, xs])
    return ys.astype(np.float64), xs.astype(np.float64), np.sin(theta), np.cos(theta)


def _pool3(acc):
    """Sum of votes over each cell's 3x3 neighbourhood (absorbs rounding scatter)."""
    padded = np.pad(acc, 1)
    h, w = acc.shape
    out = np.zeros_like(acc)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy:dy + h, dx:dx + w]
    return out


def _best_circle(edges, radii, shape, centre_ok=None):
    ys, xs, uy, ux = edges
    h, w = shape
    best = (0, None)
    for r in radii:
        acc = _pool3(kernels.hough_accumulate(ys, xs, uy, ux, float(r), h, w))
        if centre_ok is not None:
            acc = np.where(centre_ok, acc, 0)
        flat = int(np.argmax(acc))
        votes = int(acc.flat[flat])
        if votes > best[0]:
            best = (votes, (flat % w, flat // w, r))
    return best


def detect_circles(img, pupil_range=DEFAULT_PUPIL_RANGE, iris_range=DEFAULT_IRIS_RANGE,
                   min_vote_fraction=MIN_VOTE_FRACTION):
    """Locate the iris and then the pupil boundary.

    The iris is the strongest circle over ``iris_range``; the pupil is the
    strongest circle over ``pupil_range`` whose centre lies within a quarter
    of the iris radius from the iris centre. A circle needs at least
    ``min_vote_fraction`` of its circumference in votes.
    """
    img = as_gray(img)
    plo, phi = pupil_range
    ilo, ihi = iris_range
    if plo < 1 or phi < plo or ihi < ilo or plo >= ilo:
        raise ParameterError(f"bad radius ranges pupil={pupil_range} iris={iris_range}")
    edges = edge_map(img)
    if edges[0].size == 0:
        raise SegmentationError("image has no edges")

    votes, found = _best_circle(edges, range(int(ilo), int(ihi) + 1), img.shape)
    if found is None or votes < min_vote_fraction * 2 * math.pi * found[2]:
        raise SegmentationError(f"no iris boundary found (best {votes} votes)")
    iris = Circle(float(found[0]), float(found[1]), float(found[2]))

    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    near = np.hypot(xx - iris.cx, yy - iris.cy) <= PUPIL_CENTRE_TOLERANCE * iris.radius
    pupil_radii = [r for r in range(int(plo), int(phi) + 1) if r < iris.radius]
    votes, found = _best_circle(edges, pupil_radii, img.shape, near)
    if found is None or votes < min_vote_fraction * 2 * math.pi * found[2]:
        raise SegmentationError(f"no pupil boundary found (best {votes} votes)")
    pupil = Circle(float(found[0]), float(found[1]), float(found[2]))
    return IrisAnnulus(pupil=pupil, iris=iris)


def annulus_to_mask(annulus, width, height):
    """Boolean (height, width) mask: inside the iris circle, outside the pupil circle."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    p, i = annulus.pupil, annulus.iris
    in_iris = (xx - i.cx) ** 2 + (yy - i.cy) ** 2 <= i.radius ** 2
    out_pupil = (xx - p.cx) ** 2 + (yy - p.cy) ** 2 > p.radius ** 2
    return in_iris & out_pupil


def load_manual_annulus(path):
    """Parse a ``pupil cx cy r`` / ``iris cx cy r`` text file."""
    text = Path(path).read_text()
    circles = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] not in ("pupil", "iris"):
            raise FormatError(f"{path}:{n}: expected '<pupil|iris> cx cy r'")
        try:
            cx, cy, r = map(float, parts[1:])
            circles[parts[0]] = Circle(cx, cy, r)
        except (ValueError, ParameterError) as exc:
            raise FormatError(f"{path}:{n}: {exc}") from exc
    if set(circles) != {"pupil", "iris"}:
        raise FormatError(f"{path}: needs one 'pupil' and one 'iris' line")
    try:
        return IrisAnnulus(pupil=circles["pupil"], iris=circles["iris"])
    except ParameterError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_annulus(path, annulus):
    p, i = annulus.pupil, annulus.iris
    Path(path).write_text(
        f"pupil {p.cx:g} {p.cy:g} {p.radius:g}\niris {i.cx:g} {i.cy:g} {i.radius:g}\n"
    )

"""Image loading and shared numerical primitives.

Images are 2-D ``float64`` arrays indexed ``[y, x]`` with values in [0, 1].
"""
import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from irisift import kernels
from irisift.errors import BoundsError, FormatError, ParameterError, SizeError


def as_gray(img):
    """Validate and return ``img`` as a contiguous float64 2-D array."""
    arr = np.ascontiguousarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise SizeError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    return arr


def load_image(path):
    """Read an 8-bit PGM or PNG file into a [0, 1] grayscale array.

    RGB(A) PNGs are converted with ITU-R 601 luma weights.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in ("PPM", "PNG"):
                raise FormatError(f"{path}: unsupported image format {im.format}")
            if im.format == "PPM" and im.mode != "L":
                raise FormatError(f"{path}: only 8-bit grayscale PGM is supported")
            if im.mode in ("RGB", "RGBA", "P", "LA"):
                im = im.convert("L")
            elif im.mode != "L":
                raise FormatError(f"{path}: unsupported pixel mode {im.mode}")
            data = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a recognised image") from exc
    return data.astype(np.float64) / 255.0


def save_pgm(path, img):
    """Write a [0, 1] image (or boolean mask) as an 8-bit binary PGM."""
    arr = np.asarray(img)
    if arr.dtype == bool:
        data = arr.astype(np.uint8) * 255
    else:
        data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def gaussian_kernel(sigma):
    """1-D Gaussian truncated at ``ceil(4 sigma)`` and renormalised to sum 1."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    radius = max(int(math.ceil(4.0 * sigma)), 1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img, sigma):
    """Separable Gaussian blur with edge-clamped borders."""
    img = as_gray(img)
    k = gaussian_kernel(sigma)
    tmp = kernels.blur_rows(img, k)
    return np.ascontiguousarray(kernels.blur_rows(np.ascontiguousarray(tmp.T), k).T)


def downsample2(img):
    """Keep every second sample in both directions."""
    img = as_gray(img)
    h, w = img.shape
    if h < 2 or w < 2:
        raise SizeError(f"cannot downsample a {w}x{h} image")
    return np.ascontiguousarray(img[0:2 * (h // 2):2, 0:2 * (w // 2):2])


def gradient_at(img, x, y):
    """Central-difference gradient magnitude and orientation (degrees, [0, 360))."""
    h, w = img.shape
    if not (1 <= x <= w - 2 and 1 <= y <= h - 2):
        raise BoundsError(f"({x}, {y}) is on or outside the 1-pixel border of a {w}x{h} image")
    dx = img[y, x + 1] - img[y, x - 1]
    dy = img[y + 1, x] - img[y - 1, x]
    return math.hypot(dx, dy), math.degrees(math.atan2(dy, dx)) % 360.0


def gradient_field(img):
    """Vectorised ``gradient_at`` over the whole image.

    Border pixels get magnitude 0 and orientation 0.
    """
    img = as_gray(img)
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[1:-1, 1:-1] = img[1:-1, 2:] - img[1:-1, :-2]
    dy[1:-1, 1:-1] = img[2:, 1:-1] - img[:-2, 1:-1]
    mag = np.hypot(dx, dy)
    ori = np.mod(np.degrees(np.arctan2(dy, dx)), 360.0)
    # np.mod can round tiny negatives up to exactly 360
    ori[ori >= 360.0] = 0.0
    return mag, ori


def bilinear_sample(img, xs, ys, fill=0.0):
    """Sample ``img`` at real coordinates; returns (values, inside).

    Points outside ``[0, w-1] x [0, h-1]`` get ``fill`` and ``inside=False``.
    """
    h, w = img.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xc = np.clip(xs, 0, w - 1)
    yc = np.clip(ys, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.int64), w - 2) if w > 1 else np.zeros(xc.shape, np.int64)
    y0 = np.minimum(np.floor(yc).astype(np.int64), h - 2) if h > 1 else np.zeros(yc.shape, np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    vals = top * (1 - fy) + bottom * fy
    return np.where(inside, vals, fill), inside

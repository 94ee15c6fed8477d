"""Synthetic textures and eye images for tests, benchmarks and the demo dataset.

Everything here is seeded; the same arguments always give the same pixels.
"""
import math

import numpy as np

from irisift.imaging import bilinear_sample, gaussian_blur


def random_texture(shape, seed, scales=(1.5, 3.0, 6.0)):
    """Band-limited random texture in [0, 1] built from blurred noise."""
    rng = np.random.default_rng(seed)
    h, w = shape
    tex = np.zeros((h, w))
    for s in scales:
        layer = gaussian_blur(rng.standard_normal((h, w)), s)
        tex += layer / (layer.std() + 1e-12)
    tex -= tex.min()
    return tex / (tex.max() + 1e-12)


def disk_window(shape, center, radius, soft=6.0):
    """Smooth 0..1 disk, 1 inside ``radius - soft`` and 0 beyond ``radius``."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(xx - center[0], yy - center[1])
    t = np.clip((radius - d) / soft, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * t)


def textured_disk(size, seed, radius=None, background=0.5):
    """Square image with a random texture inside a soft-edged central disk."""
    radius = radius or 0.4 * size
    c = (size - 1) / 2.0
    tex = random_texture((size, size), seed)
    win = disk_window((size, size), (c, c), radius)
    return background + win * (tex - background)


def rigid_transform(img, angle_deg, translate=(0.0, 0.0), center=None, fill=None):
    """Rotate ``img`` by ``angle_deg`` about ``center`` then translate (bilinear).

    Positive angles rotate counter-clockwise in the displayed image
    (y axis pointing down). Returns the warped image and a function
    mapping source (x, y) points to their destination.
    """
    h, w = img.shape
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    if fill is None:
        fill = float(np.median(img))
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    cx, cy = center
    tx, ty = translate
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # inverse map: destination -> source
    dx = xx - cx - tx
    dy = yy - cy - ty
    sx = c * dx - s * dy + cx
    sy = s * dx + c * dy + cy
    out, _ = bilinear_sample(img, sx, sy, fill=fill)

    def forward(x, y):
        x = np.asarray(x, dtype=np.float64) - cx
        y = np.asarray(y, dtype=np.float64) - cy
        return c * x + s * y + cx + tx, -s * x + c * y + cy + ty

    return out, forward


def annulus_image(shape, pupil, iris, pupil_level=0.1, iris_level=0.5,
                  background=0.85, noise=0.0, seed=0, texture=None):
    """Dark pupil disk inside a mid-grey iris disk on a light background.

    ``pupil`` and ``iris`` are (cx, cy, r) tuples. ``texture`` (optional)
    is an image of the same shape added inside the iris ring.
    """
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full(shape, background, dtype=np.float64)

    def coverage(circle):
        cx, cy, r = circle
        d = np.hypot(xx - cx, yy - cy)
        return np.clip(r - d + 0.5, 0.0, 1.0)

    iris_cov = coverage(iris)
    pupil_cov = coverage(pupil)
    ring = iris_level if texture is None else iris_level + texture
    img = img * (1 - iris_cov) + ring * iris_cov
    img = img * (1 - pupil_cov) + pupil_level * pupil_cov
    if noise:
        img = img + np.random.default_rng(seed).normal(0.0, noise, shape)
    return np.clip(img, 0.0, 1.0)


def synthetic_eye(eye_seed, sample_seed, shape=(240, 320), pupil_radius=28.0,
                  iris_radius=80.0, max_rotation=4.0, max_shift=4.0,
                  texture_contrast=0.35, noise=0.01):
    """One acquisition of a synthetic eye.

    The iris texture is fixed by ``eye_seed``; ``sample_seed`` draws the
    acquisition nuisances (in-plane rotation, eye position, pupil size,
    sensor noise). Returns ``(image, pupil_circle, iris_circle)``.
    """
    h, w = shape
    rng = np.random.default_rng(sample_seed)
    angle = rng.uniform(-max_rotation, max_rotation)
    cx = (w - 1) / 2.0 + rng.uniform(-max_shift, max_shift)
    cy = (h - 1) / 2.0 + rng.uniform(-max_shift, max_shift)
    rp = pupil_radius * rng.uniform(0.95, 1.05)

    size = int(2 * iris_radius + 9)
    tex = random_texture((size, size), eye_seed, scales=(1.2, 2.5, 5.0)) - 0.5
    tc = (size - 1) / 2.0
    a = math.radians(angle)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    sx = math.cos(a) * dx - math.sin(a) * dy + tc
    sy = math.sin(a) * dx + math.cos(a) * dy + tc
    tex_img, _ = bilinear_sample(tex, sx, sy, fill=0.0)

    pupil = (cx, cy, rp)
    iris = (cx, cy, iris_radius)
    img = annulus_image(shape, pupil, iris, texture=texture_contrast * tex_img,
                        noise=noise, seed=sample_seed)
    return img, pupil, iris

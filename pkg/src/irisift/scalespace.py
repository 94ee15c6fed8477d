"""Gaussian scale space and difference-of-Gaussian pyramid."""
import math
from dataclasses import dataclass, field

import numpy as np

from irisift.errors import BoundsError, ParameterError, SizeError
from irisift.imaging import as_gray, downsample2, gaussian_blur, gradient_field

ASSUMED_INPUT_BLUR = 0.5
MIN_OCTAVE_SIDE = 8


@dataclass(frozen=True)
class SiftParams:
    """Parameters of the SIFT channel.

    ``length_tolerance`` is a ratio (0.14 means 14 %). Use
    :func:`length_tolerance_from_config` to read the integer form.
    ``trim=False`` disables geometric trimming entirely.
    """

    sigma0: float = 1.6
    scales_per_octave: int = 3
    contrast_threshold: float = 0.25 / 255
    edge_threshold: float = 10.0
    ratio_threshold: float = 0.76
    angle_tolerance: float = 18.0
    length_tolerance: float = 0.14
    num_octaves: int | str = "auto"
    trim: bool = True

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ParameterError("sigma0 must be > 0")
        if self.scales_per_octave < 1:
            raise ParameterError("scales_per_octave must be >= 1")
        if self.contrast_threshold < 0:
            raise ParameterError("contrast_threshold must be >= 0")
        if not self.edge_threshold > 1:
            raise ParameterError("edge_threshold must be > 1")
        if not 0 < self.ratio_threshold <= 1:
            raise ParameterError("ratio_threshold must lie in (0, 1]")
        if self.angle_tolerance < 0 or self.length_tolerance < 0:
            raise ParameterError("trimming tolerances must be >= 0")
        if self.num_octaves != "auto" and (not isinstance(self.num_octaves, int) or self.num_octaves < 1):
            raise ParameterError("num_octaves must be 'auto' or a positive integer")

    @property
    def k(self):
        return 2.0 ** (1.0 / self.scales_per_octave)

    def level_sigma(self, level):
        """Scale of ``level`` relative to its own octave."""
        return self.sigma0 * self.k ** level


def length_tolerance_from_config(value, mode="percent"):
    """Map a configured length tolerance onto the ratio used by trimming.

    ``percent`` reads integers as percentages (14 -> 0.14); ``ratio`` takes
    the value literally.
    """
    value = float(value)
    if mode == "percent":
        return value / 100.0
    if mode == "ratio":
        return value
    raise ParameterError(f"unknown length tolerance mode {mode!r}")


@dataclass
class Octave:
    index: int
    gaussians: list
    dogs: list
    _gradients: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self):
        return self.gaussians[0].shape

    def gradients(self, level):
        """(magnitude, orientation) arrays of ``gaussians[level]``, cached."""
        if level not in self._gradients:
            self._gradients[level] = gradient_field(self.gaussians[level])
        return self._gradients[level]


@dataclass
class ScaleSpace:
    params: SiftParams
    octaves: list
    image_shape: tuple

    def absolute_sigma(self, octave, level):
        return self.params.level_sigma(level) * 2.0 ** octave


def auto_octaves(height, width):
    n = int(math.floor(math.log2(min(height, width)))) - 3
    return max(n, 1)


def build_scale_space(img, params=None):
    """Build octaves of ``s + 3`` Gaussian images and ``s + 2`` DoG images.

    The input is assumed to carry a blur of 0.5 and is brought to ``sigma0``
    first. Each level is blurred incrementally from the previous one; each
    new octave starts from the previous octave's level ``s`` decimated by 2.
    """
    params = params or SiftParams()
    img = as_gray(img)
    h, w = img.shape
    if h < 16 or w < 16:
        raise SizeError(f"image must be at least 16x16, got {w}x{h}")
    n_octaves = auto_octaves(h, w) if params.num_octaves == "auto" else params.num_octaves
    s = params.scales_per_octave

    base_blur = math.sqrt(max(params.sigma0 ** 2 - ASSUMED_INPUT_BLUR ** 2, 0.0))
    increments = [
        math.sqrt(params.level_sigma(i + 1) ** 2 - params.level_sigma(i) ** 2)
        for i in range(s + 2)
    ]

    octaves = []
    current = gaussian_blur(img, base_blur) if base_blur > 0 else img.copy()
    for o in range(n_octaves):
        if o > 0:
            prev = octaves[-1].gaussians[s]
            if min(prev.shape) // 2 < MIN_OCTAVE_SIDE:
                break
            current = downsample2(prev)
        gaussians = [current]
        for inc in increments:
            gaussians.append(gaussian_blur(gaussians[-1], inc))
        dogs = [gaussians[i + 1] - gaussians[i] for i in range(s + 2)]
        octaves.append(Octave(index=o, gaussians=gaussians, dogs=dogs))
    return ScaleSpace(params=params, octaves=octaves, image_shape=(h, w))


def dog_value(space, octave, level, x, y):
    """DoG sample ``gaussians[level + 1] - gaussians[level]`` at (x, y)."""
    if not 0 <= octave < len(space.octaves):
        raise BoundsError(f"octave {octave} out of range")
    oct_ = space.octaves[octave]
    if not 0 <= level < len(oct_.dogs):
        raise BoundsError(f"level {level} out of range")
    h, w = oct_.shape
    if not (0 <= x < w and 0 <= y < h):
        raise BoundsError(f"({x}, {y}) outside octave {octave} of size {w}x{h}")
    return float(oct_.gaussians[level + 1][y, x] - oct_.gaussians[level][y, x])

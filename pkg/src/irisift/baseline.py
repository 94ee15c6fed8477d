"""Baseline iris matcher: rubber-sheet unwrapping, 1-D Log-Gabor phase code, Hamming distance."""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from irisift import kernels
from irisift.errors import FormatError, IncomparableCodesError, ParameterError
from irisift.imaging import as_gray, bilinear_sample

RADIAL_RES = 20
ANGULAR_RES = 240
WAVELENGTH = 18.0
SIGMA_ON_F = 0.5
MAX_SHIFT = 8


@dataclass
class NormalizedIris:
    """Unwrapped iris: ``samples[i, j]`` is ring ``i`` (pupil side first) at angle ``j``."""

    samples: np.ndarray
    valid: np.ndarray

    @property
    def radial_res(self):
        return self.samples.shape[0]

    @property
    def angular_res(self):
        return self.samples.shape[1]


@dataclass
class IrisCode:
    """Phase bits and validity mask, both shaped (R, A, 2)."""

    bits: np.ndarray
    mask: np.ndarray

    @property
    def shape(self):
        return self.bits.shape[:2]

    def save(self, path):
        write_iriscode(path, self)

    @classmethod
    def load(cls, path):
        return read_iriscode(path)


def normalize(img, annulus, radial_res=RADIAL_RES, angular_res=ANGULAR_RES):
    """Map the iris ring onto a ``radial_res x angular_res`` rectangle.

    Rays start at the pupil centre. Along each ray the samples run from the
    pupil boundary to where the ray meets the iris circle, which handles a
    pupil that is not concentric with the iris.
    """
    img = as_gray(img)
    h, w = img.shape
    p, i = annulus.pupil, annulus.iris
    theta = 2.0 * np.pi * np.arange(angular_res) / angular_res
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    ox, oy = p.cx - i.cx, p.cy - i.cy
    b = ox * cos_t + oy * sin_t
    outer = -b + np.sqrt(np.maximum(b * b - (ox * ox + oy * oy) + i.radius ** 2, 0.0))
    frac = (np.arange(radial_res) + 0.5) / radial_res
    dist = p.radius + frac[:, None] * (outer[None, :] - p.radius)
    xs = p.cx + dist * cos_t[None, :]
    ys = p.cy + dist * sin_t[None, :]
    samples, valid = bilinear_sample(img, xs, ys, fill=0.0)
    if not valid.any():
        raise ParameterError("annulus lies entirely outside the image")
    return NormalizedIris(samples=samples, valid=valid)


def log_gabor(n, wavelength=WAVELENGTH, sigma_on_f=SIGMA_ON_F):
    """Frequency response over an ``n``-point FFT; zero at DC and negative frequencies."""
    g = np.zeros(n)
    k = np.arange(1, n // 2 + 1)
    f = k / n
    f0 = 1.0 / wavelength
    g[k] = np.exp(-(np.log(f / f0) ** 2) / (2.0 * math.log(sigma_on_f) ** 2))
    return g


def quantize_phase(response):
    """Gray-coded quadrant bits: I=(1,1), II=(0,1), III=(0,0), IV=(1,0)."""
    response = np.asarray(response)
    return np.stack([response.real > 0, response.imag > 0], axis=-1).astype(np.uint8)


def filter_rows(samples, valid, wavelength=WAVELENGTH, sigma_on_f=SIGMA_ON_F):
    """Circular convolution of each ring with the Log-Gabor filter (complex output)."""
    rows = samples.astype(np.float64).copy()
    for r in range(rows.shape[0]):
        ok = valid[r]
        fill = rows[r, ok].mean() if ok.any() else 0.0
        rows[r, ~ok] = fill
    g = log_gabor(rows.shape[1], wavelength, sigma_on_f)
    return np.fft.ifft(np.fft.fft(rows, axis=1) * g[None, :], axis=1)


def encode(norm, wavelength=WAVELENGTH, sigma_on_f=SIGMA_ON_F):
    """Two phase bits per sample plus a mask.

    A ring with more than half of its samples invalid is masked out
    entirely; otherwise each sample keeps its own validity.
    """
    if norm.angular_res < 8:
        raise ParameterError("angular resolution must be at least 8")
    response = filter_rows(norm.samples, norm.valid, wavelength, sigma_on_f)
    bits = quantize_phase(response)
    valid = norm.valid.copy()
    bad_rows = (~valid).mean(axis=1) > 0.5
    valid[bad_rows, :] = False
    mask = np.repeat(valid[:, :, None], 2, axis=2).astype(np.uint8)
    return IrisCode(bits=bits, mask=mask)


def hamming_distances(a, b, max_shift=MAX_SHIFT):
    """Masked Hamming distance for every shift in ``-max_shift..max_shift`` (NaN if no overlap)."""
    if a.bits.shape != b.bits.shape:
        raise ParameterError(f"code shapes differ: {a.bits.shape} vs {b.bits.shape}")
    return kernels.shifted_hamming(a.bits, a.mask, b.bits, b.mask, int(max_shift))


def hamming_match(a, b, max_shift=MAX_SHIFT):
    """Lowest masked Hamming distance over column shifts of ``b``."""
    hd = hamming_distances(a, b, max_shift)
    if np.all(np.isnan(hd)):
        raise IncomparableCodesError("codes share no valid bits at any shift")
    return float(np.nanmin(hd))


def iris_code(img, annulus, radial_res=RADIAL_RES, angular_res=ANGULAR_RES,
              wavelength=WAVELENGTH, sigma_on_f=SIGMA_ON_F):
    return encode(normalize(img, annulus, radial_res, angular_res), wavelength, sigma_on_f)


def _to_hex(bits):
    flat = np.asarray(bits, dtype=np.uint8).ravel()
    return np.packbits(flat).tobytes().hex()[: (flat.size + 3) // 4]


def _from_hex(text, nbits):
    if len(text) != (nbits + 3) // 4:
        raise FormatError(f"expected {(nbits + 3) // 4} hex digits, got {len(text)}")
    padded = text + "0" * (len(text) % 2)
    try:
        raw = np.frombuffer(bytes.fromhex(padded), dtype=np.uint8)
    except ValueError as exc:
        raise FormatError("invalid hex digits") from exc
    return np.unpackbits(raw)[:nbits]


def write_iriscode(path, code):
    r, a = code.shape
    Path(path).write_text(f"# iriscode v1 R={r} A={a}\n{_to_hex(code.bits)}\n{_to_hex(code.mask)}\n")


def read_iriscode(path):
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) != 3 or not lines[0].startswith("# iriscode v1"):
        raise FormatError(f"{path}: not an iriscode v1 file")
    try:
        meta = dict(tok.split("=", 1) for tok in lines[0].split()[3:])
        r, a = int(meta["R"]), int(meta["A"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header") from exc
    n = 2 * r * a
    bits = _from_hex(lines[1], n).reshape(r, a, 2)
    mask = _from_hex(lines[2], n).reshape(r, a, 2)
    if np.any(mask[:, :, 0] != mask[:, :, 1]):
        raise FormatError(f"{path}: mask bit pairs disagree")
    return IrisCode(bits=bits, mask=mask)

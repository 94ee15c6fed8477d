"""NumPy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The two are interchangeable; ``irisift.kernels`` picks one at import time.
"""
import numpy as np


def blur_rows(img, kernel):
    """Correlate every row of ``img`` with an odd-length ``kernel`` (edge clamp)."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    radius = kernel.size // 2
    width = img.shape[1]
    padded = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    out = np.zeros_like(img)
    for k in range(kernel.size):
        out += kernel[k] * padded[:, k:k + width]
    return out


def local_extrema(below, cur, above):
    """Return (y, x) of samples strictly above or below all 26 neighbours.

    Only pixels with a complete 3x3 neighbourhood are examined. Rows are
    emitted in raster order.
    """
    h, w = cur.shape
    if h < 3 or w < 3:
        return np.zeros((0, 2), dtype=np.int64)
    centre = cur[1:-1, 1:-1]
    nmax = np.full(centre.shape, -np.inf)
    nmin = np.full(centre.shape, np.inf)
    for layer, is_cur in ((below, False), (cur, True), (above, False)):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if is_cur and dy == 0 and dx == 0:
                    continue
                win = layer[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
                np.maximum(nmax, win, out=nmax)
                np.minimum(nmin, win, out=nmin)
    hit = (centre > nmax) | (centre < nmin)
    ys, xs = np.nonzero(hit)
    return np.stack([ys + 1, xs + 1], axis=1).astype(np.int64)


def _window(kx, ky, reach, w, h):
    x0 = max(int(np.ceil(kx - reach)), 0)
    x1 = min(int(np.floor(kx + reach)), w - 1)
    y0 = max(int(np.ceil(ky - reach)), 0)
    y1 = min(int(np.floor(ky + reach)), h - 1)
    return x0, x1, y0, y1


def orientation_histogram(mag, ori, kx, ky, sigma_w, half=8.0, nbins=36):
    """Gaussian-weighted histogram of gradient orientations around (kx, ky).

    Samples are the pixels with ``|px - kx| < half`` and ``|py - ky| < half``.
    Bin ``i`` is centred on ``i * 360 / nbins`` degrees.
    """
    h, w = mag.shape
    hist = np.zeros(nbins)
    x0, x1, y0, y1 = _window(kx, ky, half, w, h)
    if x1 < x0 or y1 < y0:
        return hist
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    dx = xs - kx
    dy = ys - ky
    keep = (np.abs(dx) < half) & (np.abs(dy) < half)
    dx, dy = dx[keep], dy[keep]
    m = mag[ys[keep], xs[keep]]
    o = ori[ys[keep], xs[keep]]
    weight = m * np.exp(-(dx * dx + dy * dy) / (2.0 * sigma_w * sigma_w))
    bins = np.floor(o * (nbins / 360.0) + 0.5).astype(np.int64) % nbins
    np.add.at(hist, bins, weight)
    return hist


def descriptor_histogram(mag, ori, kx, ky, angle, half=8.0, window_sigma=8.0):
    """Raw 4x4x8 gradient histogram in the frame rotated by ``angle`` degrees.

    Each sample is spread over its two nearest spatial cells along each axis
    and its two nearest orientation bins (trilinear interpolation).
    Returns 128 unnormalised values, laid out as (row, col, orientation).
    """
    h, w = mag.shape
    raw = np.zeros(4 * 4 * 8)
    theta = np.deg2rad(angle)
    c, s = np.cos(theta), np.sin(theta)
    reach = half * np.sqrt(2.0) + 1.0
    x0, x1, y0, y1 = _window(kx, ky, reach, w, h)
    if x1 < x0 or y1 < y0:
        return raw
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    dx = (xs - kx).ravel()
    dy = (ys - ky).ravel()
    u = c * dx + s * dy
    v = -s * dx + c * dy
    keep = (np.abs(u) < half) & (np.abs(v) < half)
    u, v = u[keep], v[keep]
    m = mag[ys.ravel()[keep], xs.ravel()[keep]]
    o = ori[ys.ravel()[keep], xs.ravel()[keep]]
    weight = m * np.exp(-(u * u + v * v) / (2.0 * window_sigma * window_sigma))

    cell = 2.0 * half / 4.0
    bu = (u + half) / cell - 0.5
    bv = (v + half) / cell - 0.5
    rel = np.mod(o - angle, 360.0)
    bo = rel / 45.0

    iu0 = np.floor(bu).astype(np.int64)
    iv0 = np.floor(bv).astype(np.int64)
    io0 = np.floor(bo).astype(np.int64)
    fu = bu - iu0
    fv = bv - iv0
    fo = bo - io0
    for dv, wv in ((0, 1.0 - fv), (1, fv)):
        iv = iv0 + dv
        for du, wu in ((0, 1.0 - fu), (1, fu)):
            iu = iu0 + du
            ok = (iv >= 0) & (iv < 4) & (iu >= 0) & (iu < 4)
            for do, wo in ((0, 1.0 - fo), (1, fo)):
                io = (io0 + do) % 8
                idx = (iv * 4 + iu) * 8 + io
                np.add.at(raw, idx[ok], (weight * wv * wu * wo)[ok])
    return raw


def hough_accumulate(ys, xs, uy, ux, radius, height, width):
    """Vote for circle centres at distance ``radius`` along +/- each edge normal."""
    acc = np.zeros((height, width), dtype=np.int32)
    for sign in (1.0, -1.0):
        cy = np.floor(ys + sign * radius * uy + 0.5).astype(np.int64)
        cx = np.floor(xs + sign * radius * ux + 0.5).astype(np.int64)
        ok = (cy >= 0) & (cy < height) & (cx >= 0) & (cx < width)
        flat = cy[ok] * width + cx[ok]
        acc += np.bincount(flat, minlength=height * width).astype(np.int32).reshape(height, width)
    return acc


def shifted_hamming(bits_a, mask_a, bits_b, mask_b, max_shift):
    """Masked Hamming distance of ``a`` against ``b`` rotated by each column shift.

    Arrays are (R, A, 2) uint8. Entry ``k`` of the result is the distance at
    shift ``k - max_shift``; NaN where the masks share no valid bit.
    """
    out = np.full(2 * max_shift + 1, np.nan)
    a = bits_a.astype(bool)
    ma = mask_a.astype(bool)
    for k, shift in enumerate(range(-max_shift, max_shift + 1)):
        b = np.roll(bits_b.astype(bool), shift, axis=1)
        mb = np.roll(mask_b.astype(bool), shift, axis=1)
        both = ma & mb
        n = int(np.count_nonzero(both))
        if n:
            out[k] = np.count_nonzero((a ^ b) & both) / n
    return out

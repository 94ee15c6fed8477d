# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``. Same signatures, same results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, cos, exp, floor, fmod, sin, sqrt, M_PI

cnp.import_array()


cdef inline Py_ssize_t _clamp(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


def blur_rows(img, kernel):
    cdef const double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[::1] k = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], n = k.shape[0]
    cdef Py_ssize_t r = n // 2
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, j
    cdef double acc
    with nogil:
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for j in range(n):
                    acc = acc + k[j] * src[y, _clamp(x + j - r, w)]
                out[y, x] = acc
    return out_arr


def local_extrema(below, cur, above):
    cdef const double[:, ::1] b = np.ascontiguousarray(below, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(cur, dtype=np.float64)
    cdef const double[:, ::1] a = np.ascontiguousarray(above, dtype=np.float64)
    cdef Py_ssize_t h = c.shape[0], w = c.shape[1]
    cdef Py_ssize_t y, x, dy, dx
    cdef double v, nb
    cdef bint is_max, is_min
    found = []
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            v = c[y, x]
            is_max = True
            is_min = True
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    nb = b[y + dy, x + dx]
                    if nb >= v:
                        is_max = False
                    if nb <= v:
                        is_min = False
                    nb = a[y + dy, x + dx]
                    if nb >= v:
                        is_max = False
                    if nb <= v:
                        is_min = False
                    if dy != 0 or dx != 0:
                        nb = c[y + dy, x + dx]
                        if nb >= v:
                            is_max = False
                        if nb <= v:
                            is_min = False
                if not is_max and not is_min:
                    break
            if is_max or is_min:
                found.append((y, x))
    if not found:
        return np.zeros((0, 2), dtype=np.int64)
    return np.asarray(found, dtype=np.int64)


def orientation_histogram(mag, ori, double kx, double ky, double sigma_w,
                          double half=8.0, int nbins=36):
    cdef const double[:, ::1] m = np.ascontiguousarray(mag, dtype=np.float64)
    cdef const double[:, ::1] o = np.ascontiguousarray(ori, dtype=np.float64)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    hist_arr = np.zeros(nbins, dtype=np.float64)
    cdef double[::1] hist = hist_arr
    cdef Py_ssize_t x0 = max(<Py_ssize_t>ceil(kx - half), 0)
    cdef Py_ssize_t x1 = min(<Py_ssize_t>floor(kx + half), w - 1)
    cdef Py_ssize_t y0 = max(<Py_ssize_t>ceil(ky - half), 0)
    cdef Py_ssize_t y1 = min(<Py_ssize_t>floor(ky + half), h - 1)
    cdef Py_ssize_t x, y, b
    cdef double dx, dy, wt
    cdef double denom = 2.0 * sigma_w * sigma_w
    for y in range(y0, y1 + 1):
        dy = y - ky
        if not (-half < dy < half):
            continue
        for x in range(x0, x1 + 1):
            dx = x - kx
            if not (-half < dx < half):
                continue
            wt = m[y, x] * exp(-(dx * dx + dy * dy) / denom)
            b = <Py_ssize_t>floor(o[y, x] * (nbins / 360.0) + 0.5) % nbins
            hist[b] += wt
    return hist_arr


def descriptor_histogram(mag, ori, double kx, double ky, double angle,
                         double half=8.0, double window_sigma=8.0):
    cdef const double[:, ::1] m = np.ascontiguousarray(mag, dtype=np.float64)
    cdef const double[:, ::1] o = np.ascontiguousarray(ori, dtype=np.float64)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    raw_arr = np.zeros(128, dtype=np.float64)
    cdef double[::1] raw = raw_arr
    cdef double theta = angle * M_PI / 180.0
    cdef double c = cos(theta), s = sin(theta)
    cdef double reach = half * sqrt(2.0) + 1.0
    cdef Py_ssize_t x0 = max(<Py_ssize_t>ceil(kx - reach), 0)
    cdef Py_ssize_t x1 = min(<Py_ssize_t>floor(kx + reach), w - 1)
    cdef Py_ssize_t y0 = max(<Py_ssize_t>ceil(ky - reach), 0)
    cdef Py_ssize_t y1 = min(<Py_ssize_t>floor(ky + reach), h - 1)
    cdef double cell = 2.0 * half / 4.0
    cdef double denom = 2.0 * window_sigma * window_sigma
    cdef Py_ssize_t x, y, iu0, iv0, io0, iu, iv, io, du, dv, do
    cdef double dx, dy, u, v, wt, bu, bv, bo, fu, fv, fo, rel, wu, wv, wo
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            dx = x - kx
            dy = y - ky
            u = c * dx + s * dy
            v = -s * dx + c * dy
            if not (-half < u < half and -half < v < half):
                continue
            wt = m[y, x] * exp(-(u * u + v * v) / denom)
            bu = (u + half) / cell - 0.5
            bv = (v + half) / cell - 0.5
            rel = fmod(o[y, x] - angle, 360.0)
            if rel < 0:
                rel += 360.0
            bo = rel / 45.0
            iu0 = <Py_ssize_t>floor(bu)
            iv0 = <Py_ssize_t>floor(bv)
            io0 = <Py_ssize_t>floor(bo)
            fu = bu - iu0
            fv = bv - iv0
            fo = bo - io0
            for dv in range(2):
                iv = iv0 + dv
                if iv < 0 or iv >= 4:
                    continue
                wv = fv if dv else 1.0 - fv
                for du in range(2):
                    iu = iu0 + du
                    if iu < 0 or iu >= 4:
                        continue
                    wu = fu if du else 1.0 - fu
                    for do in range(2):
                        io = (io0 + do) % 8
                        wo = fo if do else 1.0 - fo
                        raw[(iv * 4 + iu) * 8 + io] += wt * wv * wu * wo
    return raw_arr


def hough_accumulate(ys, xs, uy, ux, double radius, Py_ssize_t height, Py_ssize_t width):
    cdef const double[::1] py = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const double[::1] px = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] ny = np.ascontiguousarray(uy, dtype=np.float64)
    cdef const double[::1] nx = np.ascontiguousarray(ux, dtype=np.float64)
    acc_arr = np.zeros((height, width), dtype=np.int32)
    cdef int[:, ::1] acc = acc_arr
    cdef Py_ssize_t i, cy, cx, n = py.shape[0]
    cdef double sign
    cdef int k
    with nogil:
        for k in range(2):
            sign = 1.0 if k == 0 else -1.0
            for i in range(n):
                cy = <Py_ssize_t>floor(py[i] + sign * radius * ny[i] + 0.5)
                cx = <Py_ssize_t>floor(px[i] + sign * radius * nx[i] + 0.5)
                if 0 <= cy < height and 0 <= cx < width:
                    acc[cy, cx] += 1
    return acc_arr


def shifted_hamming(bits_a, mask_a, bits_b, mask_b, int max_shift):
    cdef const unsigned char[:, :, ::1] a = np.ascontiguousarray(bits_a, dtype=np.uint8)
    cdef const unsigned char[:, :, ::1] ma = np.ascontiguousarray(mask_a, dtype=np.uint8)
    cdef const unsigned char[:, :, ::1] b = np.ascontiguousarray(bits_b, dtype=np.uint8)
    cdef const unsigned char[:, :, ::1] mb = np.ascontiguousarray(mask_b, dtype=np.uint8)
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    out_arr = np.full(2 * max_shift + 1, np.nan)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, col, src, k, bit
    cdef int shift
    cdef long valid, diff
    with nogil:
        for k in range(2 * max_shift + 1):
            shift = k - max_shift
            valid = 0
            diff = 0
            for r in range(rows):
                for col in range(cols):
                    src = (col - shift) % cols
                    if src < 0:
                        src += cols
                    for bit in range(2):
                        if ma[r, col, bit] and mb[r, src, bit]:
                            valid += 1
                            if (a[r, col, bit] != 0) != (b[r, src, bit] != 0):
                                diff += 1
            if valid > 0:
                out[k] = <double>diff / valid
    return out_arr

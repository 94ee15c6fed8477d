"""Time every numerical kernel under the compiled and the NumPy backend.

    python3 benchmarks/bench_kernels.py [--repeat N]

Inputs are sized like one 640x480 eye image. Each kernel is checked for
agreement between the two backends before it is timed.
"""
import argparse
import timeit

import numpy as np

from irisift import kernels
from irisift.imaging import gaussian_kernel, gradient_field


def workloads(rng):
    img = rng.random((480, 640))
    k = gaussian_kernel(1.6)
    dogs = rng.standard_normal((3, 240, 320))
    mag, ori = gradient_field(rng.random((240, 320)))
    kps = rng.uniform(12, 228, (200, 2))
    n = 30_000
    ys, xs = rng.uniform(0, 480, n), rng.uniform(0, 640, n)
    t = rng.uniform(0, 2 * np.pi, n)
    bits = rng.integers(0, 2, (4, 20, 240, 2), dtype=np.uint8)
    bits[1] = 1
    bits[3] = 1

    def orient(b):
        for x, y in kps:
            b.orientation_histogram(mag, ori, x, y, 3.0)

    def descr(b):
        for x, y in kps:
            b.descriptor_histogram(mag, ori, x, y, 40.0)

    return {
        "blur_rows 480x640 sigma=1.6": lambda b: b.blur_rows(img, k),
        "local_extrema 240x320": lambda b: b.local_extrema(*dogs),
        "orientation_histogram x200": orient,
        "descriptor_histogram x200": descr,
        "hough_accumulate 30k edges": lambda b: b.hough_accumulate(ys, xs, np.sin(t), np.cos(t), 90.0, 480, 640),
        "shifted_hamming 20x240, 17 shifts": lambda b: b.shifted_hamming(bits[0], bits[1], bits[2], bits[3], 8),
    }


def check_agreement(fn, py, cy):
    a, b = fn(py), fn(cy)
    if a is None:
        return True
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=1e-9, equal_nan=True)


def best_time(fn, backend, repeat):
    return min(timeit.repeat(lambda: fn(backend), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    py, cy = kernels.python_backend, kernels.compiled_backend
    if cy is None:
        print("compiled backend unavailable; timing the NumPy backend only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, fn in workloads(rng).items():
        t_py = best_time(fn, py, args.repeat) * 1e3
        if cy is None:
            print(f"{name:<36} {t_py:>10.2f} {'-':>10} {'-':>8}")
            continue
        if not check_agreement(fn, py, cy):
            raise SystemExit(f"backends disagree on {name}")
        t_cy = best_time(fn, cy, args.repeat) * 1e3
        print(f"{name:<36} {t_py:>10.2f} {t_cy:>10.2f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()

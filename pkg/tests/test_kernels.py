"""Both kernel backends must agree with each other and with brute force."""
import numpy as np
import pytest

from irisift import kernels
from irisift.imaging import gaussian_kernel, gradient_field

from oracles import brute_extrema


def test_blur_rows_matches_direct_sum(backend, rng):
    img = rng.random((7, 13))
    k = gaussian_kernel(1.3)
    r = k.size // 2
    expected = np.zeros_like(img)
    for y in range(7):
        for x in range(13):
            expected[y, x] = sum(k[j] * img[y, min(max(x + j - r, 0), 12)] for j in range(k.size))
    np.testing.assert_allclose(backend.blur_rows(img, k), expected, atol=1e-14)


def test_local_extrema_matches_brute_force(backend, rng):
    below, cur, above = rng.random((3, 20, 24))
    got = [tuple(p) for p in backend.local_extrema(below, cur, above)]
    assert got == brute_extrema(below, cur, above)


def test_local_extrema_on_flat_layers_is_empty(backend):
    flat = np.full((10, 10), 0.3)
    assert backend.local_extrema(flat, flat, flat).shape == (0, 2)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
class TestBackendsAgree:
    py = kernels.python_backend
    cy = kernels.compiled_backend

    def test_blur(self, rng):
        img = rng.random((31, 17))
        k = gaussian_kernel(2.2)
        np.testing.assert_allclose(self.py.blur_rows(img, k), self.cy.blur_rows(img, k), atol=1e-14)

    def test_orientation_histogram(self, rng):
        mag, ori = gradient_field(rng.random((40, 40)))
        for kx, ky in [(20.3, 19.7), (9.5, 30.1), (2.0, 2.0)]:
            a = self.py.orientation_histogram(mag, ori, kx, ky, 3.1)
            b = self.cy.orientation_histogram(mag, ori, kx, ky, 3.1)
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_descriptor_histogram(self, rng):
        mag, ori = gradient_field(rng.random((40, 40)))
        for kx, ky, ang in [(20.3, 19.7, 33.0), (12.0, 25.5, 271.4), (3.0, 36.0, 0.0)]:
            a = self.py.descriptor_histogram(mag, ori, kx, ky, ang)
            b = self.cy.descriptor_histogram(mag, ori, kx, ky, ang)
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_hough(self, rng):
        n = 500
        ys, xs = rng.uniform(0, 60, n), rng.uniform(0, 80, n)
        t = rng.uniform(0, 2 * np.pi, n)
        a = self.py.hough_accumulate(ys, xs, np.sin(t), np.cos(t), 17.0, 60, 80)
        b = self.cy.hough_accumulate(ys, xs, np.sin(t), np.cos(t), 17.0, 60, 80)
        np.testing.assert_array_equal(a, b)

    def test_hamming(self, rng):
        bits = rng.integers(0, 2, (4, 20, 30, 2), dtype=np.uint8)
        bits[1] |= bits[3]  # masks with some holes
        a = self.py.shifted_hamming(bits[0], bits[1], bits[2], bits[3], 6)
        b = self.cy.shifted_hamming(bits[0], bits[1], bits[2], bits[3], 6)
        np.testing.assert_allclose(a, b, atol=0)


def test_hamming_no_overlap_is_nan(backend):
    bits = np.ones((2, 8, 2), dtype=np.uint8)
    empty = np.zeros_like(bits)
    assert np.all(np.isnan(backend.shifted_hamming(bits, empty, bits, bits, 2)))


def test_backend_name():
    assert kernels.BACKEND in ("python", "cython")

"""Backend selection for the numerical kernels.

The compiled extension ``irisift._ckernels`` is used when it imports;
otherwise the NumPy versions in ``irisift._pykernels`` are used. Set
``IRISIFT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from irisift import _pykernels

python_backend = _pykernels

compiled_backend = None
if os.environ.get("IRISIFT_PURE_PYTHON") != "1":
    try:
        from irisift import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None and active is compiled_backend else "python"

blur_rows = active.blur_rows
local_extrema = active.local_extrema
orientation_histogram = active.orientation_histogram
descriptor_histogram = active.descriptor_histogram
hough_accumulate = active.hough_accumulate
shifted_hamming = active.shifted_hamming

__all__ = [
    "BACKEND",
    "blur_rows",
    "local_extrema",
    "orientation_histogram",
    "descriptor_histogram",
    "hough_accumulate",
    "shifted_hamming",
]

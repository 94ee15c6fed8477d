"""SIFT keypoint matching for iris verification.

Modules: ``imaging`` (I/O, blur, gradients), ``scalespace`` and
``keypoints`` (SIFT detection and descriptors), ``matching`` (ratio test
and geometric trimming), ``segmentation`` (circular Hough), ``baseline``
(Log-Gabor iris codes), ``fusion`` (protocol, normalisation, EER) and
``harness``/``cli`` (batch runs).
"""
from irisift.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

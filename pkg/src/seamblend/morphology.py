"""Binary erosion/dilation with a square structuring element, and the
erode-then-dilate mask refinement used before blending.

Out-of-image samples count as background for both operations, so masks
touching the border erode away there and never dilate past the frame.
The default refinement (erode 2, dilate 4, radius 1) grows the mask by
a two-pixel margin so the blend region carries a rim of source context.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ValidationError
from .validation import check_mask, check_nonnegative_int

DEFAULT_ERODE_ITERS = 2
DEFAULT_DILATE_ITERS = 4
DEFAULT_RADIUS = 1


def _check_radius(radius: int) -> int:
    if not isinstance(radius, (int, np.integer)) or radius < 1:
        raise ValidationError(f"structuring element radius must be >= 1, got {radius!r}")
    return int(radius)


def _windows(mask: np.ndarray, radius: int) -> np.ndarray:
    side = 2 * radius + 1
    padded = np.pad(mask, radius, mode="constant", constant_values=False)
    return sliding_window_view(padded, (side, side))


def erode(mask: np.ndarray, radius: int = DEFAULT_RADIUS, iterations: int = 1) -> np.ndarray:
    """Erode: a pixel survives iff its whole (2r+1)^2 window is foreground."""
    out = check_mask(mask)
    radius = _check_radius(radius)
    iterations = check_nonnegative_int(iterations, "iterations")
    for _ in range(iterations):
        out = _windows(out, radius).all(axis=(2, 3))
    return out


def dilate(mask: np.ndarray, radius: int = DEFAULT_RADIUS, iterations: int = 1) -> np.ndarray:
    """Dilate: a pixel turns on iff any pixel in its window is foreground."""
    out = check_mask(mask)
    radius = _check_radius(radius)
    iterations = check_nonnegative_int(iterations, "iterations")
    for _ in range(iterations):
        out = _windows(out, radius).any(axis=(2, 3))
    return out


def refine_mask(
    mask: np.ndarray,
    erode_iters: int = DEFAULT_ERODE_ITERS,
    dilate_iters: int = DEFAULT_DILATE_ITERS,
    radius: int = DEFAULT_RADIUS,
) -> np.ndarray:
    """Clean a segmentation mask: erode away thin spurs and specks, then
    dilate further out so the result over-covers the object."""
    return dilate(erode(mask, radius, erode_iters), radius, dilate_iters)


class MaskRefiner(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`refine_mask`.

    Parameters mirror the function arguments; ``transform`` takes a
    single (H, W) boolean mask and returns the refined mask.
    """

    def __init__(self, erode_iters: int = DEFAULT_ERODE_ITERS,
                 dilate_iters: int = DEFAULT_DILATE_ITERS,
                 radius: int = DEFAULT_RADIUS):
        self.erode_iters = erode_iters
        self.dilate_iters = dilate_iters
        self.radius = radius

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        return refine_mask(X, self.erode_iters, self.dilate_iters, self.radius)

"""Input validation helpers, in the spirit of sklearn's check_array.

Images are float arrays of shape (H, W, 3) with channels in [0, 1];
masks are boolean arrays of shape (H, W). Every public entry point
funnels its inputs through these checks so downstream code can assume
well-formed arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def check_image(img, name: str = "image") -> np.ndarray:
    """Validate and return an (H, W, 3) float64 image with channels in [0, 1]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(
            f"{name} must have shape (H, W, 3), got {np.shape(img)}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must have at least one pixel")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError(
            f"{name} channels must lie in [0, 1], got range "
            f"[{arr.min():.4g}, {arr.max():.4g}]"
        )
    return arr


def check_mask(mask, name: str = "mask") -> np.ndarray:
    """Validate and return an (H, W) boolean mask."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must have shape (H, W), got {np.shape(mask)}")
    if arr.dtype != np.bool_:
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError(f"{name} must be boolean or 0/1 valued")
        arr = arr.astype(bool)
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise ValidationError(
            f"{what} must have identical dimensions, got {a.shape} vs {b.shape}"
        )


def check_nonnegative_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or value < 0:
        raise ValidationError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_weights_value(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v < 0.0:
        raise ValidationError(f"{name} must be finite and non-negative, got {value!r}")
    return v

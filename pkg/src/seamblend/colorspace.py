"""RGB to HSV conversion (hexcone model) and the saturation layer.

Only the S channel feeds the optimization; hue and value are exposed
for completeness. Saturation at black pixels is defined as 0 so the
downstream loss stays continuous there.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .validation import check_image


def rgb_to_hsv(r: float, g: float, b: float) -> tuple[float, float, float]:
    """Convert one pixel to (hue degrees in [0, 360), saturation, value).

    Hexcone model: v = max(r, g, b), s = (v - min) / v (0 at black),
    hue from the standard sector formula (0 when achromatic).
    """
    for name, c in (("r", r), ("g", g), ("b", b)):
        if not 0.0 <= c <= 1.0:
            raise ValidationError(f"channel {name}={c} outside [0, 1]")
    v = max(r, g, b)
    mn = min(r, g, b)
    c = v - mn
    s = 0.0 if v == 0.0 else c / v
    if c == 0.0:
        h = 0.0
    elif v == r:
        h = (60.0 * ((g - b) / c)) % 360.0
    elif v == g:
        h = 60.0 * ((b - r) / c) + 120.0
    else:
        h = 60.0 * ((r - g) / c) + 240.0
    return h, s, v


def saturation_layer(img: np.ndarray) -> np.ndarray:
    """Per-pixel hexcone saturation of an (H, W, 3) image, as (H, W) floats."""
    arr = check_image(img)
    v = arr.max(axis=2)
    mn = arr.min(axis=2)
    s = np.zeros_like(v)
    nz = v > 0.0
    s[nz] = (v[nz] - mn[nz]) / v[nz]
    return s


def saturation_with_gradient(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Saturation layer plus its derivative with respect to each channel.

    Returns (s, ds) where s is (H, W) and ds is (H, W, 3) with
    ds[i, j, c] = d s(i, j) / d img[i, j, c]. At channel ties the
    lowest-index channel carries the derivative (argmax/argmin of
    numpy both return the first occurrence), which keeps gradients
    deterministic; on achromatic and black pixels the derivative is 0.
    """
    arr = check_image(img)
    h, w = arr.shape[:2]
    imax = arr.argmax(axis=2)
    imin = arr.argmin(axis=2)
    v = np.take_along_axis(arr, imax[:, :, None], axis=2)[:, :, 0]
    mn = np.take_along_axis(arr, imin[:, :, None], axis=2)[:, :, 0]

    s = np.zeros((h, w))
    nz = v > 0.0
    s[nz] = (v[nz] - mn[nz]) / v[nz]

    # s = 1 - mn/v:  ds/dv = mn/v^2 on the argmax channel, ds/dmn = -1/v
    # on the argmin channel. Both vanish on achromatic pixels (v == mn).
    dv = np.zeros((h, w))
    dmn = np.zeros((h, w))
    dv[nz] = mn[nz] / (v[nz] * v[nz])
    dmn[nz] = -1.0 / v[nz]

    ds = np.zeros_like(arr)
    rows, cols = np.nonzero(nz)
    ds[rows, cols, imax[nz]] += dv[nz]
    ds[rows, cols, imin[nz]] += dmn[nz]
    return s, ds

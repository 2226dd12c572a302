"""Raster types, placement geometry, and PNG-backed load/save.

Images live in memory as (H, W, 3) float64 arrays with channels in
[0, 1]; all math downstream is scale-free and conversion to the 0-255
scale happens only at the metrics boundary. Alpha channels are dropped
on load and grayscale is replicated to three channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UnreadableImageError, UnsupportedFormatError, UnwritableImageError, ValidationError
from .validation import check_image, check_mask

# PIL modes we accept, with the divisor that rescales to [0, 1].
_MODE_SCALE = {
    "L": 255.0,
    "LA": 255.0,
    "RGB": 255.0,
    "RGBA": 255.0,
    "I": 65535.0,
    "I;16": 65535.0,
    "I;16B": 65535.0,
}

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def load_png(path) -> np.ndarray:
    """Load a PNG as an (H, W, 3) float64 image scaled to [0, 1].

    Accepts 8-bit grayscale / gray+alpha / RGB / RGBA and 16-bit
    grayscale PNGs. Alpha is discarded, grayscale replicated across
    channels.
    """
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormatError(f"{path}: not a PNG file (got {im.format})")
            mode = im.mode
            if mode not in _MODE_SCALE:
                raise UnsupportedFormatError(
                    f"{path}: unsupported PNG mode {mode!r} "
                    "(need 8/16-bit grayscale, gray+alpha, RGB, or RGBA)"
                )
            arr = np.asarray(im, dtype=np.float64)
    except UnsupportedFormatError:
        raise
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise UnreadableImageError(f"{path}: unreadable image ({exc})") from exc

    arr = arr / _MODE_SCALE[mode]
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.shape[2] == 2:  # LA: drop alpha, replicate gray
        arr = np.repeat(arr[:, :, :1], 3, axis=2)
    elif arr.shape[2] == 4:  # RGBA: drop alpha
        arr = arr[:, :, :3]
    return check_image(arr, name=str(path))


def save_png(img: np.ndarray, path) -> None:
    """Write an image as 8-bit RGB PNG; channels are clamped then rounded."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"image to save must have shape (H, W, 3), got {arr.shape}")
    data = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    try:
        Image.fromarray(data, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise UnwritableImageError(f"{path}: unwritable ({exc})") from exc


def luma(img: np.ndarray) -> np.ndarray:
    """Per-pixel luma 0.299 R + 0.587 G + 0.114 B, same scale as the input."""
    return np.asarray(img, dtype=np.float64) @ LUMA_WEIGHTS


def load_mask(path, threshold: float = 0.5) -> np.ndarray:
    """Load a PNG and binarize it: pixel is foreground iff luma >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"mask threshold must lie in [0, 1], got {threshold}")
    return luma(load_png(path)) >= threshold


@dataclass(frozen=True)
class Placement:
    """Top-left anchored placement: offset_x is the target column where
    source column 0 lands, offset_y the target row for source row 0."""

    offset_x: int
    offset_y: int

    def __post_init__(self):
        if self.offset_x < 0 or self.offset_y < 0:
            raise ValidationError(
                f"placement offsets must be non-negative, got "
                f"({self.offset_x}, {self.offset_y})"
            )


@dataclass(frozen=True)
class BlendTask:
    """One unit of blending work: source, target, source-sized mask, placement.

    Arrays are validated at construction and treated as immutable
    afterwards; instances are safe to share across threads.
    """

    source: np.ndarray
    target: np.ndarray
    mask: np.ndarray
    placement: Placement

    def __post_init__(self):
        object.__setattr__(self, "source", check_image(self.source, "source"))
        object.__setattr__(self, "target", check_image(self.target, "target"))
        object.__setattr__(self, "mask", check_mask(self.mask, "mask"))
        sh, sw = self.source.shape[:2]
        if self.mask.shape != (sh, sw):
            raise ValidationError(
                f"mask dimensions {self.mask.shape} must equal source "
                f"dimensions {(sh, sw)}"
            )
        th, tw = self.target.shape[:2]
        if self.placement.offset_x + sw > tw or self.placement.offset_y + sh > th:
            raise ValidationError(
                f"placement ({self.placement.offset_x}, {self.placement.offset_y}) "
                f"puts the {sh}x{sw} source outside the {th}x{tw} target"
            )

    @property
    def window(self) -> tuple[slice, slice]:
        """Row/column slices of the target covered by the placed source."""
        sh, sw = self.source.shape[:2]
        return (
            slice(self.placement.offset_y, self.placement.offset_y + sh),
            slice(self.placement.offset_x, self.placement.offset_x + sw),
        )


def placed_mask(task: BlendTask, mask: np.ndarray | None = None) -> np.ndarray:
    """Embed a source-sized mask into target coordinates (False outside)."""
    m = task.mask if mask is None else check_mask(mask)
    if m.shape != task.mask.shape:
        raise ValidationError(
            f"mask dimensions {m.shape} must equal source dimensions {task.mask.shape}"
        )
    out = np.zeros(task.target.shape[:2], dtype=bool)
    out[task.window] = m
    return out


def paste_block(target: np.ndarray, block: np.ndarray, window: tuple[slice, slice],
                mask: np.ndarray) -> np.ndarray:
    """Return a copy of target with block written under mask inside window.

    Pixels where the mask is False stay bit-identical to the target.
    """
    out = target.copy()
    region = out[window]
    out[window] = np.where(mask[:, :, None], block, region)
    return out


def composite_copy_paste(task: BlendTask, mask: np.ndarray | None = None) -> np.ndarray:
    """Naive baseline: copy masked source pixels onto the target.

    An alternative source-sized mask may be supplied (e.g. a refined
    one); by default the task's own mask is used.
    """
    m = task.mask if mask is None else check_mask(mask)
    if m.shape != task.mask.shape:
        raise ValidationError(
            f"mask dimensions {m.shape} must equal source dimensions {task.mask.shape}"
        )
    return paste_block(task.target, task.source, task.window, m)

"""Image quality metrics (MSE, PSNR, SSIM, IoU) and the report record.

Internally images use the [0, 1] scale; these metrics convert to the
0-255 scale at this boundary so the usual PSNR/SSIM constants apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import ImageTooSmallError, ValidationError
from .image import luma
from .losses import LossBreakdown
from .validation import check_image, check_mask, check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error on the 0-255 scale, over all pixels and channels."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    check_same_shape(a, b)
    diff = DYNAMIC_RANGE * (a - b)
    return float(np.mean(diff * diff))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE * DYNAMIC_RANGE / err)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords * coords) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity on luma with the standard 11x11 Gaussian window.

    Windows are evaluated only at fully valid positions (no padding) and
    the score is their mean. Requires images of at least 11x11.
    """
    a = check_image(a, "a")
    b = check_image(b, "b")
    check_same_shape(a, b)
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {a.shape[:2]}"
        )
    x = luma(a) * DYNAMIC_RANGE
    y = luma(b) * DYNAMIC_RANGE
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    var_x = convolve2d(x * x, w, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, w, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, w, mode="valid") - mu_x * mu_y

    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    score = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(score.mean())


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two masks; 1.0 when both are empty."""
    a = check_mask(a, "a")
    b = check_mask(b, "b")
    check_same_shape(a, b, "masks")
    union = int(np.sum(a | b))
    if union == 0:
        return 1.0
    return int(np.sum(a & b)) / union


@dataclass
class MetricReport:
    """Everything a run reports: quality metrics, loss endpoints, timing."""

    psnr_db: float
    ssim: float
    mse: float
    l_sat_raw: float
    l_sat_hinged: float
    iou: float | None = None
    stage1_final_loss: LossBreakdown | None = None
    stage2_final_loss: LossBreakdown | None = None
    wall_times: dict | None = None
    iterations: dict | None = None
    reference: str | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        """JSON-ready dict; infinities encode as the string "inf"."""

        def num(v):
            if v is None:
                return None
            if math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return float(v)

        def breakdown(bd):
            if bd is None:
                return None
            return {"total": num(bd.total), "grad": num(bd.grad), "style": num(bd.style),
                    "content": num(bd.content), "sat": num(bd.sat)}

        return {
            "psnr_db": num(self.psnr_db),
            "ssim": num(self.ssim),
            "mse": num(self.mse),
            "l_sat_raw": num(self.l_sat_raw),
            "l_sat_hinged": num(self.l_sat_hinged),
            "iou": num(self.iou),
            "stage1_final_loss": breakdown(self.stage1_final_loss),
            "stage2_final_loss": breakdown(self.stage2_final_loss),
            "wall_times": self.wall_times,
            "iterations": self.iterations,
            "reference": self.reference,
            "flags": list(self.flags),
        }


def compare_images(image: np.ndarray, reference: np.ndarray) -> tuple[float, float, float]:
    """Convenience bundle: (psnr_db, ssim, mse) of image vs reference."""
    if np.shape(image)[:2] != np.shape(reference)[:2]:
        raise ValidationError(
            f"image {np.shape(image)} and reference {np.shape(reference)} dims differ"
        )
    return psnr(image, reference), ssim(image, reference), mse(image, reference)

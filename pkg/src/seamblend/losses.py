"""Loss terms driving the two-stage blend, with analytic gradients.

All gradients are taken with respect to the full blended composite and
returned as target-sized (H, W, 3) arrays; the optimizer restricts them
to the pixels it actually moves. Each term reports its raw (unweighted)
value; weighting happens once in :func:`total_loss`.

The style term matches first and second color moments (channel means
and 3x3 covariances) of the blended region against the whole target,
standing in for feature-space statistics while staying dependency-free
and exactly differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorspace import saturation_layer, saturation_with_gradient
from .errors import DivergedError, ImageTooSmallError, ValidationError
from .image import BlendTask, Placement
from .poisson import laplacian
from .validation import check_weights_value

STAGE1_DEFAULT_WEIGHTS = (1e4, 1e3, 1.0, 0.0)
STAGE2_DEFAULT_WEIGHTS = (0.0, 1e5, 1.0, 1e5)


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for the gradient/style/content/saturation terms."""

    w_grad: float
    w_style: float
    w_content: float
    w_sat: float

    def __post_init__(self):
        for name in ("w_grad", "w_style", "w_content", "w_sat"):
            object.__setattr__(self, name, check_weights_value(getattr(self, name), name))

    @classmethod
    def stage1_defaults(cls) -> "LossWeights":
        return cls(*STAGE1_DEFAULT_WEIGHTS)

    @classmethod
    def stage2_defaults(cls) -> "LossWeights":
        return cls(*STAGE2_DEFAULT_WEIGHTS)


@dataclass(frozen=True)
class LossBreakdown:
    """Raw per-term values plus their weighted sum.

    ``total`` is built as the exact expression
    ``w_grad*grad + w_style*style + w_content*content + w_sat*sat``.
    """

    total: float
    grad: float
    style: float
    content: float
    sat: float


def gradient_loss(blend: np.ndarray, guidance: np.ndarray,
                  region: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared Laplacian mismatch over the region pixels.

    The stencil with replicate padding is self-adjoint, so the gradient
    is the stencil applied to the masked residual (scaled by 2/n).
    """
    if blend.shape != guidance.shape:
        raise ValidationError(
            f"blend {blend.shape} and guidance {guidance.shape} dims differ"
        )
    n = 3 * int(region.sum())
    if n == 0:
        return 0.0, np.zeros_like(blend)
    residual = np.where(region[:, :, None], laplacian(blend) - guidance, 0.0)
    value = float(np.sum(residual * residual)) / n
    grad = (2.0 / n) * laplacian(residual)
    return value, grad


def content_loss(blend: np.ndarray, anchor: np.ndarray, mask: np.ndarray,
                 placement: Placement) -> tuple[float, np.ndarray]:
    """Mean squared deviation from the anchor over masked source pixels.

    The anchor is source-sized (the source image in stage 1, the stage-1
    output block in stage 2). An empty mask yields value 0 and a zero
    gradient.
    """
    sh, sw = anchor.shape[:2]
    if mask.shape != (sh, sw):
        raise ValidationError(f"mask {mask.shape} must match anchor dims {(sh, sw)}")
    n = 3 * int(mask.sum())
    grad = np.zeros_like(blend)
    if n == 0:
        return 0.0, grad
    window = (slice(placement.offset_y, placement.offset_y + sh),
              slice(placement.offset_x, placement.offset_x + sw))
    diff = np.where(mask[:, :, None], blend[window] - anchor, 0.0)
    value = float(np.sum(diff * diff)) / n
    grad[window] = (2.0 / n) * diff
    return value, grad


def style_stats_loss(blend: np.ndarray, target: np.ndarray,
                     region: np.ndarray) -> tuple[float, np.ndarray]:
    """Color-statistics mismatch between the blended region and the target.

    value = |mu_R - mu_T|^2 + |C_R - C_T|_F^2 with population (divisor N)
    covariances; target statistics run over the whole target image. A
    single-pixel region has zero covariance by construction.
    """
    grad = np.zeros_like(blend)
    if not region.any():
        return 0.0, grad
    pixels = blend[region]
    n = pixels.shape[0]
    mu = pixels.mean(axis=0)
    centered = pixels - mu
    cov = centered.T @ centered / n

    flat_t = target.reshape(-1, 3)
    mu_t = flat_t.mean(axis=0)
    centered_t = flat_t - mu_t
    cov_t = centered_t.T @ centered_t / flat_t.shape[0]

    dmu = mu - mu_t
    dcov = cov - cov_t
    value = float(dmu @ dmu) + float(np.sum(dcov * dcov))
    # d value / d pixel = (2/n) dmu + (4/n) dcov (x - mu)   [dcov symmetric]
    grad[region] = (2.0 / n) * dmu + (4.0 / n) * (centered @ dcov)
    return value, grad


def saturation_mutation(s: np.ndarray) -> float:
    """Anisotropic total variation of a saturation map: the summed absolute
    differences between each pixel and its down and right neighbors."""
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ImageTooSmallError(
            f"saturation map too small for mutation statistic: {arr.shape} (need >= 2x2)"
        )
    return float(np.sum(np.abs(np.diff(arr, axis=0)))
                 + np.sum(np.abs(np.diff(arr, axis=1))))


def _mutation_subgradient(s: np.ndarray) -> np.ndarray:
    """d saturation_mutation / d s, with 0 at exact ties."""
    grad = np.zeros_like(s)
    sign_v = np.sign(np.diff(s, axis=0))
    grad[1:, :] += sign_v
    grad[:-1, :] -= sign_v
    sign_h = np.sign(np.diff(s, axis=1))
    grad[:, 1:] += sign_h
    grad[:, :-1] -= sign_h
    return grad


def saturation_excess(blend: np.ndarray, original: np.ndarray) -> float:
    """Signed, normalized excess of the blend's saturation mutation over the
    original's: (M_blend - M_original) / (H*W)."""
    if blend.shape != original.shape:
        raise ValidationError(
            f"blend {blend.shape} and original {original.shape} dims differ"
        )
    h, w = blend.shape[:2]
    return (saturation_mutation(saturation_layer(blend))
            - saturation_mutation(saturation_layer(original))) / (h * w)


def saturation_loss(blend: np.ndarray, original: np.ndarray) -> tuple[float, np.ndarray]:
    """Hinged saturation-mutation excess of the blend over the original.

    Only excess mutation is penalized: the value is max(0, excess) and
    the gradient is zero once the blend mutates no more than the
    original. The gradient chains the TV subgradient through the
    hexcone saturation derivative.
    """
    if blend.shape != original.shape:
        raise ValidationError(
            f"blend {blend.shape} and original {original.shape} dims differ"
        )
    h, w = blend.shape[:2]
    s_blend, ds = saturation_with_gradient(blend)
    raw = (saturation_mutation(s_blend)
           - saturation_mutation(saturation_layer(original))) / (h * w)
    if raw <= 0.0:
        return 0.0, np.zeros_like(blend)
    grad = (_mutation_subgradient(s_blend) / (h * w))[:, :, None] * ds
    return raw, grad


def total_loss(
    blend: np.ndarray,
    weights: LossWeights,
    *,
    guidance: np.ndarray | None = None,
    region: np.ndarray | None = None,
    content_anchor: np.ndarray | None = None,
    content_mask: np.ndarray | None = None,
    placement: Placement | None = None,
    style_target: np.ndarray | None = None,
    sat_reference: np.ndarray | None = None,
) -> tuple[LossBreakdown, np.ndarray]:
    """Weighted combination of the active loss terms and their gradients.

    Terms with zero weight are skipped entirely and report 0. Each
    computed term is checked for finiteness; a NaN/Inf aborts with a
    DivergedError naming the term.
    """
    grad_total = np.zeros_like(blend)
    values = {"grad": 0.0, "style": 0.0, "content": 0.0, "sat": 0.0}

    def accumulate(name: str, weight: float, value: float, grad: np.ndarray):
        if not np.isfinite(value):
            raise DivergedError(name)
        values[name] = value
        np.add(grad_total, weight * grad, out=grad_total)

    if weights.w_grad > 0.0:
        v, g = gradient_loss(blend, _require(guidance, "guidance"), region)
        accumulate("grad", weights.w_grad, v, g)
    if weights.w_style > 0.0:
        v, g = style_stats_loss(blend, _require(style_target, "style target"), region)
        accumulate("style", weights.w_style, v, g)
    if weights.w_content > 0.0:
        v, g = content_loss(blend, content_anchor, content_mask, placement)
        accumulate("content", weights.w_content, v, g)
    if weights.w_sat > 0.0:
        v, g = saturation_loss(blend, _require(sat_reference, "original"))
        accumulate("sat", weights.w_sat, v, g)

    total = (weights.w_grad * values["grad"] + weights.w_style * values["style"]
             + weights.w_content * values["content"] + weights.w_sat * values["sat"])
    if not np.isfinite(total):
        raise DivergedError("total")
    breakdown = LossBreakdown(total=total, grad=values["grad"], style=values["style"],
                              content=values["content"], sat=values["sat"])
    return breakdown, grad_total


def _require(value, name):
    if value is None:
        raise ValidationError(f"{name} image is required for this loss term")
    return value

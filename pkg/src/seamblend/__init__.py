"""seamblend: gradient-domain image blending with mask refinement,
saturation-aware two-stage optimization, a Poisson seamless-clone
baseline, and an image-quality metrics suite."""

from .errors import (
    DivergedError,
    ImageTooSmallError,
    SeamblendError,
    SolverDidNotConvergeError,
    UnreadableImageError,
    UnsupportedFormatError,
    UnwritableImageError,
    ValidationError,
)
from .image import (
    BlendTask,
    Placement,
    composite_copy_paste,
    load_mask,
    load_png,
    luma,
    placed_mask,
    save_png,
)
from .colorspace import rgb_to_hsv, saturation_layer
from .morphology import MaskRefiner, dilate, erode, refine_mask
from .poisson import PoissonBlender, guidance_field, laplacian, poisson_blend
from .losses import (
    LossBreakdown,
    LossWeights,
    content_loss,
    gradient_loss,
    saturation_excess,
    saturation_loss,
    saturation_mutation,
    style_stats_loss,
    total_loss,
)
from .optimizer import (
    BlendRun,
    StageConfig,
    TwoStageBlender,
    blend,
    run_stage1,
    run_stage2,
)
from .metrics import MetricReport, iou, mse, psnr, ssim

__version__ = "0.1.0"

__all__ = [
    "BlendRun",
    "BlendTask",
    "DivergedError",
    "ImageTooSmallError",
    "LossBreakdown",
    "LossWeights",
    "MaskRefiner",
    "MetricReport",
    "Placement",
    "PoissonBlender",
    "SeamblendError",
    "SolverDidNotConvergeError",
    "StageConfig",
    "TwoStageBlender",
    "UnreadableImageError",
    "UnsupportedFormatError",
    "UnwritableImageError",
    "ValidationError",
    "blend",
    "composite_copy_paste",
    "content_loss",
    "dilate",
    "erode",
    "gradient_loss",
    "guidance_field",
    "iou",
    "laplacian",
    "load_mask",
    "load_png",
    "luma",
    "mse",
    "placed_mask",
    "poisson_blend",
    "psnr",
    "refine_mask",
    "rgb_to_hsv",
    "run_stage1",
    "run_stage2",
    "saturation_excess",
    "saturation_layer",
    "saturation_loss",
    "saturation_mutation",
    "save_png",
    "ssim",
    "style_stats_loss",
    "total_loss",
    "__version__",
]

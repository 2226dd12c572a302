"""Discrete Poisson seamless cloning and the guidance Laplacian field.

The blend solves, per channel, the Dirichlet problem

    4 x(p) - sum_{q in N(p)} x(q) = g(p)    for masked pixels p,

with target pixels as boundary values and g the guidance field (source
Laplacian inside the placed mask, target Laplacian outside). The
5-point stencil uses replicate padding at image borders, which makes
constant images harmonic everywhere and keeps the operator symmetric.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ImageTooSmallError, SolverDidNotConvergeError
from .image import BlendTask, placed_mask
from .morphology import DEFAULT_DILATE_ITERS, DEFAULT_ERODE_ITERS, DEFAULT_RADIUS, refine_mask
from .validation import check_mask

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 10000

_NEIGHBOR_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def laplacian(img: np.ndarray) -> np.ndarray:
    """5-point Laplacian 4*I(p) - neighbors, replicate-padded at borders.

    Works on (H, W) or (H, W, C) arrays; requires both spatial dims >= 3.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise ImageTooSmallError(
            f"image too small for the Laplacian stencil: {arr.shape[:2]} (need >= 3x3)"
        )
    padded = np.pad(arr, ((1, 1), (1, 1)) + ((0, 0),) * (arr.ndim - 2), mode="edge")
    return (
        4.0 * arr
        - padded[:-2, 1:-1]
        - padded[2:, 1:-1]
        - padded[1:-1, :-2]
        - padded[1:-1, 2:]
    )


def guidance_field(task: BlendTask, refined_mask: np.ndarray) -> np.ndarray:
    """Target-sized Laplacian field: source values under the placed mask,
    target values everywhere else."""
    mask = check_mask(refined_mask, "refined_mask")
    field = laplacian(task.target)
    src_lap = laplacian(task.source)
    window = field[task.window]
    field[task.window] = np.where(mask[:, :, None], src_lap, window)
    return field


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    # np.sum's fixed-order pairwise reduction keeps results identical
    # regardless of BLAS thread count.
    return float(np.sum(a * b))


def _conjugate_gradient(A: sparse.csr_matrix, b: np.ndarray, x0: np.ndarray,
                        tol: float, max_iters: int) -> np.ndarray:
    x = x0.copy()
    r = b - A @ x
    b_norm = np.sqrt(_dot(b, b))
    if b_norm == 0.0:
        b_norm = 1.0
    d = r.copy()
    rs = _dot(r, r)
    for _ in range(max_iters):
        if np.sqrt(rs) <= tol * b_norm:
            return x
        Ad = A @ d
        alpha = rs / _dot(d, Ad)
        x = x + alpha * d
        r = r - alpha * Ad
        rs_new = _dot(r, r)
        d = r + (rs_new / rs) * d
        rs = rs_new
    if np.sqrt(rs) <= tol * b_norm:
        return x
    raise SolverDidNotConvergeError(np.sqrt(rs) / b_norm, max_iters)


def _assemble_system(region: np.ndarray, target: np.ndarray, guidance: np.ndarray):
    """Build the SPD interior system for the masked pixels of the target.

    Returns (A, b) with b of shape (n, 3). Neighbors outside the image
    fold into the diagonal (replicate padding); unmasked neighbors
    contribute their target value to the right-hand side.
    """
    h, w = region.shape
    ys, xs = np.nonzero(region)
    n = ys.size
    index = -np.ones((h, w), dtype=np.int64)
    index[ys, xs] = np.arange(n)

    diag = np.full(n, 4.0)
    rows, cols = [], []
    b = guidance[ys, xs, :].copy()
    for dy, dx in _NEIGHBOR_STEPS:
        ny, nx = ys + dy, xs + dx
        inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        # replicate padding: a missing neighbor is the pixel itself
        diag[~inside] -= 1.0
        ni, nj = ny[inside], nx[inside]
        neighbor_idx = index[ni, nj]
        coupled = neighbor_idx >= 0
        rows.append(np.nonzero(inside)[0][coupled])
        cols.append(neighbor_idx[coupled])
        boundary = ~coupled
        b[np.nonzero(inside)[0][boundary]] += target[ni[boundary], nj[boundary], :]

    rows = np.concatenate(rows + [np.arange(n)])
    cols = np.concatenate(cols + [np.arange(n)])
    vals = np.concatenate([-np.ones(rows.size - n), diag])
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return A, b


def poisson_blend(
    task: BlendTask,
    refined_mask: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> np.ndarray:
    """Seamless clone: target outside the placed mask, Dirichlet solution inside.

    Channels solve independently by unpreconditioned conjugate gradient
    to relative residual <= tol; the result is clamped to [0, 1].
    Raises SolverDidNotConvergeError after max_iters.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    region = placed_mask(task, refined_mask)
    if not region.any():
        return task.target.copy()
    guidance = guidance_field(task, refined_mask)
    A, b = _assemble_system(region, task.target, guidance)
    ys, xs = np.nonzero(region)
    out = task.target.copy()
    for c in range(3):
        x0 = task.target[ys, xs, c]
        out[ys, xs, c] = _conjugate_gradient(A, b[:, c], x0, tol, max_iters)
    np.clip(out, 0.0, 1.0, out=out)
    # restore bit-identical target pixels outside the mask (clip copies stay exact)
    out[~region] = task.target[~region]
    return out


class PoissonBlender(TransformerMixin, BaseEstimator):
    """Seamless-clone transformer: ``transform(task)`` returns the blend.

    When ``refine`` is true the task mask is first cleaned with the
    standard erode/dilate refinement; the refined mask is kept on the
    instance as ``refined_mask_``.
    """

    def __init__(self, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                 refine: bool = True, erode_iters: int = DEFAULT_ERODE_ITERS,
                 dilate_iters: int = DEFAULT_DILATE_ITERS, radius: int = DEFAULT_RADIUS):
        self.tol = tol
        self.max_iters = max_iters
        self.refine = refine
        self.erode_iters = erode_iters
        self.dilate_iters = dilate_iters
        self.radius = radius

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: BlendTask) -> np.ndarray:
        mask = X.mask
        if self.refine:
            mask = refine_mask(mask, self.erode_iters, self.dilate_iters, self.radius)
        self.refined_mask_ = mask
        return poisson_blend(X, mask, tol=self.tol, max_iters=self.max_iters)

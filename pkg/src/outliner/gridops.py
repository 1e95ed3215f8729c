"""Operations on dense float32 grids (shape ``(height, width)``, indexed
``grid[y, x]``): truncated Gaussian smoothing, max-rescaling and argmax
selection with a fixed tie rule."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geometry import PixelPoint


class BadKernel(Exception):
    """Kernel parameters that cannot form a valid smoothing window."""


def new_grid(width: int, height: int) -> np.ndarray:
    return np.zeros((height, width), dtype=np.float32)


def gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    """Square ``window x window`` kernel of exp(-(dx^2+dy^2)/(2 sigma^2))
    weights rescaled to unit sum (float64)."""
    if window < 1 or window % 2 == 0:
        raise BadKernel(f"window must be a positive odd integer, got {window}")
    if sigma <= 0:
        raise BadKernel(f"sigma must be positive, got {sigma}")
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    dx2 = offsets[None, :] ** 2
    dy2 = offsets[:, None] ** 2
    kernel = np.exp(-(dx2 + dy2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def truncated_gaussian_blur(grid: np.ndarray, window: int = 9, sigma: float = 2.0) -> np.ndarray:
    """Convolve with the unit-sum truncated Gaussian kernel, zero padding at
    the borders.  Returns a new float32 grid of the same shape."""
    kernel = gaussian_kernel(window, sigma)
    out = ndimage.convolve(grid.astype(np.float64), kernel, mode="constant", cval=0.0)
    return out.astype(np.float32)


def scale_to_unit(grid: np.ndarray) -> np.ndarray:
    """Divide by the grid maximum so the new maximum is exactly 1.0.

    Grids with a non-positive maximum (including the all-zero grid) are
    returned unchanged.  Applying the operation twice equals applying it once.
    """
    m = float(grid.max())
    if m <= 0.0:
        return grid.copy()
    return (grid / np.float32(m)).astype(np.float32, copy=False)


def global_argmax(grid: np.ndarray) -> PixelPoint:
    """Position of the maximum value; ties resolve to the smallest row, then
    the smallest column."""
    idx = int(np.argmax(grid))
    h, w = grid.shape
    y, x = divmod(idx, w)
    return PixelPoint(x, y)


def neighborhood_argmax(grid: np.ndarray, center: PixelPoint, radius: float = 50.0) -> PixelPoint:
    """Argmax restricted to pixels within Euclidean ``radius`` of ``center``,
    with the same tie rule as :func:`global_argmax`."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    h, w = grid.shape
    if not (0 <= center.x < w and 0 <= center.y < h):
        raise ValueError(f"center ({center.x},{center.y}) outside grid")
    yy, xx = np.ogrid[0:h, 0:w]
    dist2 = (xx - center.x) ** 2 + (yy - center.y) ** 2
    masked = np.where(dist2 <= radius * radius, grid.astype(np.float64), -np.inf)
    idx = int(np.argmax(masked))
    y, x = divmod(idx, w)
    return PixelPoint(x, y)

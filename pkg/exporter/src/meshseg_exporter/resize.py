"""Bilinear resampling of per-pixel feature grids."""

import numpy as np


def bilinear_resize(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resample a (gh, gw, c) grid to (height, width, c) bilinearly.

    Sample positions use half-pixel centers, so corner texels map to corner
    pixel blocks rather than being pinned to image corners.  Coordinates
    outside the grid clamp to the border texel.

    Parameters
    ----------
    grid : ndarray, shape (gh, gw, c)
        Source feature grid.
    height, width : int
        Target resolution in pixels.

    Returns
    -------
    ndarray, shape (height, width, c)
        Resampled grid with the dtype of the input promoted to float.
    """
    grid = np.asarray(grid)
    if grid.ndim != 3:
        raise ValueError(f"expected (gh, gw, c) grid, got shape {grid.shape}")
    if height < 1 or width < 1:
        raise ValueError("target resolution must be positive")
    gh, gw, _ = grid.shape

    ys = (np.arange(height) + 0.5) * (gh / height) - 0.5
    xs = (np.arange(width) + 0.5) * (gw / width) - 0.5
    y0 = np.clip(np.floor(ys), 0, gh - 1).astype(np.intp)
    x0 = np.clip(np.floor(xs), 0, gw - 1).astype(np.intp)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]

    top = grid[y0[:, None], x0[None, :]] * (1.0 - wx) + grid[y0[:, None], x1[None, :]] * wx
    bot = grid[y1[:, None], x0[None, :]] * (1.0 - wx) + grid[y1[:, None], x1[None, :]] * wx
    return top * (1.0 - wy) + bot * wy

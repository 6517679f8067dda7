"""Dense-tensor primitives shared by the segmentation and tracking branches.

Conventions used throughout the package:

- feature map: float64 array of shape (H, W, C), row-major
- score map:   float64 array of shape (H, W)
- binary mask: array of shape (H, W) with values exactly 0 or 1
- kernel:      float64 array of shape (K, K, C_in, C_out), K odd

All convolutions are cross-correlations with zero same-padding, so outputs
keep the input's spatial size and stacked memory samples of one resolution
stay shape-compatible. Everything is computed in float64; the solvers need
headroom below their 1e-5 verification tolerances.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "ParameterError",
    "EmptyInputError",
    "conv2d",
    "conv2d_transpose",
    "kernel_gradient",
    "gaussian_label",
    "connected_components",
    "min_bounding_rect",
    "median_filter_1d",
    "extract_square_crop",
    "bilinear_resize",
    "nearest_resize",
]


class DimensionError(ValueError):
    """Operands have incompatible shapes or channel counts."""


class ParameterError(ValueError):
    """A numeric parameter is outside its valid range."""


class EmptyInputError(ValueError):
    """An operation that needs a non-empty input received an empty one."""


def _check_kernel(k: np.ndarray) -> None:
    if k.ndim != 4 or k.shape[0] != k.shape[1]:
        raise DimensionError(f"kernel must be (K, K, C_in, C_out), got {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ParameterError(f"kernel size must be odd, got {k.shape[0]}")


def conv2d(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Cross-correlate a (H, W, C) map with a (K, K, C, D) kernel.

    Zero same-padding: out[i, j, d] = sum over (dy, dx, c) of
    x[i + dy - K//2, j + dx - K//2, c] * k[dy, dx, c, d], out-of-range
    input treated as zero. Linear in both arguments.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_kernel(k)
    if x.ndim != 3:
        raise DimensionError(f"feature map must be (H, W, C), got {x.shape}")
    if x.shape[2] != k.shape[2]:
        raise DimensionError(
            f"feature channels {x.shape[2]} do not match kernel input channels {k.shape[2]}"
        )
    ksz = k.shape[0]
    r = ksz // 2
    h, w = x.shape[:2]
    xp = np.pad(x, ((r, r), (r, r), (0, 0)))
    out = np.zeros((h, w, k.shape[3]))
    for dy in range(ksz):
        for dx in range(ksz):
            out += xp[dy : dy + h, dx : dx + w, :] @ k[dy, dx]
    return out


def conv2d_transpose(y: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`conv2d` in its map argument.

    For all a, b, k: <conv2d(a, k), b> == <a, conv2d_transpose(b, k)>.
    Maps a (H, W, C_out) array back to (H, W, C_in).
    """
    y = np.asarray(y, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_kernel(k)
    if y.ndim != 3:
        raise DimensionError(f"feature map must be (H, W, C), got {y.shape}")
    if y.shape[2] != k.shape[3]:
        raise DimensionError(
            f"map channels {y.shape[2]} do not match kernel output channels {k.shape[3]}"
        )
    ksz = k.shape[0]
    r = ksz // 2
    h, w = y.shape[:2]
    yp = np.pad(y, ((r, r), (r, r), (0, 0)))
    out = np.zeros((h, w, k.shape[2]))
    for dy in range(ksz):
        for dx in range(ksz):
            out += yp[ksz - 1 - dy : ksz - 1 - dy + h, ksz - 1 - dx : ksz - 1 - dx + w, :] @ k[dy, dx].T
    return out


def kernel_gradient(x: np.ndarray, residual: np.ndarray, kernel_shape: Sequence[int]) -> np.ndarray:
    """Adjoint of :func:`conv2d` in its kernel argument.

    Returns d/dk [.5 * ||conv2d(x, k) - y||^2] evaluated at a given
    residual conv2d(x, k) - y:

        g[dy, dx, c, d] = sum over (i, j) of
            x[i + dy - K//2, j + dx - K//2, c] * residual[i, j, d]
    """
    x = np.asarray(x, dtype=np.float64)
    residual = np.asarray(residual, dtype=np.float64)
    ksz, ksz2, c_in, c_out = kernel_shape
    if ksz != ksz2:
        raise DimensionError(f"kernel must be square, got shape {tuple(kernel_shape)}")
    if ksz % 2 == 0:
        raise ParameterError(f"kernel size must be odd, got {ksz}")
    if x.ndim != 3 or residual.ndim != 3:
        raise DimensionError("feature map and residual must be (H, W, C)")
    if x.shape[:2] != residual.shape[:2]:
        raise DimensionError(
            f"residual spatial dims {residual.shape[:2]} do not match input {x.shape[:2]}"
        )
    if x.shape[2] != c_in or residual.shape[2] != c_out:
        raise DimensionError(
            f"channels ({x.shape[2]}, {residual.shape[2]}) do not match kernel shape {tuple(kernel_shape)}"
        )
    r = ksz // 2
    h, w = x.shape[:2]
    xp = np.pad(x, ((r, r), (r, r), (0, 0)))
    g = np.empty((ksz, ksz, c_in, c_out))
    for dy in range(ksz):
        for dx in range(ksz):
            window = xp[dy : dy + h, dx : dx + w, :]
            g[dy, dx] = np.tensordot(window, residual, axes=([0, 1], [0, 1]))
    return g


def gaussian_label(center: Sequence[float], sigma: float, shape: Sequence[int]) -> np.ndarray:
    """Isotropic Gaussian bump exp(-||p - center||^2 / (2 sigma^2)).

    ``center`` is (row, col) and may be fractional; the peak value is 1
    exactly when the center lies on a pixel.
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    h, w = shape
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    d2 = (rows - float(center[0])) ** 2 + (cols - float(center[1])) ** 2
    return np.exp(-d2 / (2.0 * float(sigma) ** 2))


def connected_components(mask: np.ndarray) -> list[set[tuple[int, int]]]:
    """4-connected components of the foreground, as sets of (row, col).

    Components are listed in row-major order of their first pixel, so the
    output is deterministic for a given mask.
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    components: list[set[tuple[int, int]]] = []
    for r0 in range(h):
        for c0 in range(w):
            if mask[r0, c0] == 0 or seen[r0, c0]:
                continue
            stack = [(r0, c0)]
            seen[r0, c0] = True
            comp: set[tuple[int, int]] = set()
            while stack:
                r, c = stack.pop()
                comp.add((r, c))
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] != 0 and not seen[rr, cc]:
                        seen[rr, cc] = True
                        stack.append((rr, cc))
            components.append(comp)
    return components


def min_bounding_rect(component: Iterable[tuple[int, int]]) -> tuple[int, int, int, int]:
    """Tightest axis-aligned rectangle (x_min, y_min, x_max, y_max), inclusive."""
    pixels = list(component)
    if not pixels:
        raise EmptyInputError("cannot bound an empty pixel set")
    rows = [p[0] for p in pixels]
    cols = [p[1] for p in pixels]
    return (min(cols), min(rows), max(cols), max(rows))


def median_filter_1d(seq: Sequence[float], window: int) -> np.ndarray:
    """Sliding median with the window shrunk to the valid neighborhood at edges.

    A shrunk window of even length uses the mean of the two middle order
    statistics, matching ``np.median``.
    """
    if window % 2 == 0 or window <= 0:
        raise ParameterError(f"window must be odd and positive, got {window}")
    values = np.asarray(seq, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise EmptyInputError("sequence must be non-empty and one-dimensional")
    half = window // 2
    n = values.size
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = np.median(values[lo:hi])
    return out


# Cropping and resampling helpers shared by both memory banks. They live here
# because they are pure dense-tensor plumbing with no branch-specific policy.


def extract_square_crop(
    data: np.ndarray, center: Sequence[float], side: int
) -> tuple[np.ndarray, float]:
    """Cut a zero-padded square window of the given side around ``center``.

    ``center`` is a (row, col) point, possibly fractional; the window start
    is round(center - (side - 1) / 2). Works on (H, W) and (H, W, C) arrays.
    Returns the crop and the fraction of its area that fell outside the
    source array (the zero-padded fraction).
    """
    data = np.asarray(data, dtype=np.float64)
    if side < 1:
        raise ParameterError(f"crop side must be >= 1, got {side}")
    h, w = data.shape[:2]
    r0 = int(np.floor(float(center[0]) - (side - 1) / 2.0 + 0.5))
    c0 = int(np.floor(float(center[1]) - (side - 1) / 2.0 + 0.5))
    out_shape = (side, side) + data.shape[2:]
    crop = np.zeros(out_shape)
    src_r0, src_r1 = max(r0, 0), min(r0 + side, h)
    src_c0, src_c1 = max(c0, 0), min(c0 + side, w)
    inside = 0
    if src_r0 < src_r1 and src_c0 < src_c1:
        crop[src_r0 - r0 : src_r1 - r0, src_c0 - c0 : src_c1 - c0] = data[src_r0:src_r1, src_c0:src_c1]
        inside = (src_r1 - src_r0) * (src_c1 - src_c0)
    padded_fraction = 1.0 - inside / float(side * side)
    return crop, padded_fraction


def bilinear_resize(data: np.ndarray, out_hw: Sequence[int]) -> np.ndarray:
    """Bilinear resample with pixel-center alignment, for (H, W) or (H, W, C)."""
    data = np.asarray(data, dtype=np.float64)
    h, w = data.shape[:2]
    oh, ow = int(out_hw[0]), int(out_hw[1])
    ry = (np.arange(oh) + 0.5) * (h / oh) - 0.5
    rx = (np.arange(ow) + 0.5) * (w / ow) - 0.5
    ry = np.clip(ry, 0.0, h - 1.0)
    rx = np.clip(rx, 0.0, w - 1.0)
    y0 = np.floor(ry).astype(int)
    x0 = np.floor(rx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ry - y0)[:, None]
    wx = (rx - x0)[None, :]
    if data.ndim == 3:
        wy = wy[..., None]
        wx = wx[..., None]
    top = data[y0][:, x0] * (1 - wx) + data[y0][:, x1] * wx
    bot = data[y1][:, x0] * (1 - wx) + data[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def nearest_resize(data: np.ndarray, out_hw: Sequence[int]) -> np.ndarray:
    """Nearest-neighbor resample; keeps binary masks binary."""
    data = np.asarray(data)
    h, w = data.shape[:2]
    oh, ow = int(out_hw[0]), int(out_hw[1])
    ry = np.minimum((np.floor((np.arange(oh) + 0.5) * (h / oh))).astype(int), h - 1)
    rx = np.minimum((np.floor((np.arange(ow) + 0.5) * (w / ow))).astype(int), w - 1)
    return data[ry][:, rx]

"""Appearance branch: sample bank plus a steepest-descent ridge solver.

The segmentation model is a single convolution ``conv2d(F, sigma)`` mapping
C feature channels to D label channels. Its weights are fit online against
every bank entry by minimizing the weighted squared error

    L(sigma) = 1/2 * sum_i ||W_i (.) (conv2d(F_i, sigma) - E_i)||^2
               + delta/2 * ||sigma||^2

where E_i is the multi-channel encoding of sample i's mask and W_i a
per-pixel weight map emphasizing the foreground. The objective is a strictly
convex quadratic, so each gradient step can use the closed-form optimal
step length:

    g     = sum_i adj_k(F_i, W_i^2 (.) (conv2d(F_i, sigma) - E_i)) + delta * sigma
    alpha = ||g||^2 / (sum_i ||W_i (.) conv2d(F_i, g)||^2 + delta * ||g||^2)
    sigma <- sigma - alpha * g

with adj_k the kernel-side adjoint of the convolution. Exact line search
makes the loss non-increasing at every iteration and convergence to the
unique ridge optimum a matter of iteration count only.

The bank itself is a FIFO of cropped, resampled (feature, mask) pairs; a
new retrieval is admitted only when its mean in-mask probability clears a
confidence threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DimensionError,
    EmptyInputError,
    ParameterError,
    bilinear_resize,
    conv2d,
    extract_square_crop,
    gaussian_label,
    kernel_gradient,
    min_bounding_rect,
    nearest_resize,
)

__all__ = [
    "PseudoLabelEncoder",
    "TargetReweighter",
    "AmmSample",
    "AmmMemory",
    "SegFilter",
    "encode_pseudo_label",
    "reweight",
    "seg_loss",
    "seg_gradient",
    "steepest_step_size",
    "steepest_descent",
    "amm_admit",
    "crop_sample",
    "amm_update",
    "CROP_AREA_LADDER",
]

# Square-crop area scales tried in order; a scale is abandoned when more than
# half the crop would be zero padding. Side factors: 1.5x, 1.2x, 1.0x.
CROP_AREA_LADDER = (2.25, 1.44, 1.0)

GRADIENT_EPS = 1e-12


@dataclass(frozen=True)
class PseudoLabelEncoder:
    """Fixed mask-to-multichannel encoding (mask, boundary, center bump)."""

    out_channels: int = 3

    def encode(self, mask: np.ndarray) -> np.ndarray:
        return encode_pseudo_label(mask, self.out_channels)


@dataclass(frozen=True)
class TargetReweighter:
    """Per-pixel loss weights: high on the (blurred) target, low elsewhere."""

    foreground_weight: float = 1.0
    background_weight: float = 0.25
    blur_sigma: float = 1.0

    def __post_init__(self) -> None:
        # zero weights are allowed so a pure-ridge objective stays expressible
        if self.background_weight < 0 or self.foreground_weight < self.background_weight:
            raise ParameterError(
                "weights must satisfy foreground >= background >= 0, got "
                f"({self.foreground_weight}, {self.background_weight})"
            )
        if self.blur_sigma < 0:
            raise ParameterError(f"blur_sigma must be >= 0, got {self.blur_sigma}")

    def weights(self, mask: np.ndarray) -> np.ndarray:
        return reweight(mask, self)


@dataclass
class AmmSample:
    """One bank entry: a feature crop, its binary mask, and the retrieval confidence."""

    feature: np.ndarray
    mask: np.ndarray
    confidence: float = 1.0

    def __post_init__(self) -> None:
        self.feature = np.asarray(self.feature, dtype=np.float64)
        self.mask = np.asarray(self.mask)
        if self.feature.shape[:2] != self.mask.shape:
            raise DimensionError(
                f"feature {self.feature.shape[:2]} and mask {self.mask.shape} dims differ"
            )


class AmmMemory:
    """FIFO bank of appearance samples at one canonical resolution.

    Eviction is strictly first-in-first-out over all entries, including the
    initial query sample; nothing is pinned.
    """

    def __init__(self, capacity: int = 50, resolution: int = 32):
        if capacity < 1:
            raise ParameterError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.resolution = resolution
        self.entries: list[AmmSample] = []

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class SegFilter:
    """Segmentation convolution weights plus the ridge coefficient."""

    kernel: np.ndarray
    regularizer: float = 0.01

    def __post_init__(self) -> None:
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        if self.regularizer <= 0:
            raise ParameterError(f"regularizer must be positive, got {self.regularizer}")

    @classmethod
    def zeros(cls, k: int, in_channels: int, out_channels: int = 3, regularizer: float = 0.01) -> "SegFilter":
        return cls(np.zeros((k, k, in_channels, out_channels)), regularizer)


def encode_pseudo_label(mask: np.ndarray, out_channels: int = 3) -> np.ndarray:
    """Encode a binary mask as a 3-channel regression target.

    channel 0: the mask itself
    channel 1: boundary pixels (foreground with a background 4-neighbor;
               pixels beyond the image edge count as background)
    channel 2: exp(-d^2 / (2 r^2)) from the mask centroid with
               r = max(1, sqrt(area) / 2), zero on background
    """
    if out_channels != 3:
        raise ParameterError(f"encoder is defined for 3 output channels, got {out_channels}")
    mask = np.asarray(mask)
    h, w = mask.shape
    fg = mask != 0
    out = np.zeros((h, w, 3))
    out[:, :, 0] = fg
    if not fg.any():
        return out
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = fg
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    out[:, :, 1] = fg & ~interior
    rows, cols = np.nonzero(fg)
    cr, cc = rows.mean(), cols.mean()
    radius = max(1.0, np.sqrt(float(rows.size)) / 2.0)
    out[:, :, 2] = gaussian_label((cr, cc), radius, (h, w)) * fg
    return out


def _gaussian_kernel_1d(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    # separable zero-padded blur; normalized taps keep values in [0, 1]
    if sigma == 0:
        return np.asarray(img, dtype=np.float64)
    k = _gaussian_kernel_1d(sigma)
    r = (k.size - 1) // 2
    h, w = img.shape
    tmp = np.zeros((h, w))
    padded = np.pad(np.asarray(img, dtype=np.float64), ((r, r), (0, 0)))
    for i, tap in enumerate(k):
        tmp += tap * padded[i : i + h, :]
    out = np.zeros((h, w))
    padded = np.pad(tmp, ((0, 0), (r, r)))
    for i, tap in enumerate(k):
        out += tap * padded[:, i : i + w]
    return out


def reweight(mask: np.ndarray, rw: TargetReweighter) -> np.ndarray:
    """Loss weight map: background level plus a blurred step up to the target."""
    mask = np.asarray(mask, dtype=np.float64)
    blurred = _gaussian_blur(mask, rw.blur_sigma)
    return rw.background_weight + (rw.foreground_weight - rw.background_weight) * blurred


def _sample_list(mem) -> list[AmmSample]:
    if isinstance(mem, AmmMemory):
        return mem.entries
    return list(mem)


def _prepare(
    mem, enc: PseudoLabelEncoder, rw: TargetReweighter
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    prepared = []
    for sample in _sample_list(mem):
        weights = reweight(sample.mask, rw)[:, :, None]
        target = enc.encode(sample.mask)
        prepared.append((sample.feature, target, weights))
    return prepared


def _loss_prepared(kernel: np.ndarray, delta: float, prepared) -> float:
    total = 0.0
    for feature, target, weights in prepared:
        residual = conv2d(feature, kernel) - target
        total += 0.5 * float(np.sum((weights * residual) ** 2))
    return total + 0.5 * delta * float(np.sum(kernel**2))


def _gradient_prepared(kernel: np.ndarray, delta: float, prepared) -> np.ndarray:
    g = delta * kernel.copy()
    for feature, target, weights in prepared:
        residual = conv2d(feature, kernel) - target
        g += kernel_gradient(feature, weights**2 * residual, kernel.shape)
    return g


def _step_size_prepared(g: np.ndarray, delta: float, prepared) -> float:
    g_norm2 = float(np.sum(g**2))
    if g_norm2 == 0.0:
        raise ParameterError("step size is undefined for a zero gradient (already converged)")
    denom = delta * g_norm2
    for feature, _target, weights in prepared:
        denom += float(np.sum((weights * conv2d(feature, g)) ** 2))
    return g_norm2 / denom


def seg_loss(filt: SegFilter, mem, enc: PseudoLabelEncoder, rw: TargetReweighter) -> float:
    """Weighted half-squared-error over the bank plus the ridge term."""
    return _loss_prepared(filt.kernel, filt.regularizer, _prepare(mem, enc, rw))


def seg_gradient(filt: SegFilter, mem, enc: PseudoLabelEncoder, rw: TargetReweighter) -> np.ndarray:
    """Exact gradient of :func:`seg_loss` with respect to the kernel."""
    return _gradient_prepared(filt.kernel, filt.regularizer, _prepare(mem, enc, rw))


def steepest_step_size(g: np.ndarray, mem, rw: TargetReweighter, delta: float) -> float:
    """Closed-form minimizer of the loss along the negative gradient direction."""
    prepared = [
        (s.feature, None, reweight(s.mask, rw)[:, :, None]) for s in _sample_list(mem)
    ]
    return _step_size_prepared(np.asarray(g, dtype=np.float64), delta, prepared)


def steepest_descent(
    filt: SegFilter,
    mem,
    n_iter: int,
    enc: PseudoLabelEncoder,
    rw: TargetReweighter,
) -> SegFilter:
    """Run n_iter exact-line-search gradient steps; stops early once converged."""
    if n_iter < 0:
        raise ParameterError(f"n_iter must be >= 0, got {n_iter}")
    prepared = _prepare(mem, enc, rw)
    kernel = filt.kernel.copy()
    for _ in range(n_iter):
        g = _gradient_prepared(kernel, filt.regularizer, prepared)
        if float(np.sqrt(np.sum(g**2))) < GRADIENT_EPS:
            break
        alpha = _step_size_prepared(g, filt.regularizer, prepared)
        kernel = kernel - alpha * g
    return SegFilter(kernel, filt.regularizer)


def amm_admit(result_prob: np.ndarray, result_mask: np.ndarray, threshold: float) -> bool:
    """Admit iff the mask is non-empty and its mean probability clears the threshold."""
    prob = np.asarray(result_prob, dtype=np.float64)
    mask = np.asarray(result_mask)
    if prob.shape != mask.shape:
        raise DimensionError(f"probability {prob.shape} and mask {mask.shape} dims differ")
    fg = mask != 0
    if not fg.any():
        return False
    return float(prob[fg].mean()) >= threshold


def crop_sample(
    frame_feature: np.ndarray,
    mask: np.ndarray,
    resolution: int = 32,
    confidence: float = 1.0,
) -> AmmSample:
    """Cut a square, centroid-centered sample around the mask and resample it.

    The crop side starts at 1.5x the larger bounding-box side (area scale
    2.25) and steps down the ladder 2.25 -> 1.44 -> 1.0 while more than half
    of the crop would be zero padding. Features are resampled bilinearly,
    the mask with nearest neighbor.
    """
    frame_feature = np.asarray(frame_feature, dtype=np.float64)
    mask = np.asarray(mask)
    if frame_feature.shape[:2] != mask.shape:
        raise DimensionError(
            f"feature {frame_feature.shape[:2]} and mask {mask.shape} dims differ"
        )
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyInputError("cannot crop a sample from an empty mask")
    x_min, y_min, x_max, y_max = min_bounding_rect(zip(rows, cols))
    longest = max(x_max - x_min + 1, y_max - y_min + 1)
    center = (rows.mean(), cols.mean())
    crop_f = crop_m = None
    for area_scale in CROP_AREA_LADDER:
        side = max(1, int(round(np.sqrt(area_scale) * longest)))
        crop_f, frac = extract_square_crop(frame_feature, center, side)
        crop_m, _ = extract_square_crop(mask.astype(np.float64), center, side)
        if frac <= 0.5:
            break
    feature = bilinear_resize(crop_f, (resolution, resolution))
    sample_mask = (nearest_resize(crop_m, (resolution, resolution)) != 0).astype(np.uint8)
    return AmmSample(feature, sample_mask, confidence)


def amm_update(mem: AmmMemory, sample: AmmSample) -> None:
    """Append a sample, evicting the oldest entry once capacity is exceeded."""
    if sample.feature.shape[0] != mem.resolution or sample.feature.shape[1] != mem.resolution:
        raise DimensionError(
            f"sample resolution {sample.feature.shape[:2]} does not match bank "
            f"resolution {mem.resolution}"
        )
    mem.entries.append(sample)
    if len(mem.entries) > mem.capacity:
        del mem.entries[0]

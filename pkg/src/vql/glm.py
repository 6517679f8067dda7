"""Tracking branch: a discriminative correlation filter fit by Gauss-Newton.

The filter ``c`` maps features to a single-channel score map
``H = conv2d(F, c)`` regressed toward a Gaussian peak over the target. The
residual blends least squares inside the target region with a hinge outside
it, controlled by a per-pixel region map S in [0, 1]:

    r = sw * (S * H + (1 - S) * max(0, H) - G)

so S = 1 fits G exactly, S = 0 only penalizes positive background
responses, and intermediate S interpolates. sw is a center-emphasizing
spatial weight derived from G. The loss is

    L(c) = 1/|O| * sum_i ||r_i||^2 + lambda^2 ||c||^2

with gradient (using the hinge subgradient, zero at the kink)

    Q_i      = sw * (S + (1 - S) * 1[H > 0])
    grad L   = 2/|O| * sum_i adj_k(F_i, Q_i * r_i) + 2 lambda^2 c.

Each iteration moves along -grad L with the step length that minimizes the
quadratic model built from the residual Jacobian (curvature products are
evaluated matrix-free):

    (J'J) v = 2/|O| * sum_i adj_k(F_i, Q_i * (Q_i * conv2d(F_i, v))) + 2 lambda^2 v
    beta    = ||g||^2 / (g . (J'J) g)

Because the hinge makes the true objective only piecewise quadratic, a
halving safeguard rejects any step that would increase the loss.

The bank keeps one immutable static snapshot (the initial query) plus a
FIFO of dynamic snapshots from accepted retrievals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

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
)
from .amm import CROP_AREA_LADDER, GRADIENT_EPS

__all__ = [
    "SpatialWeightFn",
    "GlmSample",
    "GlmMemory",
    "TrackFilter",
    "spatial_weight",
    "track_residual",
    "track_score",
    "track_loss",
    "track_gradient",
    "gauss_newton_step",
    "optimize_filter",
    "glm_make_dynamic_sample",
    "label_sigma",
    "glm_update_source",
]

MAX_STEP_HALVINGS = 8


@dataclass(frozen=True)
class SpatialWeightFn:
    """Affine map from the Gaussian label to per-pixel residual weights."""

    w_fg: float = 1.0
    w_bg: float = 0.25

    def __post_init__(self) -> None:
        # zero weights stay expressible for pure-ridge objectives
        if self.w_bg < 0 or self.w_fg < self.w_bg:
            raise ParameterError(
                f"weights must satisfy w_fg >= w_bg >= 0, got ({self.w_fg}, {self.w_bg})"
            )


@dataclass
class GlmSample:
    """A feature crop with its Gaussian label and target-region map."""

    feature: np.ndarray
    label: np.ndarray
    target_region: np.ndarray
    kind: str = "dynamic"

    def __post_init__(self) -> None:
        self.feature = np.asarray(self.feature, dtype=np.float64)
        self.label = np.asarray(self.label, dtype=np.float64)
        self.target_region = np.asarray(self.target_region, dtype=np.float64)
        if not (self.feature.shape[:2] == self.label.shape == self.target_region.shape):
            raise DimensionError(
                f"feature {self.feature.shape[:2]}, label {self.label.shape} and "
                f"region {self.target_region.shape} dims differ"
            )
        if self.target_region.min() < 0 or self.target_region.max() > 1:
            raise ParameterError("target_region values must lie in [0, 1]")
        if self.kind not in ("static", "dynamic"):
            raise ParameterError(f"kind must be 'static' or 'dynamic', got {self.kind!r}")


class GlmMemory:
    """One permanent static snapshot plus a FIFO of dynamic snapshots.

    The static entry is never evicted or replaced; dynamic entries are
    capped at capacity - 1 so the whole bank honors the capacity.
    """

    def __init__(self, static_entry: GlmSample, capacity: int = 50):
        if capacity < 1:
            raise ParameterError(f"capacity must be >= 1, got {capacity}")
        self.static_entry = static_entry
        self.capacity = capacity
        self.dynamic_entries: list[GlmSample] = []

    def add_dynamic(self, sample: GlmSample) -> None:
        self.dynamic_entries.append(sample)
        if len(self.dynamic_entries) > self.capacity - 1:
            del self.dynamic_entries[0]

    @property
    def samples(self) -> list[GlmSample]:
        return [self.static_entry] + self.dynamic_entries

    def __len__(self) -> int:
        return 1 + len(self.dynamic_entries)


@dataclass
class TrackFilter:
    """Correlation filter weights plus the ridge coefficient lambda."""

    kernel: np.ndarray
    regularizer: float = 0.1

    def __post_init__(self) -> None:
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        if self.regularizer <= 0:
            raise ParameterError(f"regularizer must be positive, got {self.regularizer}")

    @classmethod
    def zeros(cls, k: int, in_channels: int, regularizer: float = 0.1) -> "TrackFilter":
        return cls(np.zeros((k, k, in_channels, 1)), regularizer)


def spatial_weight(label: np.ndarray, fn: SpatialWeightFn) -> np.ndarray:
    """w_bg + (w_fg - w_bg) * G, so the weight peaks with the label."""
    return fn.w_bg + (fn.w_fg - fn.w_bg) * np.asarray(label, dtype=np.float64)


def track_score(feature: np.ndarray, filt: TrackFilter) -> np.ndarray:
    """Single-channel response map conv2d(F, c)."""
    return conv2d(feature, filt.kernel)[:, :, 0]


def track_residual(score: np.ndarray, sample: GlmSample, fn: SpatialWeightFn) -> np.ndarray:
    """sw * (S * H + (1 - S) * max(0, H) - G), elementwise."""
    score = np.asarray(score, dtype=np.float64)
    if score.shape != sample.label.shape:
        raise DimensionError(f"score {score.shape} and label {sample.label.shape} dims differ")
    s = sample.target_region
    blended = s * score + (1.0 - s) * np.maximum(0.0, score)
    return spatial_weight(sample.label, fn) * (blended - sample.label)


def _samples(mem) -> list[GlmSample]:
    if isinstance(mem, GlmMemory):
        return mem.samples
    return list(mem)


def track_loss(filt: TrackFilter, mem, fn: SpatialWeightFn) -> float:
    """Mean squared residual over the bank plus lambda^2 ||c||^2."""
    samples = _samples(mem)
    total = 0.0
    for sample in samples:
        r = track_residual(track_score(sample.feature, filt), sample, fn)
        total += float(np.sum(r**2))
    total /= len(samples)
    return total + filt.regularizer**2 * float(np.sum(filt.kernel**2))


def _q_map(score: np.ndarray, sample: GlmSample, fn: SpatialWeightFn) -> np.ndarray:
    # derivative of the blended residual wrt the score; subgradient 0 at H = 0
    s = sample.target_region
    return spatial_weight(sample.label, fn) * (s + (1.0 - s) * (score > 0.0))


def track_gradient(filt: TrackFilter, mem, fn: SpatialWeightFn) -> np.ndarray:
    """Exact gradient of :func:`track_loss` wherever no score sits on the hinge kink."""
    samples = _samples(mem)
    g = 2.0 * filt.regularizer**2 * filt.kernel.copy()
    scale = 2.0 / len(samples)
    for sample in samples:
        score = track_score(sample.feature, filt)
        r = track_residual(score, sample, fn)
        q = _q_map(score, sample, fn)
        g += scale * kernel_gradient(sample.feature, (q * r)[:, :, None], filt.kernel.shape)
    return g


def _curvature_apply(
    v: np.ndarray,
    samples: Sequence[GlmSample],
    q_maps: Sequence[np.ndarray],
    regularizer: float,
) -> np.ndarray:
    out = 2.0 * regularizer**2 * v
    scale = 2.0 / len(samples)
    for sample, q in zip(samples, q_maps):
        rv = q * conv2d(sample.feature, v)[:, :, 0]
        out = out + scale * kernel_gradient(sample.feature, (q * rv)[:, :, None], v.shape)
    return out


def gauss_newton_step(filt: TrackFilter, mem, fn: SpatialWeightFn) -> tuple[np.ndarray, float]:
    """Gradient direction and the step length minimizing the frozen quadratic model."""
    samples = _samples(mem)
    g = track_gradient(filt, mem, fn)
    g_norm2 = float(np.sum(g**2))
    if g_norm2 == 0.0:
        raise ParameterError("step is undefined for a zero gradient (already converged)")
    q_maps = [_q_map(track_score(s.feature, filt), s, fn) for s in samples]
    curvature = float(np.sum(g * _curvature_apply(g, samples, q_maps, filt.regularizer)))
    if curvature <= 0.0:
        raise ParameterError(f"curvature along the gradient is not positive: {curvature}")
    return g, g_norm2 / curvature


def optimize_filter(filt: TrackFilter, mem, n_iter: int, fn: SpatialWeightFn) -> TrackFilter:
    """Iterate safeguarded Gauss-Newton steps; the loss never increases.

    The closed-form step is exact while the hinge activation pattern is
    unchanged; when a step crosses the kink and would raise the true loss,
    it is halved up to MAX_STEP_HALVINGS times and dropped if that fails.
    """
    if n_iter < 0:
        raise ParameterError(f"n_iter must be >= 0, got {n_iter}")
    current = TrackFilter(filt.kernel.copy(), filt.regularizer)
    loss = track_loss(current, mem, fn)
    for _ in range(n_iter):
        g = track_gradient(current, mem, fn)
        if float(np.sqrt(np.sum(g**2))) < GRADIENT_EPS:
            break
        _, beta = gauss_newton_step(current, mem, fn)
        accepted = False
        for _halving in range(MAX_STEP_HALVINGS + 1):
            candidate = TrackFilter(current.kernel - beta * g, current.regularizer)
            candidate_loss = track_loss(candidate, mem, fn)
            if candidate_loss <= loss:
                current, loss = candidate, candidate_loss
                accepted = True
                break
            beta *= 0.5
        if not accepted:
            break
    return current


def label_sigma(side: float) -> float:
    """Gaussian label width for a square crop: one sixth of its side."""
    return side / 6.0


def glm_make_dynamic_sample(
    frame_feature: np.ndarray,
    bbox: Sequence[int],
    prob_mask: np.ndarray,
    resolution: int = 32,
    kind: str = "dynamic",
) -> GlmSample:
    """Build a snapshot from a detection: 1.5x-bbox crop, Gaussian label, region map.

    The label is synthesized on the crop grid, centered there with
    sigma = side / 6, then resampled to the canonical resolution together
    with the feature crop and the cropped probability map.
    """
    frame_feature = np.asarray(frame_feature, dtype=np.float64)
    prob_mask = np.asarray(prob_mask, dtype=np.float64)
    if frame_feature.shape[:2] != prob_mask.shape:
        raise DimensionError(
            f"feature {frame_feature.shape[:2]} and probability map {prob_mask.shape} dims differ"
        )
    x_min, y_min, x_max, y_max = bbox
    if x_max < x_min or y_max < y_min:
        raise EmptyInputError(f"degenerate bounding box {tuple(bbox)}")
    longest = max(x_max - x_min + 1, y_max - y_min + 1)
    center = ((y_min + y_max) / 2.0, (x_min + x_max) / 2.0)
    crop_f = crop_p = None
    side = 1
    for area_scale in CROP_AREA_LADDER:
        side = max(1, int(round(np.sqrt(area_scale) * longest)))
        crop_f, frac = extract_square_crop(frame_feature, center, side)
        crop_p, _ = extract_square_crop(prob_mask, center, side)
        if frac <= 0.5:
            break
    crop_center = ((side - 1) / 2.0, (side - 1) / 2.0)
    label = gaussian_label(crop_center, label_sigma(side), (side, side))
    feature = bilinear_resize(crop_f, (resolution, resolution))
    label = bilinear_resize(label, (resolution, resolution))
    region = np.clip(bilinear_resize(crop_p, (resolution, resolution)), 0.0, 1.0)
    return GlmSample(feature, label, region, kind)


def glm_update_source(response_history: Sequence[float], window: int = 25) -> str:
    """Pick the snapshot driving the next filter refresh.

    A frame counts as a high response when its peak reaches half of the
    running maximum peak seen so far. If more than 60% of the last
    ``window`` frames are high the dynamic snapshots are trusted, otherwise
    the filter re-anchors on the static query snapshot.
    """
    history = np.asarray(response_history, dtype=np.float64)
    if history.size == 0:
        raise EmptyInputError("response history must be non-empty")
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    running_max = np.maximum.accumulate(history)
    high = history >= 0.5 * running_max
    recent = high[-window:]
    return "dynamic" if recent.mean() > 0.6 else "static"

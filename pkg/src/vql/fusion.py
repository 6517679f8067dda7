"""Dual-branch integration: score encoding, feature fusion, mask extraction,
and temporal localization over per-frame confidences.

The tracking score map is lifted to the segmentation feature space by a
fixed rectified-affine encoder, added elementwise to the appearance
features, and squashed to a probability map by a logistic over the channel
mean. The per-frame confidence is the mean probability inside the
thresholded mask; the answer interval is the last run of median-filtered
confidences above 0.8x their maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DimensionError,
    connected_components,
    median_filter_1d,
    min_bounding_rect,
)

__all__ = [
    "ScoreEncoder",
    "SegmentationResult",
    "TemporalInterval",
    "encode_score",
    "fuse",
    "decode",
    "extract_result",
    "temporal_localize",
]

MASK_THRESHOLD = 0.5


@dataclass(frozen=True)
class ScoreEncoder:
    """Broadcasts a rectified affine response into D feature channels."""

    out_channels: int = 3
    gain: float = 1.0
    bias: float = 0.0


@dataclass
class SegmentationResult:
    """Per-frame output: probability map, mask, bbox, and confidence."""

    prob: np.ndarray
    mask: np.ndarray
    bbox: Optional[tuple[int, int, int, int]]
    s_conf: float
    frame_index: int


@dataclass(frozen=True)
class TemporalInterval:
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if self.start_frame > self.end_frame:
            raise ValueError(f"interval must satisfy start <= end, got {self}")


def encode_score(score: np.ndarray, enc: ScoreEncoder) -> np.ndarray:
    """max(0, gain * H + bias), replicated into each output channel."""
    score = np.asarray(score, dtype=np.float64)
    activated = np.maximum(0.0, enc.gain * score + enc.bias)
    return np.repeat(activated[:, :, None], enc.out_channels, axis=2)


def fuse(feat_a: np.ndarray, feat_b: np.ndarray) -> np.ndarray:
    """Elementwise sum of the two branch features."""
    feat_a = np.asarray(feat_a, dtype=np.float64)
    feat_b = np.asarray(feat_b, dtype=np.float64)
    if feat_a.shape != feat_b.shape:
        raise DimensionError(f"cannot fuse {feat_a.shape} with {feat_b.shape}")
    return feat_a + feat_b


def decode(fused: np.ndarray) -> np.ndarray:
    """Logistic of the channel mean; output strictly inside (0, 1)."""
    fused = np.asarray(fused, dtype=np.float64)
    logits = fused.mean(axis=2)
    return 1.0 / (1.0 + np.exp(-logits))


def extract_result(prob: np.ndarray, frame_index: int) -> SegmentationResult:
    """Threshold at 0.5, box the largest 4-connected component.

    The confidence is the mean probability over the whole mask; size ties
    between components go to the one discovered first in row-major order.
    An empty mask yields no box and zero confidence.
    """
    prob = np.asarray(prob, dtype=np.float64)
    mask = (prob >= MASK_THRESHOLD).astype(np.uint8)
    if not mask.any():
        return SegmentationResult(prob, mask, None, 0.0, frame_index)
    components = connected_components(mask)
    largest = max(components, key=len)
    bbox = min_bounding_rect(largest)
    s_conf = float(prob[mask != 0].mean())
    return SegmentationResult(prob, mask, bbox, s_conf, frame_index)


def temporal_localize(
    s_conf_seq: Sequence[float], window: int = 5, ratio: float = 0.8
) -> Optional[TemporalInterval]:
    """Last run of median-filtered confidences at or above ratio * max.

    Returns None when the filtered sequence is identically zero. The
    interval endpoints are positions within the sequence, inclusive, and
    are invariant to positive rescaling of the scores.
    """
    filtered = median_filter_1d(s_conf_seq, window)
    peak = float(filtered.max())
    if peak <= 0.0:
        return None
    threshold = ratio * peak
    above = filtered >= threshold
    end = None
    for i in range(len(above) - 1, -1, -1):
        if above[i]:
            end = i
            break
    if end is None:
        return None
    start = end
    while start > 0 and above[start - 1]:
        start -= 1
    return TemporalInterval(start, end)

"""Per-query orchestration: seed both memory banks from the query, process
frames clip by clip, and produce the 2D track, temporal interval, and 3D
displacements.

Update policy, following the inference procedure the solvers were designed
for: banks ingest admitted retrievals on every frame below the dense-update
horizon and every update_stride frames after it; each ingest is followed by
a few solver iterations. If the mean confidence over the trailing window
drops below the halt threshold, updating stops for good and banks and
filters revert to their post-initialization state.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import amm, fusion, geo3d, glm
from .core import DimensionError, EmptyInputError, conv2d, min_bounding_rect

__all__ = [
    "NoDetectionError",
    "PipelineConfig",
    "QuerySpec",
    "TrackOutput",
    "Pipeline",
    "finalize_3d",
]


class NoDetectionError(RuntimeError):
    """The track has no temporal interval or no usable 3D observations."""


@dataclass(frozen=True)
class PipelineConfig:
    clip_length: int = 32
    dense_update_horizon: int = 100
    update_stride: int = 25
    amm_iters_init: int = 10
    amm_iters_update: int = 3
    glm_iters_init: int = 10
    glm_iters_update: int = 3
    admit_threshold: float = 0.6
    halt_threshold: float = 0.4
    halt_window: int = 25
    temporal_ratio: float = 0.8
    median_window: int = 5
    capacity: int = 50
    zeta: float = 1.0
    lambda_thr: float = 0.5
    # desk-scale model knobs
    sample_resolution: int = 32
    label_channels: int = 3
    seg_kernel_size: int = 3
    seg_regularizer: float = 0.01
    track_kernel_size: int = 3
    track_regularizer: float = 0.1
    source_window: int = 25
    updates_enabled: bool = True

    def __post_init__(self) -> None:
        for name in ("admit_threshold", "halt_threshold", "temporal_ratio"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("clip_length", "update_stride", "dense_update_horizon", "capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class QuerySpec:
    """The visual query: a feature map with the target's binary mask."""

    feature: np.ndarray
    mask: np.ndarray
    frame_index: int = 0

    def __post_init__(self) -> None:
        self.feature = np.asarray(self.feature, dtype=np.float64)
        self.mask = np.asarray(self.mask)
        if self.feature.shape[:2] != self.mask.shape:
            raise DimensionError(
                f"feature {self.feature.shape[:2]} and mask {self.mask.shape} dims differ"
            )
        if not (self.mask != 0).any():
            raise EmptyInputError("query mask must be non-empty")


@dataclass
class TrackOutput:
    """Everything a query run produces."""

    results: list[fusion.SegmentationResult]
    interval: Optional[fusion.TemporalInterval]
    peaks: list[float]
    world_point: Optional[np.ndarray] = None
    displacements: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def s_conf_seq(self) -> list[float]:
        return [r.s_conf for r in self.results]


def _augmented_query_samples(base: amm.AmmSample) -> list[amm.AmmSample]:
    """Base crop plus horizontal flip, (+2, +2) shift with zero fill, and box blur."""
    flipped = amm.AmmSample(base.feature[:, ::-1, :].copy(), base.mask[:, ::-1].copy(), 1.0)
    shifted_f = np.zeros_like(base.feature)
    shifted_m = np.zeros_like(base.mask)
    shifted_f[2:, 2:] = base.feature[:-2, :-2]
    shifted_m[2:, 2:] = base.mask[:-2, :-2]
    blurred_f = _box_blur_3x3(base.feature)
    return [
        flipped,
        amm.AmmSample(shifted_f, shifted_m, 1.0),
        amm.AmmSample(blurred_f, base.mask.copy(), 1.0),
    ]


def _box_blur_3x3(feature: np.ndarray) -> np.ndarray:
    h, w = feature.shape[:2]
    padded = np.pad(feature, ((1, 1), (1, 1), (0, 0)))
    out = np.zeros_like(feature)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy : dy + h, dx : dx + w]
    return out / 9.0


class Pipeline:
    """One query's stateful run over a frame sequence."""

    def __init__(self, query: QuerySpec, cfg: PipelineConfig = PipelineConfig()):
        self.cfg = cfg
        self.encoder = amm.PseudoLabelEncoder(cfg.label_channels)
        self.reweighter = amm.TargetReweighter()
        self.weight_fn = glm.SpatialWeightFn()
        self.score_encoder = fusion.ScoreEncoder(out_channels=cfg.label_channels)

        channels = query.feature.shape[2]
        base = amm.crop_sample(query.feature, query.mask, cfg.sample_resolution)
        self.amm_memory = amm.AmmMemory(cfg.capacity, cfg.sample_resolution)
        amm.amm_update(self.amm_memory, base)
        for sample in _augmented_query_samples(base):
            amm.amm_update(self.amm_memory, sample)

        bbox = min_bounding_rect(zip(*np.nonzero(query.mask)))
        static = glm.glm_make_dynamic_sample(
            query.feature,
            bbox,
            (query.mask != 0).astype(np.float64),
            cfg.sample_resolution,
            kind="static",
        )
        self.glm_memory = glm.GlmMemory(static, cfg.capacity)

        self.seg_filter = amm.steepest_descent(
            amm.SegFilter.zeros(cfg.seg_kernel_size, channels, cfg.label_channels, cfg.seg_regularizer),
            self.amm_memory,
            cfg.amm_iters_init,
            self.encoder,
            self.reweighter,
        )
        self.track_filter = glm.optimize_filter(
            glm.TrackFilter.zeros(cfg.track_kernel_size, channels, cfg.track_regularizer),
            self.glm_memory,
            cfg.glm_iters_init,
            self.weight_fn,
        )

        # state restored verbatim if updating ever halts
        self._initial_amm_entries = copy.deepcopy(self.amm_memory.entries)
        self._initial_glm_dynamic = copy.deepcopy(self.glm_memory.dynamic_entries)
        self._initial_seg_filter = copy.deepcopy(self.seg_filter)
        self._initial_track_filter = copy.deepcopy(self.track_filter)

        self.halted = False
        self.results: list[fusion.SegmentationResult] = []
        self.peaks: list[float] = []

    def _is_update_frame(self, frame_index: int) -> bool:
        return (
            frame_index < self.cfg.dense_update_horizon
            or frame_index % self.cfg.update_stride == 0
        )

    def _halt_triggered(self) -> bool:
        window = self.cfg.halt_window
        if len(self.results) < window:
            return False
        recent = [r.s_conf for r in self.results[-window:]]
        return float(np.mean(recent)) < self.cfg.halt_threshold

    def _revert_to_initial(self) -> None:
        self.amm_memory.entries = copy.deepcopy(self._initial_amm_entries)
        self.glm_memory.dynamic_entries = copy.deepcopy(self._initial_glm_dynamic)
        self.seg_filter = copy.deepcopy(self._initial_seg_filter)
        self.track_filter = copy.deepcopy(self._initial_track_filter)
        self.halted = True

    def step_frame(self, frame_feature: np.ndarray, frame_index: int) -> fusion.SegmentationResult:
        """Run one frame through both branches, fuse, and maybe update the banks."""
        frame_feature = np.asarray(frame_feature, dtype=np.float64)
        score = glm.track_score(frame_feature, self.track_filter)
        feat_a = conv2d(frame_feature, self.seg_filter.kernel)
        feat_j = fusion.encode_score(score, self.score_encoder)
        prob = fusion.decode(fusion.fuse(feat_a, feat_j))
        result = fusion.extract_result(prob, frame_index)

        self.results.append(result)
        self.peaks.append(float(score.max()))

        if self.cfg.updates_enabled and not self.halted:
            if self._halt_triggered():
                self._revert_to_initial()
            elif self._is_update_frame(frame_index) and amm.amm_admit(
                prob, result.mask, self.cfg.admit_threshold
            ):
                self._ingest(frame_feature, result)
        return result

    def _ingest(self, frame_feature: np.ndarray, result: fusion.SegmentationResult) -> None:
        sample = amm.crop_sample(
            frame_feature, result.mask, self.cfg.sample_resolution, result.s_conf
        )
        amm.amm_update(self.amm_memory, sample)
        self.seg_filter = amm.steepest_descent(
            self.seg_filter,
            self.amm_memory,
            self.cfg.amm_iters_update,
            self.encoder,
            self.reweighter,
        )

        dyn = glm.glm_make_dynamic_sample(
            frame_feature, result.bbox, result.prob, self.cfg.sample_resolution
        )
        self.glm_memory.add_dynamic(dyn)
        source = glm.glm_update_source(self.peaks, self.cfg.source_window)
        view = self.glm_memory.samples if source == "dynamic" else [self.glm_memory.static_entry]
        self.track_filter = glm.optimize_filter(
            self.track_filter, view, self.cfg.glm_iters_update, self.weight_fn
        )

    def finalize_2d(self) -> TrackOutput:
        """Temporal localization over the recorded confidences."""
        if not self.results:
            raise EmptyInputError("no frames have been stepped")
        interval = fusion.temporal_localize(
            [r.s_conf for r in self.results], self.cfg.median_window, self.cfg.temporal_ratio
        )
        if interval is not None:
            indices = [r.frame_index for r in self.results]
            interval = fusion.TemporalInterval(
                indices[interval.start_frame], indices[interval.end_frame]
            )
        return TrackOutput(list(self.results), interval, list(self.peaks))

    def run(self, frames: Sequence[np.ndarray], start_index: int = 0) -> TrackOutput:
        """Step a whole frame sequence in clip-sized chunks and finalize.

        Clip boundaries only batch the iteration; memory persists across
        them, so the output equals stepping every frame one by one.
        """
        for clip_start in range(0, len(frames), self.cfg.clip_length):
            for offset, feature in enumerate(
                frames[clip_start : clip_start + self.cfg.clip_length]
            ):
                self.step_frame(feature, start_index + clip_start + offset)
        return self.finalize_2d()


def finalize_3d(
    track: TrackOutput,
    cameras: Sequence[Optional[geo3d.CameraFrame]],
    alignment_pairs: tuple[np.ndarray, np.ndarray],
    cfg: PipelineConfig = PipelineConfig(),
) -> TrackOutput:
    """Lift the 2D track into 3D and attach per-frame displacements.

    Aggregates mask-centroid back-projections over the frames inside the
    temporal interval, weighting each view by semantic x geometric
    confidence, then expresses the aggregate in every interval camera with
    valid depth at its centroid. ``cameras`` is indexed by frame_index.
    """
    if track.interval is None:
        raise NoDetectionError("track has no temporal interval")
    src, dst = alignment_pairs
    t_eta = geo3d.align_sim3(src, dst)

    contributions: list[geo3d.ViewContribution] = []
    for result in track.results:
        idx = result.frame_index
        if not (track.interval.start_frame <= idx <= track.interval.end_frame):
            continue
        if result.bbox is None or idx >= len(cameras) or cameras[idx] is None:
            continue
        camera = cameras[idx]
        rows, cols = np.nonzero(result.mask)
        u, v = float(cols.mean()), float(rows.mean())
        try:
            world = geo3d.backproject(camera, u, v, t_eta)
        except geo3d.InvalidSampleError:
            continue
        s_conf = geo3d.semantic_confidence(result.prob, result.mask, cfg.lambda_thr)
        tau = float(camera.depth_uncertainty[int(round(v)), int(round(u))])
        g_conf = geo3d.geometric_confidence(tau, cfg.zeta)
        contributions.append(geo3d.ViewContribution(world, s_conf, g_conf, idx))

    if not contributions:
        raise NoDetectionError("no interval frame had a usable mask and depth")
    world_point = geo3d.aggregate(contributions)

    displacements: dict[int, np.ndarray] = {}
    for contribution in contributions:
        camera = cameras[contribution.frame_index]
        displacements[contribution.frame_index] = geo3d.relative_displacement(
            camera, world_point, t_eta
        )
    return TrackOutput(track.results, track.interval, track.peaks, world_point, displacements)

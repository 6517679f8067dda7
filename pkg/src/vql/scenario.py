"""Deterministic synthetic scenarios standing in for video features, masks,
and camera geometry.

A scenario draws a target blob with a distinct channel signature on an
ambient background that is anti-correlated with the current signature, so a
linear filter separating the target from its surroundings has a strictly
negative response off-target. Presets cover a static target, gradual
signature rotation (appearance drift), a look-alike distractor, a temporary
absence window, and a multi-view geometric setup with analytic depth.

Everything is a pure function of the seed via ``numpy.random.default_rng``,
which makes generated files byte-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ParameterError
from .fusion import SegmentationResult, TemporalInterval
from .geo3d import CameraFrame, Sim3Transform
from .pipeline import QuerySpec, TrackOutput

__all__ = [
    "ScenarioParams",
    "FrameData",
    "Scenario",
    "PRESETS",
    "preset_params",
    "gen_scenario",
    "ground_truth_track",
]


@dataclass(frozen=True)
class ScenarioParams:
    preset: str
    n_frames: int
    canvas: tuple[int, int] = (48, 48)
    channels: int = 3
    object_size: int = 21
    background_amplitude: float = 0.35
    drift_step: float = 0.0
    target_motion: float = 0.0
    motion_period: int = 40
    distractors: int = 0
    distractor_angle: float = 0.9
    absence: Optional[tuple[int, int]] = None
    n_views: int = 0
    view_radius: float = 2.5
    focal: float = 40.0
    corrupt_views: tuple[int, ...] = ()
    corrupt_uncertainty: float = 20.0


def _preset_table() -> dict[str, ScenarioParams]:
    return {
        "identity": ScenarioParams("identity", n_frames=48),
        "drift": ScenarioParams("drift", n_frames=200, drift_step=(np.pi / 2.0) / 150.0),
        "distractor": ScenarioParams("distractor", n_frames=80, distractors=1),
        "absence": ScenarioParams("absence", n_frames=120, absence=(46, 85)),
        "geo": ScenarioParams("geo", n_frames=5, n_views=5, object_size=9),
    }


PRESETS = _preset_table()


def preset_params(name: str) -> ScenarioParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class FrameData:
    feature: np.ndarray
    gt_mask: np.ndarray
    gt_bbox: Optional[tuple[int, int, int, int]]
    camera: Optional[CameraFrame] = None


@dataclass
class Scenario:
    seed: int
    params: ScenarioParams
    frames: list[FrameData]
    query: QuerySpec
    gt_interval: Optional[tuple[int, int]]
    gt_point: Optional[np.ndarray] = None
    alignment_src: Optional[np.ndarray] = None
    alignment_dst: Optional[np.ndarray] = None

    @property
    def cameras(self) -> list[Optional[CameraFrame]]:
        return [f.camera for f in self.frames]


def _signature_pair(rng: np.random.Generator, channels: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal target signature and rotation partner."""
    q = rng.normal(size=channels)
    q /= np.linalg.norm(q)
    u = rng.normal(size=channels)
    u -= (u @ q) * q
    u /= np.linalg.norm(u)
    return q, u


def _draw_square(feature: np.ndarray, center: tuple[int, int], size: int, signature: np.ndarray) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    h, w = feature.shape[:2]
    half = size // 2
    r0, c0 = center[0] - half, center[1] - half
    r1, c1 = r0 + size - 1, c0 + size - 1
    r0c, r1c = max(r0, 0), min(r1, h - 1)
    c0c, c1c = max(c0, 0), min(c1, w - 1)
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[r0c : r1c + 1, c0c : c1c + 1] = 1
    feature[r0c : r1c + 1, c0c : c1c + 1, :] = signature
    return mask, (c0c, r0c, c1c, r1c)


def _look_at_pose(position: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Camera-to-world pose with the optical axis through ``target``."""
    z = target - position
    z = z / np.linalg.norm(z)
    up = np.array([0.0, 0.0, 1.0])
    if abs(z @ up) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    pose = np.eye(4)
    pose[:3, 0] = x
    pose[:3, 1] = y
    pose[:3, 2] = z
    pose[:3, 3] = position
    return pose


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    quat = rng.normal(size=4)
    quat /= np.linalg.norm(quat)
    w, x, y, z = quat
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def gen_scenario(seed: int, params: ScenarioParams) -> Scenario:
    """Build a scenario deterministically from the seed and parameters."""
    if params.n_frames < 1:
        raise ParameterError(f"need at least one frame, got {params.n_frames}")
    h, w = params.canvas
    if h < 8 or w < 8:
        raise ParameterError(f"canvas must be at least 8x8, got {params.canvas}")
    if params.object_size < 1 or params.object_size > min(h, w):
        raise ParameterError(f"object size {params.object_size} does not fit canvas {params.canvas}")
    rng = np.random.default_rng(seed)
    q0, u0 = _signature_pair(rng, params.channels)
    distractor_sig = np.cos(params.distractor_angle) * q0 + np.sin(params.distractor_angle) * u0
    amp = params.background_amplitude

    if params.n_views > 0:
        center = (23, 23)
    else:
        center = (h // 2, w // 2)

    geo = _geo_setup(rng, params) if params.n_views > 0 else None

    frames: list[FrameData] = []
    for t in range(params.n_frames):
        theta = params.drift_step * t
        sig = np.cos(theta) * q0 + np.sin(theta) * u0
        feature = np.tile(-amp * sig, (h, w, 1))
        present = True
        if params.absence is not None:
            a0, a1 = params.absence
            present = not (a0 <= t <= a1)
        if params.distractors > 0:
            shift = int(round(6 * np.sin(2 * np.pi * t / params.motion_period)))
            d_center = (h // 4, w // 4 + shift)
            _draw_square(feature, d_center, max(3, params.object_size // 2), distractor_sig)
        if present:
            offset = int(round(params.target_motion * np.sin(2 * np.pi * t / params.motion_period)))
            pos = (center[0], center[1] + offset)
            mask, bbox = _draw_square(feature, pos, params.object_size, sig)
        else:
            mask, bbox = np.zeros((h, w), dtype=np.uint8), None
        camera = geo["cameras"][t] if geo is not None and t < len(geo["cameras"]) else None
        frames.append(FrameData(feature, mask, bbox, camera))

    query = QuerySpec(frames[0].feature.copy(), frames[0].gt_mask.copy(), 0)
    gt_interval = _last_presence_run([f.gt_bbox is not None for f in frames])
    return Scenario(
        seed=seed,
        params=params,
        frames=frames,
        query=query,
        gt_interval=gt_interval,
        gt_point=None if geo is None else geo["point"],
        alignment_src=None if geo is None else geo["src"],
        alignment_dst=None if geo is None else geo["dst"],
    )


def _last_presence_run(present: list[bool]) -> Optional[tuple[int, int]]:
    end = None
    for i in range(len(present) - 1, -1, -1):
        if present[i]:
            end = i
            break
    if end is None:
        return None
    start = end
    while start > 0 and present[start - 1]:
        start -= 1
    return (start, end)


def _geo_setup(rng: np.random.Generator, params: ScenarioParams) -> dict:
    """Cameras on an arc around a world point, expressed in a scaled
    reconstruction frame that a similarity transform maps back to the
    benchmark frame; depth maps are constant at the target's depth."""
    h, w = params.canvas
    point = rng.uniform(-1.0, 1.0, size=3) + np.array([0.0, 0.0, 1.0])
    scale = float(rng.uniform(0.6, 1.8))
    rotation = _random_rotation(rng)
    translation = rng.uniform(-2.0, 2.0, size=3)
    to_bench = Sim3Transform(scale, rotation, translation)
    from_bench = to_bench.inverse()

    intrinsics = np.array([[params.focal, 0.0, 23.0], [0.0, params.focal, 23.0], [0.0, 0.0, 1.0]])
    angles = np.linspace(0.0, np.pi / 2.0, params.n_views)
    cameras: list[CameraFrame] = []
    for i, angle in enumerate(angles):
        position = point + params.view_radius * np.array([np.cos(angle), np.sin(angle), 0.35])
        pose_bench = _look_at_pose(position, point)
        depth_metric = float(np.linalg.norm(point - position))
        # re-express the rigid pose in the reconstruction frame: rotations
        # compose, translations shrink by the reconstruction scale
        pose_recon = np.eye(4)
        pose_recon[:3, :3] = from_bench.rotation @ pose_bench[:3, :3]
        pose_recon[:3, 3] = from_bench.apply(pose_bench[:3, 3])
        depth_value = depth_metric / scale
        uncertainty_value = params.corrupt_uncertainty if i in params.corrupt_views else 0.0
        if i in params.corrupt_views:
            depth_value *= 1.5
        depth = np.full((h, w), depth_value)
        uncertainty = np.full((h, w), uncertainty_value)
        cameras.append(CameraFrame(pose_recon, intrinsics, depth, uncertainty))

    n_pairs = 12
    src = rng.uniform(-2.0, 2.0, size=(n_pairs, 3))
    dst = to_bench.apply(src)
    return {"cameras": cameras, "point": point, "src": src, "dst": dst}


def ground_truth_track(scenario: Scenario, on_prob: float = 0.9, off_prob: float = 0.1) -> TrackOutput:
    """A TrackOutput that reproduces the scenario's ground truth exactly.

    Useful as an oracle input for the metric and 3D stages: probability maps
    threshold back to the ground-truth masks and the interval matches the
    annotated one.
    """
    results = []
    peaks = []
    for t, frame in enumerate(scenario.frames):
        mask = frame.gt_mask.astype(np.uint8)
        prob = np.where(mask != 0, on_prob, off_prob)
        s_conf = float(on_prob) if mask.any() else 0.0
        results.append(SegmentationResult(prob, mask, frame.gt_bbox, s_conf, t))
        peaks.append(1.0 if mask.any() else 0.0)
    interval = None
    if scenario.gt_interval is not None:
        interval = TemporalInterval(*scenario.gt_interval)
    return TrackOutput(results, interval, peaks)

"""Scenario, track, and config files.

All three are JSON documents (UTF-8, nested key/value objects with numeric
arrays) carrying a mandatory ``version`` and ``kind`` field. Tensors are
stored as flat row-major float arrays with their shape implied by the
document's ``canvas``/``channels`` fields; floats use Python's
shortest-round-trip repr so a load/save cycle is byte-identical. Writes go
to a temporary file in the target directory and are renamed into place, so
a reader never sees a partial file.

The full schema is documented in the repository README.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict
from typing import Any, Optional

import numpy as np

from .fusion import SegmentationResult, TemporalInterval
from .geo3d import CameraFrame
from .pipeline import PipelineConfig, QuerySpec, TrackOutput
from .scenario import FrameData, Scenario, ScenarioParams

__all__ = [
    "SchemaError",
    "FORMAT_VERSION",
    "save_scenario",
    "load_scenario",
    "save_track",
    "load_track",
    "save_config",
    "load_config",
]

FORMAT_VERSION = 1


class SchemaError(ValueError):
    """A document is malformed; the message names the offending field."""


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _dump(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n"


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON (line {exc.lineno}, column {exc.colno})") from exc
    if not isinstance(document, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return document


def _expect(document: dict, key: str, path: str) -> Any:
    if key not in document:
        raise SchemaError(f"{path}.{key}: missing required field")
    return document[key]


def _check_header(document: dict, kind: str, path: str) -> None:
    version = _expect(document, "version", path)
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}.version: expected {FORMAT_VERSION}, got {version!r}")
    actual = _expect(document, "kind", path)
    if actual != kind:
        raise SchemaError(f"{path}.kind: expected {kind!r}, got {actual!r}")


def _tensor(values: Any, shape: tuple[int, ...], path: str) -> np.ndarray:
    expected = int(np.prod(shape))
    if not isinstance(values, list) or len(values) != expected:
        got = len(values) if isinstance(values, list) else type(values).__name__
        raise SchemaError(f"{path}: expected {expected} numbers for shape {shape}, got {got}")
    arr = np.asarray(values, dtype=np.float64).reshape(shape)
    if not np.isfinite(arr).all():
        raise SchemaError(f"{path}: contains non-finite values")
    return arr


def _flat(arr: np.ndarray) -> list:
    return np.asarray(arr, dtype=np.float64).ravel().tolist()


# -- scenario ---------------------------------------------------------------


def save_scenario(scenario: Scenario, path: str) -> None:
    params = asdict(scenario.params)
    params["canvas"] = list(scenario.params.canvas)
    params["corrupt_views"] = list(scenario.params.corrupt_views)
    params["absence"] = None if scenario.params.absence is None else list(scenario.params.absence)
    frames = []
    for frame in scenario.frames:
        camera = None
        if frame.camera is not None:
            camera = {
                "pose": _flat(frame.camera.pose),
                "intrinsics": _flat(frame.camera.intrinsics),
                "depth": _flat(frame.camera.depth),
                "depth_uncertainty": _flat(frame.camera.depth_uncertainty),
            }
        frames.append(
            {
                "feature": _flat(frame.feature),
                "gt_mask": np.asarray(frame.gt_mask, dtype=np.int64).ravel().tolist(),
                "gt_bbox": None if frame.gt_bbox is None else list(frame.gt_bbox),
                "camera": camera,
            }
        )
    document = {
        "version": FORMAT_VERSION,
        "kind": "scenario",
        "seed": scenario.seed,
        "params": params,
        "query": {
            "feature": _flat(scenario.query.feature),
            "mask": np.asarray(scenario.query.mask, dtype=np.int64).ravel().tolist(),
            "frame_index": scenario.query.frame_index,
        },
        "frames": frames,
        "gt_interval": None if scenario.gt_interval is None else list(scenario.gt_interval),
        "gt_point": None if scenario.gt_point is None else _flat(scenario.gt_point),
        "alignment_src": None if scenario.alignment_src is None else _flat(scenario.alignment_src),
        "alignment_dst": None if scenario.alignment_dst is None else _flat(scenario.alignment_dst),
    }
    _atomic_write(path, _dump(document))


def load_scenario(path: str) -> Scenario:
    document = _load_json(path)
    _check_header(document, "scenario", path)
    raw_params = _expect(document, "params", path)
    try:
        params = ScenarioParams(
            preset=raw_params["preset"],
            n_frames=raw_params["n_frames"],
            canvas=tuple(raw_params["canvas"]),
            channels=raw_params["channels"],
            object_size=raw_params["object_size"],
            background_amplitude=raw_params["background_amplitude"],
            drift_step=raw_params["drift_step"],
            target_motion=raw_params["target_motion"],
            motion_period=raw_params["motion_period"],
            distractors=raw_params["distractors"],
            distractor_angle=raw_params["distractor_angle"],
            absence=None if raw_params["absence"] is None else tuple(raw_params["absence"]),
            n_views=raw_params["n_views"],
            view_radius=raw_params["view_radius"],
            focal=raw_params["focal"],
            corrupt_views=tuple(raw_params["corrupt_views"]),
            corrupt_uncertainty=raw_params["corrupt_uncertainty"],
        )
    except KeyError as exc:
        raise SchemaError(f"{path}.params.{exc.args[0]}: missing required field") from None
    h, w = params.canvas
    c = params.channels
    raw_query = _expect(document, "query", path)
    query = QuerySpec(
        _tensor(_expect(raw_query, "feature", f"{path}.query"), (h, w, c), f"{path}.query.feature"),
        _tensor(_expect(raw_query, "mask", f"{path}.query"), (h, w), f"{path}.query.mask").astype(np.uint8),
        int(_expect(raw_query, "frame_index", f"{path}.query")),
    )
    frames = []
    raw_frames = _expect(document, "frames", path)
    if not isinstance(raw_frames, list) or len(raw_frames) != params.n_frames:
        raise SchemaError(f"{path}.frames: expected {params.n_frames} entries")
    for i, raw in enumerate(raw_frames):
        where = f"{path}.frames[{i}]"
        camera = None
        if raw.get("camera") is not None:
            raw_cam = raw["camera"]
            camera = CameraFrame(
                _tensor(_expect(raw_cam, "pose", where), (4, 4), f"{where}.camera.pose"),
                _tensor(_expect(raw_cam, "intrinsics", where), (3, 3), f"{where}.camera.intrinsics"),
                _tensor(_expect(raw_cam, "depth", where), (h, w), f"{where}.camera.depth"),
                _tensor(
                    _expect(raw_cam, "depth_uncertainty", where), (h, w), f"{where}.camera.depth_uncertainty"
                ),
            )
        bbox = raw.get("gt_bbox")
        frames.append(
            FrameData(
                _tensor(_expect(raw, "feature", where), (h, w, c), f"{where}.feature"),
                _tensor(_expect(raw, "gt_mask", where), (h, w), f"{where}.gt_mask").astype(np.uint8),
                None if bbox is None else tuple(int(v) for v in bbox),
                camera,
            )
        )
    gt_interval = document.get("gt_interval")
    gt_point = document.get("gt_point")
    src = document.get("alignment_src")
    dst = document.get("alignment_dst")
    return Scenario(
        seed=int(_expect(document, "seed", path)),
        params=params,
        frames=frames,
        query=query,
        gt_interval=None if gt_interval is None else tuple(int(v) for v in gt_interval),
        gt_point=None if gt_point is None else np.asarray(gt_point, dtype=np.float64),
        alignment_src=None if src is None else _tensor(src, (len(src) // 3, 3), f"{path}.alignment_src"),
        alignment_dst=None if dst is None else _tensor(dst, (len(dst) // 3, 3), f"{path}.alignment_dst"),
    )


# -- track ------------------------------------------------------------------


def save_track(track: TrackOutput, path: str) -> None:
    if not track.results:
        raise SchemaError("track has no per-frame results to save")
    h, w = track.results[0].prob.shape
    frames = []
    for result in track.results:
        frames.append(
            {
                "frame_index": result.frame_index,
                "prob": _flat(result.prob),
                "bbox": None if result.bbox is None else list(result.bbox),
                "s_conf": float(result.s_conf),
            }
        )
    displacements = [
        {"frame_index": int(idx), "delta": _flat(delta)}
        for idx, delta in sorted(track.displacements.items())
    ]
    document = {
        "version": FORMAT_VERSION,
        "kind": "track",
        "canvas": [h, w],
        "frames": frames,
        "peaks": [float(p) for p in track.peaks],
        "interval": None
        if track.interval is None
        else [track.interval.start_frame, track.interval.end_frame],
        "world_point": None if track.world_point is None else _flat(track.world_point),
        "displacements": displacements,
    }
    _atomic_write(path, _dump(document))


def load_track(path: str) -> TrackOutput:
    document = _load_json(path)
    _check_header(document, "track", path)
    h, w = (int(v) for v in _expect(document, "canvas", path))
    results = []
    for i, raw in enumerate(_expect(document, "frames", path)):
        where = f"{path}.frames[{i}]"
        prob = _tensor(_expect(raw, "prob", where), (h, w), f"{where}.prob")
        mask = (prob >= 0.5).astype(np.uint8)
        bbox = raw.get("bbox")
        results.append(
            SegmentationResult(
                prob,
                mask,
                None if bbox is None else tuple(int(v) for v in bbox),
                float(_expect(raw, "s_conf", where)),
                int(_expect(raw, "frame_index", where)),
            )
        )
    interval = document.get("interval")
    world_point = document.get("world_point")
    displacements = {
        int(entry["frame_index"]): np.asarray(entry["delta"], dtype=np.float64)
        for entry in document.get("displacements", [])
    }
    return TrackOutput(
        results,
        None if interval is None else TemporalInterval(int(interval[0]), int(interval[1])),
        [float(p) for p in _expect(document, "peaks", path)],
        None if world_point is None else np.asarray(world_point, dtype=np.float64),
        displacements,
    )


# -- config -----------------------------------------------------------------


def save_config(cfg: PipelineConfig, path: str) -> None:
    document = {"version": FORMAT_VERSION, "kind": "config"}
    document.update(asdict(cfg))
    _atomic_write(path, _dump(document))


def load_config(path: str) -> PipelineConfig:
    document = _load_json(path)
    _check_header(document, "config", path)
    fields = {k: v for k, v in document.items() if k not in ("version", "kind")}
    try:
        return PipelineConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: invalid config: {exc}") from exc

"""Multi-view 3D localization: similarity alignment, pinhole back-projection,
confidence fusion, and weighted aggregation.

Predicted camera geometry lives in an arbitrary reconstruction frame; a
7-DoF similarity transform fitted to matched point pairs maps it into the
benchmark frame. Each detection is lifted to 3D through the pinhole model

    world = T_eta . T_i . (depth(u, v) * K^-1 [u, v, 1])

and the per-view points are averaged with weights that multiply a semantic
confidence (mask probability statistics) with a geometric confidence
exp(-zeta * tau) from the depth-uncertainty map. The aggregate is finally
re-expressed in each camera's coordinates as a relative displacement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import DimensionError, ParameterError

__all__ = [
    "DegenerateGeometryError",
    "InvalidSampleError",
    "CameraFrame",
    "Sim3Transform",
    "ViewContribution",
    "align_sim3",
    "backproject",
    "semantic_confidence",
    "geometric_confidence",
    "aggregate",
    "relative_displacement",
]

ROTATION_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Too few or degenerate correspondences / weights for a unique solution."""


class InvalidSampleError(ValueError):
    """A pixel lookup fell outside the map or hit invalid depth."""


def _check_rotation(r: np.ndarray, tol: float = ROTATION_TOL) -> None:
    if not np.allclose(r.T @ r, np.eye(3), atol=tol):
        raise ParameterError("rotation block is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > 1e-6:
        raise ParameterError(f"rotation block has determinant {np.linalg.det(r):.6f}, not +1")


@dataclass
class CameraFrame:
    """Camera-to-world pose, intrinsics, depth, and depth-uncertainty maps."""

    pose: np.ndarray
    intrinsics: np.ndarray
    depth: np.ndarray
    depth_uncertainty: np.ndarray

    def __post_init__(self) -> None:
        self.pose = np.asarray(self.pose, dtype=np.float64)
        self.intrinsics = np.asarray(self.intrinsics, dtype=np.float64)
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.depth_uncertainty = np.asarray(self.depth_uncertainty, dtype=np.float64)
        if self.pose.shape != (4, 4):
            raise DimensionError(f"pose must be 4x4, got {self.pose.shape}")
        _check_rotation(self.pose[:3, :3])
        if self.intrinsics.shape != (3, 3):
            raise DimensionError(f"intrinsics must be 3x3, got {self.intrinsics.shape}")
        if not np.allclose(self.intrinsics, np.triu(self.intrinsics)):
            raise ParameterError("intrinsics must be upper triangular")
        if self.intrinsics[0, 0] <= 0 or self.intrinsics[1, 1] <= 0:
            raise ParameterError("focal lengths must be positive")
        if self.depth.shape != self.depth_uncertainty.shape:
            raise DimensionError(
                f"depth {self.depth.shape} and uncertainty {self.depth_uncertainty.shape} dims differ"
            )
        if (self.depth_uncertainty < 0).any():
            raise ParameterError("depth uncertainty must be non-negative")


@dataclass
class Sim3Transform:
    """Similarity transform p -> scale * R p + t."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.scale <= 0:
            raise ParameterError(f"scale must be positive, got {self.scale}")
        _check_rotation(self.rotation)

    @classmethod
    def identity(cls) -> "Sim3Transform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.scale * points @ self.rotation.T + self.translation

    def inverse(self) -> "Sim3Transform":
        r_inv = self.rotation.T
        return Sim3Transform(1.0 / self.scale, r_inv, -r_inv @ self.translation / self.scale)

    def compose(self, other: "Sim3Transform") -> "Sim3Transform":
        """Transform equal to applying ``other`` first, then self."""
        return Sim3Transform(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * self.rotation @ other.translation + self.translation,
        )

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.scale * self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass
class ViewContribution:
    """One view's lifted 3D point and its fused aggregation weight."""

    world_point: np.ndarray
    s_conf: float
    g_conf: float
    frame_index: int

    def __post_init__(self) -> None:
        self.world_point = np.asarray(self.world_point, dtype=np.float64).reshape(3)

    @property
    def fused_weight(self) -> float:
        return self.s_conf * self.g_conf


def align_sim3(src: np.ndarray, dst: np.ndarray) -> Sim3Transform:
    """Least-squares similarity transform with T.apply(src) closest to dst.

    Closed-form solution: subtract centroids, take the SVD of the
    cross-covariance, correct a reflection through the determinant sign,
    and read the scale off the variance ratio. Needs at least three
    non-collinear source points.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape != dst.shape:
        raise DimensionError(f"point arrays must both be (N, 3), got {src.shape} and {dst.shape}")
    n = src.shape[0]
    if n < 3:
        raise DegenerateGeometryError(f"need at least 3 point pairs, got {n}")
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    d_src = src - mu_src
    d_dst = dst - mu_dst
    singular = np.linalg.svd(d_src, compute_uv=False)
    if singular[1] <= max(1e-12, 1e-9 * singular[0]):
        raise DegenerateGeometryError("source points are collinear")
    cov = d_dst.T @ d_src / n
    u, d, vt = np.linalg.svd(cov)
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rotation = u @ s @ vt
    var_src = float(np.sum(d_src**2)) / n
    scale = float(np.trace(np.diag(d) @ s)) / var_src
    translation = mu_dst - scale * rotation @ mu_src
    return Sim3Transform(scale, rotation, translation)


def backproject(
    frame: CameraFrame, u: float, v: float, t_eta: Optional[Sim3Transform] = None
) -> np.ndarray:
    """Lift pixel (u, v) through depth, pose, and the alignment transform.

    Depth is read at the nearest pixel; an out-of-bounds pixel or a
    non-positive depth raises InvalidSampleError.
    """
    if t_eta is None:
        t_eta = Sim3Transform.identity()
    h, w = frame.depth.shape
    col = int(round(float(u)))
    row = int(round(float(v)))
    if not (0 <= row < h and 0 <= col < w):
        raise InvalidSampleError(f"pixel ({u}, {v}) is outside the {h}x{w} depth map")
    depth = float(frame.depth[row, col])
    if not np.isfinite(depth) or depth <= 0:
        raise InvalidSampleError(f"invalid depth {depth} at pixel ({u}, {v})")
    ray = np.linalg.solve(frame.intrinsics, np.array([float(u), float(v), 1.0]))
    cam_point = depth * ray
    world = frame.pose[:3, :3] @ cam_point + frame.pose[:3, 3]
    return t_eta.apply(world)


def semantic_confidence(
    prob: np.ndarray,
    mask: np.ndarray,
    lambda_thr: float = 0.5,
    weights: Sequence[float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
) -> float:
    """Convex combination of mean, above-threshold mean, and max mask probability."""
    prob = np.asarray(prob, dtype=np.float64)
    mask = np.asarray(mask)
    if prob.shape != mask.shape:
        raise DimensionError(f"probability {prob.shape} and mask {mask.shape} dims differ")
    phi, psi, mu = (float(x) for x in weights)
    if phi < 0 or psi < 0 or mu < 0 or abs(phi + psi + mu - 1.0) > 1e-9:
        raise ParameterError(f"weights must be non-negative and sum to 1, got {weights}")
    values = prob[mask != 0]
    if values.size == 0:
        return 0.0
    p_av = float(values.mean())
    above = values[values > lambda_thr]
    p_lambda = float(above.mean()) if above.size else 0.0
    p_max = float(values.max())
    return phi * p_av + psi * p_lambda + mu * p_max


def geometric_confidence(tau: float, zeta: float = 1.0) -> float:
    """exp(-zeta * tau): 1 at zero uncertainty, decaying monotonically."""
    if tau < 0:
        raise ParameterError(f"uncertainty must be non-negative, got {tau}")
    if zeta <= 0:
        raise ParameterError(f"zeta must be positive, got {zeta}")
    return float(np.exp(-zeta * tau))


def aggregate(contributions: Sequence[ViewContribution]) -> np.ndarray:
    """Fused-weight average of the per-view world points."""
    if not contributions:
        raise DegenerateGeometryError("no contributions to aggregate")
    weights = np.array([c.fused_weight for c in contributions])
    total = float(weights.sum())
    if total <= 0.0:
        raise DegenerateGeometryError("all fused weights are zero")
    points = np.stack([c.world_point for c in contributions])
    return weights @ points / total


def relative_displacement(
    frame: CameraFrame, world_point: np.ndarray, t_eta: Optional[Sim3Transform] = None
) -> np.ndarray:
    """Express a benchmark-frame point in camera i's coordinates.

    Inverts the alignment transform and then the camera pose, i.e. the
    inverse of the :func:`backproject` chain.
    """
    if t_eta is None:
        t_eta = Sim3Transform.identity()
    point = np.asarray(world_point, dtype=np.float64).reshape(3)
    in_recon = t_eta.inverse().apply(point)
    r = frame.pose[:3, :3]
    return r.T @ (in_recon - frame.pose[:3, 3])

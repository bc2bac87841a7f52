"""Camera geometry and metric measurements in canonical view space.

Conventions: camera axes are x right, y down, z forward (optical axis).
A pose maps camera coordinates to world coordinates (p_world = R @ p_cam + t).
The canonical frame is the camera frame of a chosen reference view; "up" in
world coordinates defaults to -y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WORLD_UP = np.array([0.0, -1.0, 0.0])


class GeometryError(ValueError):
    pass


class NonPositiveDepth(GeometryError):
    pass


class PixelOutOfBounds(GeometryError):
    pass


class DegeneratePose(GeometryError):
    pass


class TooFewPoints(GeometryError):
    pass


class FrameMismatch(GeometryError):
    pass


class CountMismatch(GeometryError):
    pass


class DegenerateCovariance(GeometryError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("image size must be positive")


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rigid transform; rotation checked at construction."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise DegeneratePose("non-finite pose")
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-6:
            raise DegeneratePose("rotation is not orthonormal within 1e-6")
        if np.linalg.det(r) < 0:
            raise DegeneratePose("rotation has negative determinant")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))


@dataclass
class PointCloud:
    """Points (N, 3) in meters plus the frame tag they live in."""

    points: np.ndarray
    frame: str = "canonical"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


def _pts(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.asarray(cloud, dtype=float).reshape(-1, 3)


def back_project(pixel, depth: float, intr: CameraIntrinsics) -> np.ndarray:
    """Lift one pixel to a camera-frame 3D point.

    Args:
        pixel: (u, v) pixel coordinates, u along width, v along height.
        depth: metric depth along the optical axis, > 0.
        intr: pinhole intrinsics.

    Returns:
        (3,) point ((u - cx) * d / fx, (v - cy) * d / fy, d).
    """
    u, v = float(pixel[0]), float(pixel[1])
    if not depth > 0:
        raise NonPositiveDepth(f"depth must be positive, got {depth}")
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise PixelOutOfBounds(f"pixel ({u}, {v}) outside {intr.width}x{intr.height}")
    d = float(depth)
    return np.array([(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d])


def back_project_pixels(uv: np.ndarray, depths: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Vectorized back_project for (N, 2) pixels and (N,) depths."""
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    d = np.asarray(depths, dtype=float).reshape(-1)
    if uv.shape[0] != d.shape[0]:
        raise CountMismatch("pixel and depth counts differ")
    if d.size and not np.all(d > 0):
        raise NonPositiveDepth("all depths must be positive")
    u, v = uv[:, 0], uv[:, 1]
    if u.size and not (
        (u >= 0).all() and (u < intr.width).all() and (v >= 0).all() and (v < intr.height).all()
    ):
        raise PixelOutOfBounds("pixel outside image bounds")
    return np.stack([(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d], axis=1)


def project_points(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Perspective projection of camera-frame points to (N, 2) pixels.

    Depth must be strictly positive; callers that need a softer error map
    NonPositiveDepth to their own signal.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    z = p[:, 2]
    if z.size and not np.all(z > 0):
        raise NonPositiveDepth("point behind or on the camera plane")
    return np.stack([intr.fx * p[:, 0] / z + intr.cx, intr.fy * p[:, 1] / z + intr.cy], axis=1)


def to_canonical(points, ref_pose: CameraPose) -> np.ndarray:
    """World to canonical (reference camera) coordinates: R^T (p - t)."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    out = (p - ref_pose.translation) @ ref_pose.rotation
    return out[0] if single else out


def from_canonical(points, ref_pose: CameraPose) -> np.ndarray:
    """Inverse of to_canonical: R p + t."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    out = p @ ref_pose.rotation.T + ref_pose.translation
    return out[0] if single else out


def _up_basis(up) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal (u, e1, e2) with u = normalized up; deterministic."""
    u = np.asarray(up, dtype=float).reshape(3)
    n = np.linalg.norm(u)
    if n == 0 or not np.all(np.isfinite(u)):
        raise GeometryError("up vector must be finite and nonzero")
    u = u / n
    seed = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = seed - (seed @ u) * u
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return u, e1, e2


def _principal_axes_2d(p2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigenvectors of the 2x2 covariance of centered points.

    Returns (major, minor). atan2(0, 0) = 0 makes the isotropic tie land on
    the +x axis of the projection basis.
    """
    c = p2 - p2.mean(axis=0)
    a = float(np.mean(c[:, 0] * c[:, 0]))
    b = float(np.mean(c[:, 0] * c[:, 1]))
    d = float(np.mean(c[:, 1] * c[:, 1]))
    theta = 0.5 * np.arctan2(2.0 * b, a - d)
    major = np.array([np.cos(theta), np.sin(theta)])
    minor = np.array([-np.sin(theta), np.cos(theta)])
    return major, minor


def object_dims(cloud, up=WORLD_UP) -> tuple[float, float, float]:
    """Metric (height, width, length) of a point cloud.

    Height is the extent along up. Width and length are the extents of the
    points projected onto the plane orthogonal to up, measured along the two
    principal axes of that projection (width >= length). A coplanar cloud has
    height 0; a collinear projection has length 0.

    Args:
        cloud: PointCloud or (N, 3) array, N >= 3.
        up: up direction in the cloud's frame.

    Returns:
        (height, width, length) in meters.
    """
    pts = _pts(cloud)
    if len(pts) < 3:
        raise TooFewPoints(f"need >= 3 points, got {len(pts)}")
    u, e1, e2 = _up_basis(up)
    height = float(np.ptp(pts @ u))
    p2 = np.stack([pts @ e1, pts @ e2], axis=1)
    major, minor = _principal_axes_2d(p2)
    ext_major = float(np.ptp(p2 @ major))
    ext_minor = float(np.ptp(p2 @ minor))
    width, length = max(ext_major, ext_minor), min(ext_major, ext_minor)
    return height, width, length


def centroid_distance(a: PointCloud, b: PointCloud) -> float:
    """Distance between cloud centroids; both clouds must share a frame."""
    if isinstance(a, PointCloud) and isinstance(b, PointCloud) and a.frame != b.frame:
        raise FrameMismatch(f"{a.frame!r} vs {b.frame!r}")
    pa, pb = _pts(a), _pts(b)
    if len(pa) == 0 or len(pb) == 0:
        raise TooFewPoints("empty cloud")
    return float(np.linalg.norm(pa.mean(axis=0) - pb.mean(axis=0)))


def closest_distance(a: PointCloud, b: PointCloud, chunk: int = 256) -> float:
    """Exact minimum pairwise distance between two clouds (brute force).

    Chunked over rows of a so memory stays bounded at chunk * len(b).
    """
    if isinstance(a, PointCloud) and isinstance(b, PointCloud) and a.frame != b.frame:
        raise FrameMismatch(f"{a.frame!r} vs {b.frame!r}")
    pa, pb = _pts(a), _pts(b)
    if len(pa) == 0 or len(pb) == 0:
        raise TooFewPoints("empty cloud")
    best = np.inf
    for i in range(0, len(pa), chunk):
        blk = pa[i : i + chunk]
        d2 = ((blk[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
        best = min(best, float(d2.min()))
    return float(np.sqrt(best))


def _distinct_direction_count(phis: np.ndarray, tol: float = 1e-6) -> int:
    if len(phis) == 0:
        return 0
    s = np.sort(phis)
    return 1 + int(np.sum(np.diff(s) > tol))


def room_footprint(floor_points, wall_normals=None, up=WORLD_UP) -> float:
    """Floor area in square meters from sampled floor points.

    Points are projected onto the horizontal plane (orthogonal to up) and the
    convex hull area is returned. When >= 3 distinct wall normals are given,
    the hull is replaced by the bounding rectangle oriented along the two
    dominant horizontal wall directions (edges snapped to the walls).

    Args:
        floor_points: PointCloud or (N, 3) array, N >= 10.
        wall_normals: optional (K, 3) wall normal vectors.
        up: up direction in the points' frame.
    """
    pts = _pts(floor_points)
    if len(pts) < 10:
        raise TooFewPoints(f"need >= 10 floor points, got {len(pts)}")
    u, e1, e2 = _up_basis(up)
    p2 = np.stack([pts @ e1, pts @ e2], axis=1)

    if wall_normals is not None:
        normals = np.asarray(wall_normals, dtype=float).reshape(-1, 3)
        horiz = normals - (normals @ u)[:, None] * u[None, :]
        keep = np.linalg.norm(horiz, axis=1) > 1e-9
        horiz = horiz[keep]
        if len(horiz) >= 3:
            d2 = np.stack([horiz @ e1, horiz @ e2], axis=1)
            d2 /= np.linalg.norm(d2, axis=1, keepdims=True)
            phi_full = np.mod(np.arctan2(d2[:, 1], d2[:, 0]), 2 * np.pi)
            if _distinct_direction_count(phi_full) >= 3:
                # axis families: fold opposite normals together
                phi_axis = np.mod(phi_full, np.pi)
                keys = np.round(phi_axis, 3)
                uniq, counts = np.unique(keys, return_counts=True)
                order = np.lexsort((uniq, -counts))
                a1 = float(uniq[order[0]])
                if len(uniq) > 1 and abs(np.cos(float(uniq[order[1]]) - a1)) < 0.1:
                    a2 = float(uniq[order[1]])
                else:
                    a2 = a1 + np.pi / 2.0
                ax1 = np.array([np.cos(a1), np.sin(a1)])
                ax2 = np.array([np.cos(a2), np.sin(a2)])
                return float(np.ptp(p2 @ ax1) * np.ptp(p2 @ ax2))

    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(p2)
    except QhullError:
        return 0.0  # collinear footprint
    return float(hull.volume)  # "volume" of a 2D hull is its area


def rotation_angle(cloud0, cloud1) -> float:
    """Rigid rotation angle (degrees) between two corresponded clouds.

    Kabsch: H = X0c^T X1c, R = V diag(1, 1, sign(det V U^T)) U^T, angle from
    arccos((trace R - 1) / 2). Correspondence is by index.
    """
    p0, p1 = _pts(cloud0), _pts(cloud1)
    if len(p0) != len(p1):
        raise CountMismatch(f"{len(p0)} vs {len(p1)} points")
    if len(p0) == 0:
        raise TooFewPoints("empty cloud")
    c0 = p0 - p0.mean(axis=0)
    c1 = p1 - p1.mean(axis=0)
    h = c0.T @ c1
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateCovariance("cross-covariance rank <= 1; rotation not identifiable")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    cos_a = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(cos_a)))

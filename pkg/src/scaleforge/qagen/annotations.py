"""Scene annotations: the bridge between raw scene files and QA generation.

Lifts masks + depth + poses into per-object point clouds in the canonical
frame (the reference camera's coordinates), associates detection tracks with
mask instances, and computes the scene-level statistics that drive scale
bucketing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..formats import SceneBundle
from ..geometry import (
    CameraIntrinsics,
    CameraPose,
    back_project_pixels,
    from_canonical,
    to_canonical,
)
from ..planner import Aabb3
from ..tracking import AssociationConfig, Track, associate
from .buckets import SceneStats, scale_bucket

FLOOR_CLASS = "floor"


class AnnotationError(ValueError):
    pass


def p95(values: np.ndarray) -> float:
    """95th percentile: element at floor(0.95*(n-1)) of the sorted values."""
    flat = np.asarray(values, dtype=float).ravel()
    flat = flat[np.isfinite(flat)]
    if flat.size == 0:
        raise AnnotationError("p95 of empty/all-invalid values")
    idx = int(np.floor(0.95 * (flat.size - 1)))
    return float(np.partition(flat, idx)[idx])


def mask_bbox(mask: np.ndarray, instance_id: int) -> tuple[float, float, float, float] | None:
    rows, cols = np.nonzero(mask == instance_id)
    if rows.size == 0:
        return None
    return (float(cols.min()), float(rows.min()), float(cols.max() + 1), float(rows.max() + 1))


def gravity_basis(up: np.ndarray) -> np.ndarray:
    """Rotation (rows = new axes) from canonical into a gravity-aligned frame.

    The new y axis points straight down so box faces, support tests, and
    plan directions are meaningful even when the reference camera is tilted.
    The new x axis is the canonical x axis made orthogonal to gravity (the
    canonical z axis when the camera looks straight down).
    """
    d = -np.asarray(up, dtype=float)
    d = d / np.linalg.norm(d)
    r = np.array([1.0, 0.0, 0.0])
    r = r - (r @ d) * d
    if np.linalg.norm(r) < 1e-6:
        r = np.array([0.0, 0.0, 1.0])
        r = r - (r @ d) * d
    r = r / np.linalg.norm(r)
    f = np.cross(r, d)
    return np.stack([r, d, f])


@dataclass
class ObjectAnnotation:
    instance_id: int
    class_name: str
    # frame -> (N,3) canonical-frame points back-projected from that frame
    frames: dict[int, np.ndarray] = field(default_factory=dict)
    track: Track | None = None
    # canonical -> gravity-aligned rotation shared by the whole scene
    grav: np.ndarray = field(default_factory=lambda: np.eye(3))

    @property
    def visible_frames(self) -> list[int]:
        return sorted(self.frames)

    @property
    def cloud(self) -> np.ndarray:
        """All observed points across frames, canonical coordinates."""
        return np.concatenate([self.frames[f] for f in self.visible_frames])

    @property
    def centroid(self) -> np.ndarray:
        return self.cloud.mean(axis=0)

    @property
    def gcentroid(self) -> np.ndarray:
        """Centroid in the gravity-aligned frame (matches aabb coordinates)."""
        return self.grav @ self.centroid

    @property
    def aabb(self) -> Aabb3:
        """Bounding box in the gravity-aligned frame (y points down)."""
        cloud = self.cloud @ self.grav.T
        return Aabb3(cloud.min(axis=0), cloud.max(axis=0), name=self.class_name)

    @property
    def extent(self) -> float:
        box = self.aabb
        return float(np.max(box.max_corner - box.min_corner))


@dataclass
class SceneAnnotations:
    scene_id: str
    intrinsics: CameraIntrinsics
    poses: list[CameraPose]
    objects: dict[int, ObjectAnnotation]       # non-floor instances
    floor: ObjectAnnotation | None
    tracks: list[Track]
    masks: np.ndarray | None
    stats: SceneStats
    bucket: str
    up: np.ndarray                             # world-up expressed in canonical coords
    grav: np.ndarray                           # canonical -> gravity-aligned rotation
    meta: dict

    @property
    def n_frames(self) -> int:
        return len(self.poses)

    def camera_cloud(self, obj: ObjectAnnotation, frame: int) -> np.ndarray:
        """The object's union cloud in the given frame's camera coordinates.

        Rows correspond across frames (same underlying points), which makes
        the output directly usable for rotation estimation.
        """
        world = from_canonical(obj.cloud, self.poses[0])
        return to_canonical(world, self.poses[frame])

    def object_named(self, class_name: str) -> ObjectAnnotation:
        for oid in sorted(self.objects):
            if self.objects[oid].class_name == class_name:
                return self.objects[oid]
        raise AnnotationError(f"no object of class {class_name!r}")


def _subsample_rowmajor(rows: np.ndarray, cols: np.ndarray, max_points: int):
    n = rows.size
    if n <= max_points:
        return rows, cols
    stride = int(np.ceil(n / max_points))
    return rows[::stride], cols[::stride]


def _match_tracks(
    objects: dict[int, ObjectAnnotation],
    tracks: list[Track],
    masks: np.ndarray,
    min_iou: float = 0.3,
) -> None:
    """Attach each track to the mask instance it overlaps most."""
    from ..tracking import iou as box_iou

    for track in tracks:
        best_id, best_score = None, min_iou
        for oid, obj in objects.items():
            scores = []
            for frame, bbox in track.observations.items():
                mb = mask_bbox(masks[frame], oid)
                if mb is not None:
                    scores.append(box_iou(bbox, mb))
            if scores and float(np.mean(scores)) > best_score:
                best_id, best_score = oid, float(np.mean(scores))
        if best_id is not None and objects[best_id].track is None:
            objects[best_id].track = track


def annotate_scene(
    bundle: SceneBundle,
    *,
    cfg: AssociationConfig | None = None,
    max_points: int = 400,
) -> SceneAnnotations:
    """Build full annotations from a loaded scene.

    Uses the consistency-smoothed depth when it was prepared, the raw depth
    otherwise.  Raises OutOfRange (from the bucket rules) for scenes whose
    scale the pipeline does not support.
    """
    if bundle.masks is None:
        raise AnnotationError("scene has no instance masks")
    depth = bundle.depth_consistent if bundle.depth_consistent is not None else bundle.depth
    if depth is None:
        raise AnnotationError("scene has no depth")

    cfg = cfg or AssociationConfig()
    pose0 = bundle.poses[0]
    up = pose0.rotation.T @ np.array([0.0, -1.0, 0.0])
    grav = gravity_basis(up)

    per_instance: dict[int, dict[int, np.ndarray]] = {}
    for frame in range(bundle.n_frames):
        mask = bundle.masks[frame]
        dmap = depth[frame]
        for oid in np.unique(mask):
            if oid == 0:
                continue
            rows, cols = np.nonzero((mask == oid) & np.isfinite(dmap) & (dmap > 0))
            if rows.size == 0:
                continue
            rows, cols = _subsample_rowmajor(rows, cols, max_points)
            uv = np.stack([cols, rows], axis=1).astype(float) + 0.5  # pixel centers
            cam = back_project_pixels(uv, dmap[rows, cols].astype(float), bundle.intrinsics)
            world = from_canonical(cam, bundle.poses[frame])
            per_instance.setdefault(int(oid), {})[frame] = to_canonical(world, pose0)

    tracks = associate(bundle.detections, cfg) if bundle.detections else []

    objects: dict[int, ObjectAnnotation] = {}
    floor = None
    for oid, frames in sorted(per_instance.items()):
        class_name = bundle.instances.get(oid, "")
        ann = ObjectAnnotation(instance_id=oid, class_name=class_name, frames=frames, grav=grav)
        if class_name == FLOOR_CLASS:
            floor = ann
        else:
            objects[oid] = ann

    _match_tracks(objects, tracks, bundle.masks)
    # unnamed instances fall back to the class of their matched track
    for obj in objects.values():
        if not obj.class_name and obj.track is not None:
            obj.class_name = obj.track.class_name
    named = {oid: o for oid, o in objects.items() if o.class_name}

    if not named:
        raise AnnotationError("no named object instances")

    valid_depth = depth[np.isfinite(depth) & (depth > 0)]
    meta = bundle.meta or {}
    stats = SceneStats(
        p95_depth=p95(valid_depth),
        max_object_extent=max(o.extent for o in named.values()),
        camera_height_m=meta.get("camera_height_m"),
        indoor=bool(meta.get("indoor", False)),
        source=str(meta.get("source", "")),
    )
    return SceneAnnotations(
        scene_id=bundle.scene_id,
        intrinsics=bundle.intrinsics,
        poses=bundle.poses,
        objects=named,
        floor=floor,
        tracks=tracks,
        masks=bundle.masks,
        stats=stats,
        bucket=scale_bucket(stats),
        up=up,
        grav=grav,
        meta=meta,
    )

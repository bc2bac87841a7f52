"""Deterministic synthetic scenes for tests, demos, and golden fixtures.

Renders axis-aligned boxes with an analytic ray tracer: per-pixel depth is
the nearest box entry distance along the camera ray (NaN where nothing is
hit), masks carry instance ids, detections are mask bounding boxes plus a
couple of low-score junk rows.  Everything is a pure function of the seed,
so two builds of a fixture directory are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .formats import save_scene_json, write_jsonl, write_mask, write_tensor
from .geometry import CameraIntrinsics, CameraPose

_EPS = 1e-12


def _look_at(eye: np.ndarray, target: np.ndarray) -> CameraPose:
    """Camera-to-world pose with +z toward target, +y worldwards down."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    down_hint = np.array([0.0, 1.0, 0.0])
    right = np.cross(down_hint, fwd)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    r = np.stack([right, down, fwd], axis=1)
    return CameraPose(r, eye)


def _ray_dirs(intr: CameraIntrinsics) -> np.ndarray:
    """Unnormalized camera-frame ray directions (H*W, 3) with z = 1.

    With z fixed at 1, the ray parameter t equals camera-frame depth.
    """
    u = (np.arange(intr.width) + 0.5 - intr.cx) / intr.fx
    v = (np.arange(intr.height) + 0.5 - intr.cy) / intr.fy
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv, np.ones_like(uu)], axis=-1).reshape(-1, 3)


def _trace(boxes: np.ndarray, origin: np.ndarray, dirs: np.ndarray):
    """Nearest-hit depth and box index per ray (slab method, z-buffered)."""
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_id = np.zeros(n, dtype=np.int64)  # 0 = background
    safe = np.where(np.abs(dirs) < _EPS, _EPS, dirs)
    for k, (bmin, bmax) in enumerate(boxes):
        t0 = (bmin[None, :] - origin[None, :]) / safe
        t1 = (bmax[None, :] - origin[None, :]) / safe
        tn = np.minimum(t0, t1).max(axis=1)
        tf = np.maximum(t0, t1).min(axis=1)
        hit = (tn <= tf) & (tn > 0)
        closer = hit & (tn < best_t)
        best_t[closer] = tn[closer]
        best_id[closer] = k + 1
    return best_t, best_id


def render_scene(
    boxes: dict[int, tuple[np.ndarray, np.ndarray]],
    intr: CameraIntrinsics,
    poses: list[CameraPose],
):
    """Depth (T,H,W) float with NaN background and (T,H,W) uint16 id masks."""
    ids = sorted(boxes)
    arr = np.array([(boxes[i][0], boxes[i][1]) for i in ids], dtype=float)
    dirs_cam = _ray_dirs(intr)
    depth = np.full((len(poses), intr.height, intr.width), np.nan)
    masks = np.zeros((len(poses), intr.height, intr.width), dtype=np.uint16)
    for t, pose in enumerate(poses):
        dirs_world = dirs_cam @ pose.rotation.T
        ts, ks = _trace(arr, pose.translation, dirs_world)
        hit = np.isfinite(ts)
        d = np.where(hit, ts, np.nan).reshape(intr.height, intr.width)
        m = np.zeros(len(ts), dtype=np.uint16)
        m[hit] = np.array([0] + ids, dtype=np.uint16)[ks[hit]]
        depth[t] = d
        masks[t] = m.reshape(intr.height, intr.width)
    return depth, masks


def _detections_from_masks(
    masks: np.ndarray, instances: dict[int, str], score: float = 0.9
) -> list[dict]:
    rows = []
    for frame in range(masks.shape[0]):
        for oid in sorted(instances):
            ys, xs = np.nonzero(masks[frame] == oid)
            if ys.size == 0:
                continue
            rows.append({
                "frame": frame,
                "class_name": instances[oid],
                "bbox": [float(xs.min()), float(ys.min()),
                         float(xs.max() + 1), float(ys.max() + 1)],
                "score": score,
            })
    return rows


def _write_scene(
    out_dir,
    scene_id: str,
    intr: CameraIntrinsics,
    poses: list[CameraPose],
    boxes: dict[int, tuple[np.ndarray, np.ndarray]],
    instances: dict[int, str],
    meta: dict,
    seed: int,
    depth_noise: float,
) -> Path:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    depth_true, masks = render_scene(boxes, intr, poses)

    rng = np.random.default_rng(seed)
    noise = rng.uniform(-depth_noise, depth_noise, size=depth_true.shape)
    measured = depth_true + np.where(np.isfinite(depth_true), noise, 0.0)

    write_tensor(root / "depth.svdf", measured.astype(np.float32))
    write_tensor(root / "depth_ref.svdf", depth_true.astype(np.float32))

    mask_dir = root / "masks"
    mask_dir.mkdir(exist_ok=True)
    for t in range(masks.shape[0]):
        write_mask(mask_dir / f"frame_{t:03d}.pgm", masks[t])

    detections = _detections_from_masks(masks, instances)
    # junk detections that the score filter must reject
    for frame in range(0, masks.shape[0], 5):
        detections.append({
            "frame": frame,
            "class_name": "ghost",
            "bbox": [2.0, 2.0, 40.0, 40.0],
            "score": 0.2,
        })
    detections.sort(key=lambda r: (r["frame"], r["class_name"], r["bbox"]))
    write_jsonl(root / "detections.jsonl", detections)

    save_scene_json(root, {
        "scene_id": scene_id,
        "intrinsics": {
            "fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
            "width": intr.width, "height": intr.height,
        },
        "poses": [
            {"R": [float(x) for x in p.rotation.reshape(-1)],
             "t": [float(x) for x in p.translation]}
            for p in poses
        ],
        "files": {
            "depth": "depth.svdf",
            "depth_ref": "depth_ref.svdf",
            "masks": "masks",
            "detections": "detections.jsonl",
        },
        "instances": {str(k): v for k, v in instances.items()},
        "meta": meta,
    })
    return root


def build_tabletop_scene(out_dir, seed: int = 7, n_frames: int = 20) -> Path:
    """The golden desk scene: seven boxes on a table, panning camera.

    The cup rests on the box (support), which rests on the table, giving a
    cup-table stacking chain.  The camera pans left to right, so the book,
    bottle, and right plant enter the view on later frames.
    """
    intr = CameraIntrinsics(fx=190.0, fy=160.0, cx=80.0, cy=60.0, width=160, height=120)

    # world frame: y points down, the table top is the y=0 plane
    def box(cx, cz, w, h, d):
        return (np.array([cx - w / 2, -h, cz - d / 2]),
                np.array([cx + w / 2, 0.0, cz + d / 2]))

    boxes = {
        1: (np.array([-0.60, 0.0, -0.40]), np.array([0.60, 0.04, 0.40])),  # table slab
        2: box(0.02, 0.10, 0.36, 0.36, 0.36),                               # box, center stage
        3: (np.array([-0.06, -0.52, 0.02]), np.array([0.10, -0.36, 0.18])),  # cup on box
        4: box(-0.38, -0.20, 0.22, 0.05, 0.16),                             # book, exits left
        5: box(0.38, 0.15, 0.10, 0.30, 0.10),                               # bottle, enters
        6: box(0.50, -0.12, 0.20, 0.32, 0.20),                              # plant, enters late
        7: box(-0.50, 0.22, 0.20, 0.32, 0.20),                              # plant, exits
    }
    instances = {1: "table", 2: "box", 3: "cup", 4: "book", 5: "bottle",
                 6: "plant", 7: "plant"}

    poses = []
    for t in range(n_frames):
        s = t / (n_frames - 1)
        eye = np.array([-0.30 + 0.60 * s, -0.55, -0.95])
        target = np.array([-0.25 + 0.75 * s, -0.25, 0.0])
        poses.append(_look_at(eye, target))

    return _write_scene(
        out_dir, "desk01", intr, poses, boxes, instances,
        meta={"source": "wild", "indoor": False},
        seed=seed, depth_noise=0.008,
    )


def build_room_scene(out_dir, seed: int = 11, n_frames: int = 20) -> Path:
    """A wild-indoor room: floor, two walls, and four furniture boxes."""
    intr = CameraIntrinsics(fx=180.0, fy=150.0, cx=80.0, cy=60.0, width=160, height=120)

    def furniture(cx, cz, w, h, d):
        return (np.array([cx - w / 2, -h, cz - d / 2]),
                np.array([cx + w / 2, 0.0, cz + d / 2]))

    boxes = {
        1: (np.array([-2.5, 0.0, -1.0]), np.array([2.5, 0.12, 3.0])),      # floor slab
        2: (np.array([-2.5, -2.6, 3.0]), np.array([2.5, 0.0, 3.2])),       # back wall
        3: (np.array([-2.7, -2.6, -1.0]), np.array([-2.5, 0.0, 3.0])),     # left wall
        4: furniture(-1.5, 2.2, 2.0, 0.85, 0.9),                           # sofa
        5: furniture(1.3, 2.3, 1.4, 0.75, 0.7),                            # desk
        6: furniture(1.7, 1.2, 0.5, 0.95, 0.5),                            # chair
        7: furniture(-0.4, 1.0, 0.4, 1.5, 0.4),                            # lamp
    }
    instances = {1: "floor", 2: "wall", 3: "wall", 4: "sofa", 5: "desk",
                 6: "chair", 7: "lamp"}

    poses = []
    for t in range(n_frames):
        s = t / (n_frames - 1)
        eye = np.array([-1.0 + 1.6 * s, -1.40, -0.55])
        target = np.array([-0.8 + 1.8 * s, -0.70, 2.2])
        poses.append(_look_at(eye, target))

    return _write_scene(
        out_dir, "room01", intr, poses, boxes, instances,
        meta={"source": "wild", "indoor": True},
        seed=seed, depth_noise=0.01,
    )

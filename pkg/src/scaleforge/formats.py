"""On-disk formats: SVDF tensors, 16-bit PGM masks, scene bundles, JSONL.

SVDF is the little-endian binary tensor format used for depth sequences and,
with T = 1, for fusion parameter matrices: magic "SVDF", u32 version, u32
T/H/W, then T*H*W row-major float32 values. NaN marks invalid samples.

Instance masks are one binary PGM (P5, maxval 65535, big-endian samples) per
frame; pixel value 0 is background, k > 0 is instance id k. Frame order is
the lexicographic filename order inside the masks directory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, CameraPose
from .tracking import Detection

SVDF_MAGIC = b"SVDF"
SVDF_VERSION = 1


class FormatError(ValueError):
    pass


def write_tensor(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise FormatError(f"tensor must be 2D or 3D, got shape {arr.shape}")
    t, h, w = arr.shape
    data = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(SVDF_MAGIC)
        f.write(struct.pack("<IIII", SVDF_VERSION, t, h, w))
        f.write(data.tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(20)
        if len(head) < 20 or head[:4] != SVDF_MAGIC:
            raise FormatError(f"{path}: not an SVDF tensor")
        version, t, h, w = struct.unpack("<IIII", head[4:])
        if version != SVDF_VERSION:
            raise FormatError(f"{path}: unsupported SVDF version {version}")
        payload = f.read(4 * t * h * w)
        if len(payload) != 4 * t * h * w:
            raise FormatError(f"{path}: truncated SVDF payload")
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after SVDF payload")
    return np.frombuffer(payload, dtype="<f4").reshape(t, h, w).copy()


def write_mask(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise FormatError(f"mask must be 2D, got shape {mask.shape}")
    if mask.min() < 0 or mask.max() > 65535:
        raise FormatError("mask values must fit uint16")
    h, w = mask.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(np.ascontiguousarray(mask, dtype=">u2").tobytes())


def _pgm_tokens(f, count: int) -> list[int]:
    # header tokens separated by whitespace; '#' starts a comment line
    tokens: list[int] = []
    while len(tokens) < count:
        ch = f.read(1)
        if not ch:
            raise FormatError("truncated PGM header")
        if ch.isspace():
            continue
        if ch == b"#":
            while ch and ch != b"\n":
                ch = f.read(1)
            continue
        tok = ch
        while True:
            ch = f.read(1)
            if not ch or ch.isspace():
                break
            tok += ch
        tokens.append(int(tok))
    return tokens


def read_mask(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P5":
            raise FormatError(f"{path}: not a binary PGM")
        w, h, maxval = _pgm_tokens(f, 3)
        if maxval != 65535:
            raise FormatError(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
        payload = f.read(2 * w * h)
        if len(payload) != 2 * w * h:
            raise FormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload, dtype=">u2").reshape(h, w).astype(np.uint16)


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{ln}: bad JSON line: {e}") from None
    return rows


def write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            f.write("\n")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats as %.6f fixed point."""
    out: list[str] = []
    _emit(obj, out)
    return "".join(out) + "\n"


def _emit(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(f"{float(obj):.6f}")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k), ensure_ascii=False))
            out.append(": ")
            _emit(obj[k], out)
        out.append("}")
    else:
        raise FormatError(f"cannot serialize {type(obj).__name__}")


@dataclass
class SceneBundle:
    """A scene directory loaded into memory."""

    scene_id: str
    intrinsics: CameraIntrinsics
    poses: list[CameraPose]
    root: Path
    depth: np.ndarray | None = None          # (T, H, W) float32, NaN invalid
    depth_ref: np.ndarray | None = None      # relative depth, same layout
    depth_consistent: np.ndarray | None = None
    masks: np.ndarray | None = None          # (T, H, W) uint16 instance ids
    detections: list[Detection] = field(default_factory=list)
    instances: dict[int, str] = field(default_factory=dict)  # id -> class name
    meta: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.poses)


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise FormatError(f"{where}: missing key {key!r}")
    return d[key]


def load_scene(scene_dir, *, load_consistent: bool = False) -> SceneBundle:
    """Load scene.json and every file it references.

    With load_consistent=True the prepared depth (depth_consistent.svdf) is
    required and loaded in place of nothing; generation runs on it.
    """
    root = Path(scene_dir)
    scene_path = root / "scene.json"
    if not scene_path.exists():
        raise FormatError(f"{scene_path}: scene.json not found")
    try:
        doc = json.loads(scene_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{scene_path}: invalid JSON: {e}") from None

    scene_id = _require(doc, "scene_id", "scene.json")
    intr_doc = _require(doc, "intrinsics", "scene.json")
    try:
        intr = CameraIntrinsics(
            fx=float(_require(intr_doc, "fx", "intrinsics")),
            fy=float(_require(intr_doc, "fy", "intrinsics")),
            cx=float(_require(intr_doc, "cx", "intrinsics")),
            cy=float(_require(intr_doc, "cy", "intrinsics")),
            width=int(_require(intr_doc, "width", "intrinsics")),
            height=int(_require(intr_doc, "height", "intrinsics")),
        )
    except ValueError as e:
        raise FormatError(f"scene.json: bad intrinsics: {e}") from None

    poses = []
    for i, p in enumerate(_require(doc, "poses", "scene.json")):
        r = np.asarray(_require(p, "R", f"poses[{i}]"), dtype=float).reshape(3, 3)
        t = np.asarray(_require(p, "t", f"poses[{i}]"), dtype=float)
        try:
            poses.append(CameraPose(r, t))
        except ValueError as e:
            raise FormatError(f"scene.json poses[{i}]: {e}") from None

    files = doc.get("files", {})
    bundle = SceneBundle(
        scene_id=scene_id,
        intrinsics=intr,
        poses=poses,
        root=root,
        instances={int(k): str(v) for k, v in doc.get("instances", {}).items()},
        meta=doc.get("meta", {}),
    )

    if "depth" in files:
        bundle.depth = read_tensor(root / files["depth"])
    if "depth_ref" in files:
        bundle.depth_ref = read_tensor(root / files["depth_ref"])
    if load_consistent:
        cpath = root / "depth_consistent.svdf"
        if not cpath.exists():
            raise FormatError(f"{cpath}: prepared depth missing (run prepare first)")
        bundle.depth_consistent = read_tensor(cpath)

    if "masks" in files:
        mask_dir = root / files["masks"]
        if not mask_dir.is_dir():
            raise FormatError(f"{mask_dir}: masks directory missing")
        frames = sorted(mask_dir.glob("*.pgm"))
        if not frames:
            raise FormatError(f"{mask_dir}: no PGM masks")
        bundle.masks = np.stack([read_mask(p) for p in frames])

    if "detections" in files:
        det_rows = read_jsonl(root / files["detections"])
        dets = []
        for i, row in enumerate(det_rows):
            try:
                dets.append(Detection(
                    frame=int(row["frame"]),
                    class_name=str(row["class_name"]),
                    bbox=tuple(float(x) for x in row["bbox"]),
                    score=float(row.get("score", 1.0)),
                ))
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"detections.jsonl row {i}: {e}") from None
        bundle.detections = dets

    for name, arr in (("depth", bundle.depth), ("depth_ref", bundle.depth_ref),
                      ("masks", bundle.masks), ("depth_consistent", bundle.depth_consistent)):
        if arr is not None:
            if arr.shape[0] != bundle.n_frames:
                raise FormatError(f"{name}: {arr.shape[0]} frames but {bundle.n_frames} poses")
            if arr.shape[1] != intr.height or arr.shape[2] != intr.width:
                raise FormatError(f"{name}: shape {arr.shape[1:]} vs image {intr.height}x{intr.width}")
    return bundle


def save_scene_json(scene_dir, doc: dict) -> None:
    Path(scene_dir, "scene.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

"""Greedy IoU tracking with constant-velocity prediction, plus the
counting/ordering/matching queries built on confirmed tracks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrackingError(ValueError):
    pass


class SceneRejected(TrackingError):
    pass


class ClassAbsent(TrackingError):
    pass


class NoAnchorTrack(TrackingError):
    pass


@dataclass(frozen=True)
class Detection:
    frame: int
    class_name: str
    bbox: tuple[float, float, float, float]  # x1, y1, x2, y2
    score: float = 1.0


@dataclass
class AssociationConfig:
    score_min: float = 0.3
    iou_min: float = 0.4
    center_dist_max: float = 32.0
    confirm_count: int = 10
    scene_min_objects: int = 2
    scene_max_objects: int = 10
    bbox_min_side: float = 32.0
    miss_max: int = 5
    consecutive: bool = False  # stricter confirmation: longest consecutive run


@dataclass
class Track:
    track_id: int
    class_name: str
    observations: dict[int, tuple[float, float, float, float]] = field(default_factory=dict)
    confirmed: bool = False

    @property
    def first_frame(self) -> int:
        return min(self.observations)

    @property
    def last_frame(self) -> int:
        return max(self.observations)

    def bbox_at(self, frame: int):
        return self.observations.get(frame)


def iou(a, b) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    ix1, iy1 = max(ax1, bx1), max(ay1, by1)
    ix2, iy2 = min(ax2, bx2), min(ay2, by2)
    iw, ih = max(0.0, ix2 - ix1), max(0.0, iy2 - iy1)
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0:
        return 0.0
    return inter / union


def _center(bbox):
    return (0.5 * (bbox[0] + bbox[2]), 0.5 * (bbox[1] + bbox[3]))


def _predict_bbox(track: Track, frame: int):
    """Constant-velocity center extrapolation; size from the last box."""
    frames = sorted(track.observations)
    last = track.observations[frames[-1]]
    cx, cy = _center(last)
    if len(frames) >= 2:
        prev = track.observations[frames[-2]]
        px, py = _center(prev)
        dt = frames[-1] - frames[-2]
        vx, vy = (cx - px) / dt, (cy - py) / dt
        gap = frame - frames[-1]
        cx, cy = cx + vx * gap, cy + vy * gap
    hw, hh = 0.5 * (last[2] - last[0]), 0.5 * (last[3] - last[1])
    return (cx - hw, cy - hh, cx + hw, cy + hh)


def _canonical_order(dets):
    return sorted(dets, key=lambda d: (d.class_name, d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3], d.score))


def _confirm(track: Track, cfg: AssociationConfig) -> bool:
    if not cfg.consecutive:
        return len(track.observations) >= cfg.confirm_count
    frames = sorted(track.observations)
    best = run = 1
    for a, b in zip(frames, frames[1:]):
        run = run + 1 if b == a + 1 else 1
        best = max(best, run)
    return best >= cfg.confirm_count


def associate(detections, cfg: AssociationConfig | None = None) -> list[Track]:
    """Associate detections into tracks frame by frame.

    detections: flat iterable of Detection (any order; grouped by .frame
    internally) or a list of per-frame lists where the index is the frame.

    Candidate (track, detection) pairs within a frame are same-class only and
    are taken greedily in descending IoU between the predicted and detected
    box (ties: smaller predicted-center distance, then detection index after
    the canonical sort, then track id). A pair is accepted when IoU >=
    iou_min or the center distance is <= center_dist_max. Unmatched
    detections open new tracks; a track is dropped from matching after
    miss_max consecutive unmatched frames.
    """
    cfg = cfg or AssociationConfig()
    detections = list(detections)
    if detections and isinstance(detections[0], (list, tuple)) and not isinstance(detections[0], Detection):
        flat = [
            Detection(f, d.class_name, d.bbox, d.score) if d.frame != f else d
            for f, frame_dets in enumerate(detections)
            for d in frame_dets
        ]
    else:
        flat = list(detections)
    flat = [d for d in flat if d.score >= cfg.score_min]

    by_frame: dict[int, list[Detection]] = {}
    for d in flat:
        by_frame.setdefault(d.frame, []).append(d)

    tracks: list[Track] = []
    # last frame each track was matched; misses count in frames of wall
    # clock, so gaps with no detections at all still retire stale tracks
    last_hit: dict[int, int] = {}
    next_id = 0
    for frame in sorted(by_frame):
        dets = _canonical_order(by_frame[frame])
        live = [t for t in tracks if frame - last_hit[t.track_id] <= cfg.miss_max]

        candidates = []
        for t in live:
            pred = _predict_bbox(t, frame)
            pc = _center(pred)
            for di, d in enumerate(dets):
                if d.class_name != t.class_name:
                    continue
                ov = iou(pred, d.bbox)
                dc = _center(d.bbox)
                dist = float(np.hypot(pc[0] - dc[0], pc[1] - dc[1]))
                if ov >= cfg.iou_min or dist <= cfg.center_dist_max:
                    candidates.append((-ov, dist, di, t.track_id, t))
        candidates.sort(key=lambda c: c[:4])

        used_dets: set[int] = set()
        used_tracks: set[int] = set()
        for neg_ov, dist, di, tid, t in candidates:
            if di in used_dets or tid in used_tracks:
                continue
            used_dets.add(di)
            used_tracks.add(tid)
            t.observations[frame] = tuple(dets[di].bbox)
            last_hit[tid] = frame

        for di, d in enumerate(dets):
            if di not in used_dets:
                t = Track(next_id, d.class_name, {frame: tuple(d.bbox)})
                tracks.append(t)
                last_hit[next_id] = frame
                next_id += 1

    for t in tracks:
        t.confirmed = _confirm(t, cfg)
    return tracks


def _median_min_side(track: Track) -> float:
    sides = sorted(min(b[2] - b[0], b[3] - b[1]) for b in track.observations.values())
    return sides[(len(sides) - 1) // 2]  # lower median


def count_confirmed(tracks: list[Track], cfg: AssociationConfig | None = None) -> dict[str, int]:
    """Per-class counts of confirmed, size-passing tracks.

    Raises SceneRejected when the total falls outside
    [scene_min_objects, scene_max_objects].
    """
    cfg = cfg or AssociationConfig()
    counted = [
        t for t in tracks
        if t.confirmed and _median_min_side(t) >= cfg.bbox_min_side
    ]
    if not cfg.scene_min_objects <= len(counted) <= cfg.scene_max_objects:
        raise SceneRejected(
            f"{len(counted)} countable objects outside "
            f"[{cfg.scene_min_objects}, {cfg.scene_max_objects}]"
        )
    counts: dict[str, int] = {}
    for t in sorted(counted, key=lambda t: (t.class_name, t.track_id)):
        counts[t.class_name] = counts.get(t.class_name, 0) + 1
    return counts


def appearance_order(tracks: list[Track], classes: list[str]) -> list[str]:
    """Classes ordered by the first frame of their earliest confirmed track.

    Ties go to the lower track id. ClassAbsent if a queried class has no
    confirmed track.
    """
    firsts = []
    for cls in classes:
        cand = [t for t in tracks if t.confirmed and t.class_name == cls]
        if not cand:
            raise ClassAbsent(f"no confirmed track for class {cls!r}")
        best = min(cand, key=lambda t: (t.first_frame, t.track_id))
        firsts.append((best.first_frame, best.track_id, cls))
    firsts.sort()
    return [cls for _, _, cls in firsts]


def match_instance(first_bbox, candidate_bbox, candidate_frame: int,
                   tracks: list[Track], first_frame: int = 0,
                   iou_thresh: float = 0.5) -> bool:
    """Same-instance test across frames via track identity.

    The anchor is the track whose box at first_frame best overlaps first_bbox
    with IoU >= iou_thresh (NoAnchorTrack otherwise). Returns True iff the
    candidate box overlaps the same track at candidate_frame with IoU >=
    iou_thresh.
    """
    best, best_ov = None, 0.0
    for t in tracks:
        b = t.bbox_at(first_frame)
        if b is None:
            continue
        ov = iou(b, first_bbox)
        if ov > best_ov or (ov == best_ov and best is not None and t.track_id < best.track_id):
            best, best_ov = t, ov
    if best is None or best_ov < iou_thresh:
        raise NoAnchorTrack(f"no track overlaps the anchor box at frame {first_frame}")
    b = best.bbox_at(candidate_frame)
    if b is None:
        return False
    return iou(b, candidate_bbox) >= iou_thresh

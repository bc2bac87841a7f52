"""Path planning around axis-aligned obstacles in canonical space.

Axes follow the canonical camera frame (x right, y down, z forward), so
"above" offsets toward -y and "front" toward -z. Distances are meters;
instruction distances are reported in centimeters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, CameraPose, NonPositiveDepth, project_points, to_canonical
from .seeding import SplitMix64


class PlannerError(ValueError):
    pass


class UnknownRelation(PlannerError):
    pass


class StartInCollision(PlannerError):
    pass


class GoalInCollision(PlannerError):
    pass


class Infeasible(PlannerError):
    pass


class ZeroLengthSegment(PlannerError):
    pass


class BehindCamera(PlannerError):
    pass


@dataclass(frozen=True)
class Aabb3:
    """Axis-aligned box in the canonical frame, optionally named."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    name: str | None = None

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(3)
        hi = np.asarray(self.max_corner, dtype=float).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
            raise PlannerError(f"invalid box bounds {lo} .. {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)

    @property
    def half_extent(self) -> np.ndarray:
        return 0.5 * (self.max_corner - self.min_corner)

    def inflate(self, margin: float) -> "Aabb3":
        return Aabb3(self.min_corner - margin, self.max_corner + margin, self.name)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float).reshape(3)
        return bool(np.all(p >= self.min_corner) and np.all(p <= self.max_corner))


# relation -> (axis, sign toward the relation)
_RELATIONS = {
    "left": (0, -1.0),
    "right": (0, +1.0),
    "above": (1, -1.0),
    "front": (2, -1.0),
    "back": (2, +1.0),
}


def relation_offset(target: Aabb3, relation: str, clearance: float = 0.0) -> np.ndarray:
    """Goal point at `relation` of the target box.

    The point sits at the box center offset along the relation axis by half
    extent plus clearance.
    """
    if relation not in _RELATIONS:
        raise UnknownRelation(f"{relation!r} not in {sorted(_RELATIONS)}")
    axis, sign = _RELATIONS[relation]
    goal = target.center.copy()
    goal[axis] += sign * (target.half_extent[axis] + clearance)
    return goal


def segment_hits_aabb(p0, p1, box: Aabb3) -> bool:
    """Slab test for segment-box intersection, boundaries inclusive.

    Touching a face, edge, or corner counts as a hit.
    """
    return _segment_entry(p0, p1, box)[0]


def _segment_entry(p0, p1, box: Aabb3) -> tuple[bool, float]:
    """(hit, t_entry): earliest parameter in [0, 1] at which the segment is
    inside the box; t_entry = 0.0 when p0 starts inside."""
    p0 = np.asarray(p0, dtype=float).reshape(3)
    p1 = np.asarray(p1, dtype=float).reshape(3)
    d = p1 - p0
    tmin, tmax = 0.0, 1.0
    for i in range(3):
        if d[i] == 0.0:
            if p0[i] < box.min_corner[i] or p0[i] > box.max_corner[i]:
                return False, 0.0
        else:
            t1 = (box.min_corner[i] - p0[i]) / d[i]
            t2 = (box.max_corner[i] - p0[i]) / d[i]
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
            if tmin > tmax:
                return False, 0.0
    return True, tmin


def _boxes_arrays(boxes) -> tuple[np.ndarray, np.ndarray]:
    if not boxes:
        return np.empty((0, 3)), np.empty((0, 3))
    lo = np.stack([b.min_corner for b in boxes])
    hi = np.stack([b.max_corner for b in boxes])
    return lo, hi


def _segment_free_arr(p0, p1, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Slab test of one segment against K stacked boxes; same boundary
    semantics as segment_hits_aabb, vectorized over the boxes."""
    if len(lo) == 0:
        return True
    d = p1 - p0
    zero = d == 0.0
    out_parallel = zero[None, :] & ((p0[None, :] < lo) | (p0[None, :] > hi))
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo - p0[None, :]) / d[None, :]
        tb = (hi - p0[None, :]) / d[None, :]
    t1 = np.where(zero[None, :], -np.inf, np.minimum(ta, tb))
    t2 = np.where(zero[None, :], np.inf, np.maximum(ta, tb))
    tmin = np.maximum(t1.max(axis=1), 0.0)
    tmax = np.minimum(t2.min(axis=1), 1.0)
    hit = (tmin <= tmax) & ~out_parallel.any(axis=1)
    return not bool(hit.any())


@dataclass
class PlanConfig:
    step: float | None = None  # default: 0.05 * scene diameter
    max_iters: int = 5000
    goal_bias: float = 0.1
    clearance: float = 0.02
    seed: int = 0


def _shortcut(path: list[np.ndarray], lo: np.ndarray, hi: np.ndarray) -> list[np.ndarray]:
    """Greedy farthest-reachable shortcut; never lengthens the polyline."""
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not _segment_free_arr(path[i], path[j], lo, hi):
            j -= 1
        out.append(path[j])
        i = j
    return out


def rrt_plan(start, goal, obstacles: list[Aabb3], cfg: PlanConfig | None = None) -> np.ndarray:
    """RRT with goal bias and shortcut smoothing.

    Obstacles are inflated by cfg.clearance (Minkowski margin); the returned
    waypoint polyline is certified collision-free against the inflated boxes.
    Bit-for-bit deterministic for a given cfg.seed.

    Raises StartInCollision / GoalInCollision when an endpoint lies inside an
    inflated obstacle, Infeasible when max_iters samples fail to connect.
    """
    cfg = cfg or PlanConfig()
    start = np.asarray(start, dtype=float).reshape(3)
    goal = np.asarray(goal, dtype=float).reshape(3)
    inflated = [b.inflate(cfg.clearance) for b in obstacles]
    for b in inflated:
        if b.contains(start):
            raise StartInCollision(f"start {start.tolist()} inside {b.name or 'obstacle'}")
        if b.contains(goal):
            raise GoalInCollision(f"goal {goal.tolist()} inside {b.name or 'obstacle'}")
    if np.array_equal(start, goal):
        return start.reshape(1, 3).copy()

    corners = [start, goal]
    for b in inflated:
        corners.extend([b.min_corner, b.max_corner])
    scene_lo = np.min(corners, axis=0)
    scene_hi = np.max(corners, axis=0)
    diameter = float(np.linalg.norm(scene_hi - scene_lo))
    if diameter == 0.0:
        diameter = 1.0
    step = cfg.step if cfg.step is not None else 0.05 * diameter
    pad = 0.25 * diameter
    dom_lo, dom_hi = scene_lo - pad, scene_hi + pad

    box_lo, box_hi = _boxes_arrays(inflated)
    if _segment_free_arr(start, goal, box_lo, box_hi):
        return np.stack([start, goal])

    rng = SplitMix64(cfg.seed)
    nodes = np.empty((cfg.max_iters + 2, 3))
    nodes[0] = start
    parents = np.empty(cfg.max_iters + 2, dtype=np.int64)
    parents[0] = -1
    n = 1
    for _ in range(cfg.max_iters):
        if rng.uniform() < cfg.goal_bias:
            sample = goal
        else:
            sample = np.array([
                dom_lo[0] + rng.uniform() * (dom_hi[0] - dom_lo[0]),
                dom_lo[1] + rng.uniform() * (dom_hi[1] - dom_lo[1]),
                dom_lo[2] + rng.uniform() * (dom_hi[2] - dom_lo[2]),
            ])
        d2 = ((nodes[:n] - sample) ** 2).sum(axis=1)
        ni = int(np.argmin(d2))
        near = nodes[ni]
        dist = float(np.sqrt(d2[ni]))
        if dist == 0.0:
            continue
        new = sample if dist <= step else near + (step / dist) * (sample - near)
        if not _segment_free_arr(near, new, box_lo, box_hi):
            continue
        nodes[n] = new
        parents[n] = ni
        n += 1
        if float(np.linalg.norm(new - goal)) <= step and _segment_free_arr(new, goal, box_lo, box_hi):
            chain = [goal]
            k = n - 1
            while k >= 0:
                chain.append(nodes[k].copy())
                k = parents[k]
            chain.reverse()
            smoothed = _shortcut(chain, box_lo, box_hi)
            pts, last = [], None
            for p in smoothed:
                if last is None or not np.array_equal(p, last):
                    pts.append(p)
                last = p
            return np.stack(pts)
    raise Infeasible(f"no path after {cfg.max_iters} iterations")


def path_length(path: np.ndarray) -> float:
    p = np.asarray(path, dtype=float).reshape(-1, 3)
    if len(p) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def obstructions(p0, p1, objects: list[Aabb3]) -> list[str]:
    """Names of the boxes the straight segment p0 -> p1 passes through,
    ordered by entry point along the segment (ties by name)."""
    hits = []
    for idx, b in enumerate(objects):
        hit, t = _segment_entry(p0, p1, b)
        if hit:
            hits.append((t, b.name if b.name is not None else str(idx)))
    hits.sort()
    return [name for _, name in hits]


# dominant-axis instruction vocabulary: (negative, positive) per axis
_AXIS_WORDS = (("left", "right"), ("up", "down"), ("forward", "backward"))


def path_to_instructions(path: np.ndarray) -> list[tuple[str, float]]:
    """Verbalize a path as (direction, centimeters) steps.

    Each segment contributes its dominant-axis component (ties prefer x,
    then y, then z); consecutive same-direction segments merge before the
    distance is rounded to 0.1 cm.
    """
    p = np.asarray(path, dtype=float).reshape(-1, 3)
    if len(p) < 2:
        return []
    out: list[tuple[str, float]] = []
    run_dir, run_sum = None, 0.0
    for seg in np.diff(p, axis=0):
        if float(np.linalg.norm(seg)) == 0.0:
            raise ZeroLengthSegment("zero-length path segment")
        axis = int(np.argmax(np.abs(seg)))
        word = _AXIS_WORDS[axis][0 if seg[axis] < 0 else 1]
        if word == run_dir:
            run_sum += abs(float(seg[axis]))
        else:
            if run_dir is not None:
                out.append((run_dir, round(run_sum * 100.0, 1)))
            run_dir, run_sum = word, abs(float(seg[axis]))
    out.append((run_dir, round(run_sum * 100.0, 1)))
    return out


def project_path(path: np.ndarray, intr: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """Project waypoints into a camera view as (K, 2) pixel coordinates.

    Waypoints are taken in the frame the pose maps to world from (pass the
    identity pose when waypoints already live in that camera's frame).
    Raises BehindCamera when any waypoint has non-positive camera depth.
    """
    p = np.asarray(path, dtype=float).reshape(-1, 3)
    cam = to_canonical(p, pose)
    try:
        return project_points(cam, intr)
    except NonPositiveDepth as e:
        raise BehindCamera(str(e)) from None

"""QA record construction: 19 task workflows over annotated scenes.

Every record's answer is computed from scene annotations through the
geometry, tracking, and planning modules — never invented — so an
independent recomputation from the same annotations reproduces it exactly.
Randomness (object choice, template choice, distractors, option order) comes
from one stream per (scene_id, task, record-index), so generation is a pure
function of (annotations, config, master seed).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..geometry import (
    GeometryError,
    PointCloud,
    closest_distance,
    object_dims,
    room_footprint,
    rotation_angle,
    to_canonical,
)
from ..planner import (
    PlanConfig,
    PlannerError,
    path_to_instructions,
    relation_offset,
    rrt_plan,
    obstructions,
    segment_hits_aabb,
)
from ..seeding import SplitMix64, derive_stream
from ..tracking import SceneRejected, appearance_order, count_confirmed
from ..units import format_value
from .annotations import ObjectAnnotation, SceneAnnotations
from .distractors import (
    UniverseTooSmall,
    assemble_options,
    categorical_distractors,
    numeric_distractors,
)
from .relations import RELATION_LABELS, classify_scene
from .templates import render_template

TASKS = (
    "position_comparison",
    "size_comparison",
    "existence_estimation",
    "rotation_estimation",
    "relative_distance",
    "absolute_distance",
    "object_counting",
    "object_size",
    "route_plan",
    "appearance_order",
    "depth_estimation",
    "view_change_inference",
    "object_matching",
    "spatial_relation",
    "room_size",
    "navigation",
    "area_estimation",
    "obstacles_location",
    "manipulation_planning",
)

# Which scale buckets each task applies to (all six unless restricted).
_ALL = ("tiny_tabletop", "tabletop", "indoor", "wild_indoor", "outdoor", "drone")
TASK_BUCKETS: dict[str, tuple[str, ...]] = {
    "position_comparison": ("tabletop", "indoor", "wild_indoor", "outdoor", "drone"),
    "size_comparison": ("tabletop", "wild_indoor", "outdoor", "drone"),
    "existence_estimation": ("tiny_tabletop", "tabletop", "wild_indoor", "outdoor", "drone"),
    "rotation_estimation": ("tiny_tabletop", "tabletop", "wild_indoor", "outdoor", "drone"),
    "relative_distance": ("tabletop", "indoor", "wild_indoor", "outdoor", "drone"),
    "absolute_distance": ("tabletop", "indoor", "wild_indoor", "outdoor", "drone"),
    "object_counting": ("tabletop", "indoor", "wild_indoor", "outdoor", "drone"),
    "object_size": _ALL,
    "route_plan": ("wild_indoor", "outdoor", "drone"),
    "appearance_order": ("tabletop", "indoor", "wild_indoor", "outdoor", "drone"),
    "depth_estimation": _ALL,
    "view_change_inference": _ALL,
    "object_matching": _ALL,
    "spatial_relation": ("tabletop", "wild_indoor", "outdoor", "drone"),
    "room_size": ("indoor", "wild_indoor"),
    "navigation": ("outdoor",),
    "area_estimation": ("drone",),
    "obstacles_location": ("tabletop",),
    "manipulation_planning": ("tiny_tabletop", "tabletop"),
}

# Tasks whose ground truth is a number (can be asked as regression or mc).
NUMERIC_TASKS = frozenset({
    "rotation_estimation",
    "absolute_distance",
    "object_counting",
    "object_size",
    "depth_estimation",
    "room_size",
    "area_estimation",
})

_NUMERIC_UNIT = {
    "rotation_estimation": "deg",
    "absolute_distance": "m",
    "object_counting": "",
    "object_size": "m",
    "depth_estimation": "m",
    "room_size": "m2",
    "area_estimation": "m2",
}

POSITION_WORDS = ("left", "right", "above", "below", "nearer", "farther")
VIEW_WORDS = ("left", "right", "up", "down", "forward", "backward")
_RELATION_PHRASE = {
    "left": "to the left of",
    "right": "to the right of",
    "above": "above",
    "front": "in front of",
    "back": "behind",
}

# Vocabulary of plausible-but-absent objects for existence questions.
EXISTENCE_VOCAB = (
    "aquarium", "bicycle", "cactus", "drum", "fan", "globe", "guitar",
    "helmet", "kettle", "ladder", "laptop", "lawnmower", "microwave",
    "piano", "stroller", "suitcase", "telescope", "trophy", "typewriter",
    "umbrella",
)


class SkipTask(Exception):
    """Raised by a task generator when the scene cannot support the task."""


@dataclass(frozen=True)
class QAGenConfig:
    tasks: tuple[str, ...] = TASKS
    modes: tuple[str, ...] = ("mc", "regression")
    max_records: int = 25          # per-scene cap
    min_margin: float = 0.05       # relative separation below which comparisons skip
    plan: PlanConfig = field(default_factory=PlanConfig)


def plural(noun: str) -> str:
    return noun + ("es" if noun.endswith(("s", "x", "sh", "ch")) else "s")


def format_instruction(direction: str, cm: float) -> str:
    return f"move {direction} {cm:.1f} cm"


def render_instructions(instructions: list[tuple[str, float]]) -> str:
    return "; ".join(format_instruction(d, c) for d, c in instructions)


def format_bbox(bbox) -> str:
    return "[" + ", ".join(f"{v:.0f}" for v in bbox) + "]"


def _unique_class_objects(ann: SceneAnnotations) -> list[ObjectAnnotation]:
    """Objects whose class name appears exactly once (unambiguous reference)."""
    counts: dict[str, int] = {}
    for obj in ann.objects.values():
        counts[obj.class_name] = counts.get(obj.class_name, 0) + 1
    return [ann.objects[i] for i in sorted(ann.objects) if counts[ann.objects[i].class_name] == 1]


def _need(objs: list, n: int, what: str) -> None:
    if len(objs) < n:
        raise SkipTask(f"needs {n} {what}, scene has {len(objs)}")


@dataclass
class _Draft:
    """Generator output before template rendering and record assembly."""

    slots: dict[str, str]
    semantic: str
    answer: object                      # mc: option text; regression: float
    options: list[str] | None = None    # mc only


# --- per-task generators -------------------------------------------------
# Each takes (ann, rng, mode) and returns a _Draft or raises SkipTask.
# rng draws happen in a fixed order: object choice, task-specific draws,
# distractors, option shuffle.  The driver renders the template afterwards.


def _gen_position_comparison(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 2, "uniquely named objects")
    a, b = rng.sample(uniq, 2)
    d = a.centroid - b.centroid
    axis = int(np.argmax(np.abs(d)))
    if abs(d[axis]) < 1e-3:
        raise SkipTask("objects coincide")
    words = (("left", "right"), ("above", "below"), ("nearer", "farther"))[axis]
    answer = words[0] if d[axis] < 0 else words[1]
    opts = assemble_options(
        answer, categorical_distractors(answer, POSITION_WORDS, rng), rng
    )
    return _Draft(
        slots={"a": a.class_name, "b": b.class_name},
        semantic=f"{a.class_name}, {b.class_name}",
        answer=answer,
        options=opts,
    )


def _longest_dim(ann: SceneAnnotations, obj: ObjectAnnotation) -> float:
    dims = object_dims(PointCloud(obj.cloud), up=ann.up)
    return float(max(dims))


def _gen_size_comparison(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 2, "uniquely named objects")
    a, b = rng.sample(uniq, 2)
    try:
        la, lb = _longest_dim(ann, a), _longest_dim(ann, b)
    except GeometryError as e:
        raise SkipTask(f"degenerate object geometry: {e}") from None
    if abs(la - lb) < 0.1 * max(la, lb):
        raise SkipTask("sizes too close to compare")
    answer = a.class_name if la > lb else b.class_name
    other = b.class_name if la > lb else a.class_name
    opts = assemble_options(answer, [other], rng)
    return _Draft(
        slots={"a": a.class_name, "b": b.class_name},
        semantic=f"{a.class_name}, {b.class_name}",
        answer=answer,
        options=opts,
    )


def _gen_existence_estimation(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    present = sorted({o.class_name for o in ann.objects.values()})
    _need(present, 1, "named objects")
    answer = present[rng.randint(len(present))]
    absent = [c for c in EXISTENCE_VOCAB if c not in present]
    opts = assemble_options(answer, categorical_distractors(answer, absent, rng), rng)
    return _Draft(slots={}, semantic=answer, answer=answer, options=opts)


def _gen_rotation_estimation(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 1, "uniquely named objects")
    obj = uniq[rng.randint(len(uniq))]
    frames = obj.visible_frames
    if frames[-1] == frames[0]:
        raise SkipTask("object visible in a single frame only")
    try:
        angle = rotation_angle(
            ann.camera_cloud(obj, frames[0]), ann.camera_cloud(obj, frames[-1])
        )
    except GeometryError as e:
        raise SkipTask(f"degenerate rotation geometry: {e}") from None
    if angle < 1.0:
        raise SkipTask("no appreciable rotation")
    return _Draft(slots={"a": obj.class_name}, semantic=obj.class_name, answer=angle)


def _gen_relative_distance(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 3, "uniquely named objects")
    # first anchor (in shuffled order) whose nearest neighbour is clear-cut
    anchors = rng.sample(uniq, len(uniq))
    anchor = dists = None
    for cand_anchor in anchors:
        cands = [o for o in uniq if o is not cand_anchor]
        d = sorted(
            (float(np.linalg.norm(c.centroid - cand_anchor.centroid)), c.class_name)
            for c in cands
        )
        if d[0][0] > 0.0 and d[1][0] >= 1.05 * d[0][0]:
            anchor, dists = cand_anchor, d
            break
    if anchor is None:
        raise SkipTask("nearest object is ambiguous for every anchor")
    answer = dists[0][1]
    rest = [name for _, name in dists[1:]]
    chosen = rng.sample(rest, min(3, len(rest)))
    opts = assemble_options(answer, chosen, rng)
    return _Draft(
        slots={"a": anchor.class_name},
        semantic=anchor.class_name,
        answer=answer,
        options=opts,
    )


def _gen_absolute_distance(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 2, "uniquely named objects")
    # first clearly separated pair in shuffled order; touching pairs make
    # for degenerate distance questions
    pairs = list(itertools.combinations(range(len(uniq)), 2))
    order = rng.sample(pairs, len(pairs))
    for i, j in order:
        a, b = uniq[i], uniq[j]
        gt = closest_distance(PointCloud(a.cloud), PointCloud(b.cloud))
        if gt >= 0.02:
            return _Draft(
                slots={"a": a.class_name, "b": b.class_name},
                semantic=f"{a.class_name}, {b.class_name}",
                answer=gt,
            )
    raise SkipTask("every object pair is in contact")


def _gen_object_counting(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    try:
        counts = count_confirmed(ann.tracks)
    except SceneRejected as e:
        raise SkipTask(str(e)) from None
    counts.pop("floor", None)
    if not counts:
        raise SkipTask("no countable classes")
    classes = sorted(counts)
    cls = classes[rng.randint(len(classes))]
    return _Draft(
        slots={"a": cls, "a_plural": plural(cls)},
        semantic=cls,
        answer=float(counts[cls]),
    )


def _gen_object_size(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 1, "uniquely named objects")
    obj = uniq[rng.randint(len(uniq))]
    try:
        gt = _longest_dim(ann, obj)
    except GeometryError as e:
        raise SkipTask(f"degenerate object geometry: {e}") from None
    if gt < 1e-4:
        raise SkipTask("object too small to measure")
    return _Draft(slots={"a": obj.class_name}, semantic=obj.class_name, answer=gt)


def _plan_routes(ann: SceneAnnotations, rng: SplitMix64, cfg: QAGenConfig) -> _Draft:
    """Shared body of route_plan and navigation."""
    uniq = _unique_class_objects(ann)
    _need(uniq, 2, "uniquely named objects")
    a, b = rng.sample(uniq, 2)
    obstacles = [o.aabb for o in ann.objects.values()]
    hover = 2.0 * cfg.plan.clearance
    start = relation_offset(a.aabb, "above", hover)

    relations = list(_RELATION_PHRASE)
    rng.shuffle(relations)
    answer_rel, answer_text = None, None
    distractor_texts: list[str] = []
    for rel in relations:
        goal = relation_offset(b.aabb, rel, hover)
        seed = rng.next_u64()
        try:
            path = rrt_plan(start, goal, obstacles, PlanConfig(
                step=cfg.plan.step, max_iters=cfg.plan.max_iters,
                goal_bias=cfg.plan.goal_bias, clearance=cfg.plan.clearance,
                seed=seed,
            ))
            text = render_instructions(path_to_instructions(path))
        except PlannerError:
            continue  # unreachable perturbation: discarded
        if answer_text is None:
            answer_rel, answer_text = rel, text
        elif text != answer_text and text not in distractor_texts:
            distractor_texts.append(text)
    if answer_text is None:
        raise SkipTask("no reachable goal around the target")
    if not distractor_texts:
        raise SkipTask("no feasible distractor route")
    opts = assemble_options(answer_text, distractor_texts[:3], rng)
    return _Draft(
        slots={
            "a": a.class_name,
            "b": b.class_name,
            "relation_phrase": _RELATION_PHRASE[answer_rel],
        },
        semantic=f"{a.class_name}, {b.class_name}",
        answer=answer_text,
        options=opts,
    )


def _gen_appearance_order(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    confirmed_classes = sorted({t.class_name for t in ann.tracks if t.confirmed})
    confirmed_classes = [c for c in confirmed_classes if c != "floor"]
    _need(confirmed_classes, 3, "confirmed tracked classes")
    chosen = rng.sample(confirmed_classes, 3)
    order = appearance_order(ann.tracks, chosen)
    answer = ", ".join(order)
    perms = [", ".join(p) for p in itertools.permutations(chosen)]
    opts = assemble_options(
        answer, categorical_distractors(answer, perms, rng), rng
    )
    return _Draft(
        slots={"classes": ", ".join(chosen)},
        semantic=", ".join(chosen),
        answer=answer,
        options=opts,
    )


def _gen_depth_estimation(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 1, "uniquely named objects")
    obj = uniq[rng.randint(len(uniq))]
    gt = float(np.linalg.norm(obj.centroid))
    if gt < 1e-3:
        raise SkipTask("object at the camera origin")
    return _Draft(slots={"a": obj.class_name}, semantic=obj.class_name, answer=gt)


def _gen_view_change(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    if ann.n_frames < 2:
        raise SkipTask("single-frame scene")
    delta = to_canonical(ann.poses[-1].translation, ann.poses[0])
    axis = int(np.argmax(np.abs(delta)))
    if abs(delta[axis]) < 5e-3:
        raise SkipTask("camera is effectively static")
    words = (("left", "right"), ("up", "down"), ("backward", "forward"))[axis]
    answer = words[1] if delta[axis] > 0 else words[0]
    opts = assemble_options(answer, categorical_distractors(answer, VIEW_WORDS, rng), rng)
    return _Draft(slots={}, semantic="camera", answer=answer, options=opts)


def _gen_object_matching(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    last = ann.n_frames - 1
    cands = [
        o for o in (ann.objects[i] for i in sorted(ann.objects))
        if o.track is not None
        and 0 in o.track.observations
        and last in o.track.observations
    ]
    _need(cands, 2, "objects tracked from first to last frame")
    target = cands[rng.randint(len(cands))]
    others = [o for o in cands if o is not target]
    decoy = others[rng.randint(len(others))]
    answer = format_bbox(target.track.bbox_at(last))
    decoy_text = format_bbox(decoy.track.bbox_at(last))
    if decoy_text == answer:
        raise SkipTask("indistinguishable final boxes")
    opts = assemble_options(answer, [decoy_text], rng)
    return _Draft(
        slots={"box0": format_bbox(target.track.bbox_at(0))},
        semantic=target.class_name,
        answer=answer,
        options=opts,
    )


def _gen_spatial_relation(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 2, "uniquely named objects")
    rels = classify_scene({o.class_name: o.aabb for o in uniq})
    pairs = sorted(rels)
    informative = [p for p in pairs if rels[p] != "adjacent"]
    pool = informative if informative else pairs
    pair = pool[rng.randint(len(pool))]
    answer = rels[pair]
    opts = assemble_options(
        answer, categorical_distractors(answer, RELATION_LABELS, rng), rng
    )
    return _Draft(
        slots={"a": pair[0], "b": pair[1]},
        semantic=f"{pair[0]}, {pair[1]}",
        answer=answer,
        options=opts,
    )


def _gen_room_size(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    if ann.floor is None:
        raise SkipTask("no floor instance")
    try:
        area = room_footprint(ann.floor.cloud, up=ann.up)
    except GeometryError as e:
        raise SkipTask(f"floor geometry unusable: {e}") from None
    if area < 0.01:
        raise SkipTask("degenerate floor area")
    return _Draft(slots={}, semantic="room", answer=float(area))


def _gen_area_estimation(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 1, "uniquely named objects")
    obj = uniq[rng.randint(len(uniq))]
    try:
        area = room_footprint(obj.cloud, up=ann.up)
    except GeometryError as e:
        raise SkipTask(f"object footprint unusable: {e}") from None
    if area < 1e-4:
        raise SkipTask("degenerate footprint")
    return _Draft(slots={"a": obj.class_name}, semantic=obj.class_name, answer=float(area))


def _gen_obstacles_location(ann: SceneAnnotations, rng: SplitMix64, mode: str) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 4, "uniquely named objects")
    a, b = rng.sample(uniq, 2)
    others = [o for o in uniq if o is not a and o is not b]
    hits = obstructions(a.gcentroid, b.gcentroid, [o.aabb for o in others])
    answer = hits[0] if hits else "None"
    pool = [o.class_name for o in others if o.class_name != answer]
    if answer != "None":
        pool.append("None")
    opts = assemble_options(answer, categorical_distractors(answer, pool, rng), rng)
    return _Draft(
        slots={"a": a.class_name, "b": b.class_name},
        semantic=f"{a.class_name}, {b.class_name}",
        answer=answer,
        options=opts,
    )


def _gen_manipulation(ann: SceneAnnotations, rng: SplitMix64, mode: str, cfg: QAGenConfig) -> _Draft:
    uniq = _unique_class_objects(ann)
    _need(uniq, 2, "uniquely named objects")
    a, b = rng.sample(uniq, 2)
    # the carried object is not an obstacle against its own motion
    obstacles = [o.aabb for oid, o in ann.objects.items() if oid != a.instance_id]
    hover = 2.0 * cfg.plan.clearance
    start = relation_offset(a.aabb, "above", hover)
    inflated = [box.inflate(cfg.plan.clearance) for box in obstacles]

    relations = list(_RELATION_PHRASE)
    rng.shuffle(relations)
    answer_rel, answer_text = None, None
    distractor_texts: list[str] = []
    for rel in relations:
        goal = relation_offset(b.aabb, rel, hover)
        try:
            text = render_instructions(path_to_instructions(np.stack([start, goal])))
        except PlannerError:
            continue
        free = not any(
            box.contains(goal) or segment_hits_aabb(start, goal, box) for box in inflated
        )
        # only the answer motion must be collision-free; a distractor is
        # wrong because it lands at the wrong relation, executable or not
        if free and answer_text is None:
            answer_rel, answer_text = rel, text
        elif text != answer_text and text not in distractor_texts:
            distractor_texts.append(text)
    if answer_text is None:
        raise SkipTask("no free straight-line placement around the target")
    distractor_texts = [t for t in distractor_texts if t != answer_text]
    if not distractor_texts:
        raise SkipTask("no distinct distractor motion")
    opts = assemble_options(answer_text, distractor_texts[:3], rng)
    return _Draft(
        slots={
            "a": a.class_name,
            "b": b.class_name,
            "relation_phrase": _RELATION_PHRASE[answer_rel],
        },
        semantic=f"{a.class_name}, {b.class_name}",
        answer=answer_text,
        options=opts,
    )


def _dispatch(task: str, ann: SceneAnnotations, rng: SplitMix64, mode: str, cfg: QAGenConfig) -> _Draft:
    if task in ("route_plan", "navigation"):
        return _plan_routes(ann, rng, cfg)
    if task == "manipulation_planning":
        return _gen_manipulation(ann, rng, mode, cfg)
    gen = {
        "position_comparison": _gen_position_comparison,
        "size_comparison": _gen_size_comparison,
        "existence_estimation": _gen_existence_estimation,
        "rotation_estimation": _gen_rotation_estimation,
        "relative_distance": _gen_relative_distance,
        "absolute_distance": _gen_absolute_distance,
        "object_counting": _gen_object_counting,
        "object_size": _gen_object_size,
        "appearance_order": _gen_appearance_order,
        "depth_estimation": _gen_depth_estimation,
        "view_change_inference": _gen_view_change,
        "object_matching": _gen_object_matching,
        "spatial_relation": _gen_spatial_relation,
        "room_size": _gen_room_size,
        "area_estimation": _gen_area_estimation,
        "obstacles_location": _gen_obstacles_location,
    }[task]
    return gen(ann, rng, mode)


def _assemble(
    ann: SceneAnnotations,
    task: str,
    index: int,
    mode: str,
    draft: _Draft,
    rng: SplitMix64,
) -> dict:
    if mode == "mc" and draft.options is None:
        # numeric ground truth recast as multiple choice
        gt = float(draft.answer)
        integer = task == "object_counting"
        fmt = (lambda v: str(int(round(v)))) if integer else format_value
        answer_text = fmt(gt)
        dts = [fmt(v) for v in numeric_distractors(gt, rng, integer=integer)]
        options = assemble_options(answer_text, dts, rng)
        answer: object = answer_text
    elif mode == "mc":
        options = draft.options
        answer = draft.answer
    else:
        options = None
        answer = {"value": float(draft.answer), "unit": _NUMERIC_UNIT[task]}

    question = render_template(task, draft.slots, rng)
    record = {
        "id": f"{ann.scene_id}:{task}:{index:02d}",
        "scene_id": ann.scene_id,
        "task": task,
        "question": question,
        "answer_mode": mode,
        "answer": answer,
        "anchors": {"semantic": draft.semantic, "scale": ann.stats.p95_depth},
        "referring": {"mode": "none"},
        "scale_bucket": ann.bucket,
    }
    if options is not None:
        record["options"] = options
    return record


def build_qa(
    ann: SceneAnnotations,
    tasks: list[str] | tuple[str, ...] | None = None,
    cfg: QAGenConfig | None = None,
    master_seed: int = 0,
) -> tuple[list[dict], dict[str, str]]:
    """Generate QA records for a scene.

    Returns (records, skips) where skips maps each task that produced
    nothing to its reason.  Task order is canonical; a first pass emits one
    record per task in its primary mode, a second pass adds the other
    requested mode for numeric tasks, until the per-scene cap is reached.
    """
    cfg = cfg or QAGenConfig()
    requested = [t for t in (tasks if tasks is not None else cfg.tasks)]
    for t in requested:
        if t not in TASKS:
            raise ValueError(f"unknown task {t!r}")

    records: list[dict] = []
    skips: dict[str, str] = {}
    emitted: dict[str, int] = {}

    def modes_for(task: str) -> list[str]:
        if task in NUMERIC_TASKS:
            return [m for m in ("regression", "mc") if m in cfg.modes]
        return ["mc"] if "mc" in cfg.modes else []

    passes: list[list[tuple[str, str]]] = [[], []]
    for task in TASKS:
        if task not in requested:
            continue
        modes = modes_for(task)
        if not modes:
            skips[task] = "task not expressible in the requested answer modes"
            continue
        if ann.bucket not in TASK_BUCKETS[task]:
            skips[task] = f"not applicable to {ann.bucket} scenes"
            continue
        passes[0].append((task, modes[0]))
        passes[1].extend((task, m) for m in modes[1:])

    for task, mode in passes[0] + passes[1]:
        if len(records) >= cfg.max_records:
            break
        index = emitted.get(task, 0)
        rng = derive_stream(ann.scene_id, task, index, master_seed)
        try:
            draft = _dispatch(task, ann, rng, mode, cfg)
            records.append(_assemble(ann, task, index, mode, draft, rng))
            emitted[task] = index + 1
        except (SkipTask, UniverseTooSmall) as e:
            if task not in emitted:
                skips[task] = str(e)
    return records, skips


# --- referring inputs -----------------------------------------------------


class ReferringError(ValueError):
    pass


class NoMask(ReferringError):
    pass


def _referring_target(record: dict, ann: SceneAnnotations) -> ObjectAnnotation:
    semantic = record.get("anchors", {}).get("semantic", "")
    for name in semantic.split(", "):
        for oid in sorted(ann.objects):
            if ann.objects[oid].class_name == name:
                return ann.objects[oid]
    raise NoMask(f"record {record.get('id')!r} references no maskable object")


def attach_referring(record: dict, mode: str, ann: SceneAnnotations) -> dict:
    """Re-target a record's question at a point/bbox/mask instead of a noun.

    The referenced object must be visible in the reference frame.  Returns a
    new record; the original is left untouched.
    """
    if mode not in ("point", "bbox", "mask"):
        raise ReferringError(f"unknown referring mode {mode!r}")
    obj = _referring_target(record, ann)
    if ann.masks is None or 0 not in obj.frames:
        raise NoMask(f"{obj.class_name} has no mask in the reference frame")

    rows, cols = np.nonzero(ann.masks[0] == obj.instance_id)
    if rows.size == 0:
        raise NoMask(f"{obj.class_name} has no mask in the reference frame")

    if mode == "point":
        cr, cc = rows.mean(), cols.mean()
        i = int(np.argmin((rows - cr) ** 2 + (cols - cc) ** 2))
        u, v = int(cols[i]), int(rows[i])
        referring: dict = {"mode": "point", "point": [u, v], "frame": 0}
        phrase = f"the object at the marked point ({u}, {v}) in the first frame"
    elif mode == "bbox":
        if obj.track is None or 0 not in obj.track.observations:
            raise NoMask(f"{obj.class_name} has no track bbox in the reference frame")
        bbox = obj.track.bbox_at(0)
        referring = {"mode": "bbox", "bbox": [float(x) for x in bbox], "frame": 0}
        phrase = f"the object inside the box {format_bbox(bbox)} in the first frame"
    else:
        referring = {"mode": "mask", "mask_id": obj.instance_id, "frame": 0}
        phrase = f"the object highlighted as instance {obj.instance_id} in the first frame"

    out = dict(record)
    noun = f"the {obj.class_name}"
    if noun in record["question"]:
        out["question"] = record["question"].replace(noun, phrase, 1)
    else:
        out["question"] = f"Regarding {phrase}: {record['question']}"
    out["referring"] = referring
    return out


def resolve_referring(referring: dict, ann: SceneAnnotations) -> int:
    """Map a referring input back to the instance id it designates."""
    mode = referring.get("mode")
    if mode == "mask":
        return int(referring["mask_id"])
    if mode == "point":
        if ann.masks is None:
            raise ReferringError("scene has no masks")
        u, v = referring["point"]
        oid = int(ann.masks[referring.get("frame", 0)][int(v), int(u)])
        if oid == 0:
            raise ReferringError(f"point ({u}, {v}) lies on the background")
        return oid
    if mode == "bbox":
        from ..tracking import iou as box_iou

        frame = referring.get("frame", 0)
        bbox = tuple(referring["bbox"])
        best_oid, best = None, 0.5
        for oid in sorted(ann.objects):
            track = ann.objects[oid].track
            if track is None or frame not in track.observations:
                continue
            score = box_iou(bbox, track.bbox_at(frame))
            if score > best:
                best_oid, best = oid, score
        if best_oid is None:
            raise ReferringError(f"no tracked instance matches bbox {bbox}")
        return best_oid
    raise ReferringError(f"unknown referring mode {mode!r}")

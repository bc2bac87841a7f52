"""Rule-based typing of pairwise spatial relations between object boxes.

Works on axis-aligned boxes in the canonical frame (y points down, so
"above" means smaller y).  Relations follow fixed geometric rules:

  plug-in   one box is >=60% contained in the other by volume
  support   upper box's bottom face rests on the lower box's top face
            (face gap < 2 cm, footprints overlap >= 30% of the smaller)
            and the lower box is itself held up
  stacking  support chain of length >= 2 connects the pair
  hanging   same face contact, but the lower box rests on nothing — it
            dangles from the upper one (needs scene context, like stacking)
  adhesion  contact on a vertical side face
  adjacent  none of the above
"""

from __future__ import annotations

import itertools

import numpy as np

from ..planner import Aabb3

RELATION_LABELS = ("support", "stacking", "adhesion", "hanging", "plug-in", "adjacent")

CONTACT_TOL = 0.02           # meters; face-to-face gap that still counts as contact
FOOTPRINT_OVERLAP_MIN = 0.3  # fraction of the smaller footprint
CONTAINMENT_MIN = 0.6        # fraction of the smaller volume


def _interval_overlap(lo1, hi1, lo2, hi2) -> float:
    return max(0.0, min(hi1, hi2) - max(lo1, lo2))


def _footprint_overlap(a: Aabb3, b: Aabb3) -> float:
    """Ground-plane (xz) intersection area over the smaller footprint."""
    ox = _interval_overlap(a.min_corner[0], a.max_corner[0], b.min_corner[0], b.max_corner[0])
    oz = _interval_overlap(a.min_corner[2], a.max_corner[2], b.min_corner[2], b.max_corner[2])
    area_a = (a.max_corner[0] - a.min_corner[0]) * (a.max_corner[2] - a.min_corner[2])
    area_b = (b.max_corner[0] - b.min_corner[0]) * (b.max_corner[2] - b.min_corner[2])
    smaller = min(area_a, area_b)
    if smaller <= 0.0:
        return 0.0
    return ox * oz / smaller


def _containment(a: Aabb3, b: Aabb3) -> float:
    """Intersection volume over the smaller box volume."""
    inter = 1.0
    for ax in range(3):
        inter *= _interval_overlap(
            a.min_corner[ax], a.max_corner[ax], b.min_corner[ax], b.max_corner[ax]
        )
    vol_a = float(np.prod(a.max_corner - a.min_corner))
    vol_b = float(np.prod(b.max_corner - b.min_corner))
    smaller = min(vol_a, vol_b)
    if smaller <= 0.0:
        return 0.0
    return inter / smaller


def _rests_on(top: Aabb3, bottom: Aabb3, tol: float = CONTACT_TOL) -> bool:
    # y is down: the upper box's largest y touches the lower box's smallest y
    gap = abs(float(top.max_corner[1]) - float(bottom.min_corner[1]))
    if gap >= tol:
        return False
    if float(top.center[1]) >= float(bottom.center[1]):
        return False
    return _footprint_overlap(top, bottom) >= FOOTPRINT_OVERLAP_MIN


def _side_contact(a: Aabb3, b: Aabb3, tol: float = CONTACT_TOL) -> bool:
    """Vertical-face contact along x or z with real overlap on the other axes."""
    oy = _interval_overlap(a.min_corner[1], a.max_corner[1], b.min_corner[1], b.max_corner[1])
    if oy <= 0.0:
        return False
    for ax, other in ((0, 2), (2, 0)):
        gap = min(
            abs(float(a.max_corner[ax]) - float(b.min_corner[ax])),
            abs(float(b.max_corner[ax]) - float(a.min_corner[ax])),
        )
        oo = _interval_overlap(
            a.min_corner[other], a.max_corner[other], b.min_corner[other], b.max_corner[other]
        )
        if gap < tol and oo > 0.0:
            return True
    return False


def classify_scene(boxes: dict[str, Aabb3]) -> dict[tuple[str, str], str]:
    """Relation label for every unordered pair of named boxes.

    Keys are sorted name pairs.  Stacking needs scene context (a chain of
    direct supports), which is why classification is done scene-wide.
    """
    names = sorted(boxes)
    support_edges = {
        (u, l)
        for u, l in itertools.permutations(names, 2)
        if _rests_on(boxes[u], boxes[l])
    }
    # y points down, so the scene's ground level is the largest bottom face
    ground = max(float(boxes[n].max_corner[1]) for n in names)

    def held_up(n: str) -> bool:
        # standing at ground level, or resting on some other box
        if abs(float(boxes[n].max_corner[1]) - ground) < CONTACT_TOL:
            return True
        return any(u == n for u, _ in support_edges)

    def chain_connected(u: str, l: str) -> bool:
        # is there a support path u -> ... -> l of length >= 2?
        frontier = {m for (x, m) in support_edges if x == u}
        seen = set(frontier)
        hops = 1
        while frontier:
            if l in frontier and hops >= 2:
                return True
            frontier = {m for (x, m) in support_edges if x in frontier} - seen
            seen |= frontier
            hops += 1
        return False

    out: dict[tuple[str, str], str] = {}
    for a, b in itertools.combinations(names, 2):
        box_a, box_b = boxes[a], boxes[b]
        if _containment(box_a, box_b) >= CONTAINMENT_MIN:
            rel = "plug-in"
        elif (a, b) in support_edges or (b, a) in support_edges:
            lower = b if (a, b) in support_edges else a
            rel = "support" if held_up(lower) else "hanging"
        elif chain_connected(a, b) or chain_connected(b, a):
            rel = "stacking"
        elif _side_contact(box_a, box_b):
            rel = "adhesion"
        else:
            rel = "adjacent"
        out[(a, b)] = rel
    return out


def classify_pair(a: Aabb3, b: Aabb3) -> str:
    """Relation between two boxes considered in isolation."""
    return classify_scene({"a": a, "b": b})[("a", "b")]

"""Scene scale classification.

Every scene is sorted into exactly one of six scale buckets before question
generation.  The bucket gates which tasks apply (room area makes no sense on
a tabletop; aerial footprint area makes no sense indoors) and is the primary
grouping key for score aggregation.  Scenes outside the supported sensing
range — farther than 0.7 km or with no object above a millimeter — raise
``OutOfRange`` and are flagged/skipped rather than force-fit into a bucket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


SCALE_BUCKETS = (
    "tiny_tabletop",
    "tabletop",
    "indoor",
    "wild_indoor",
    "outdoor",
    "drone",
)

# Cutoffs in meters.  p95_depth is the 95th percentile of valid depth;
# extents are the largest axis-aligned side of any non-floor object.
_P95_HARD_MAX = 700.0
_EXTENT_HARD_MIN = 0.001
_DRONE_HEIGHT_MIN = 10.0
_TINY_EXTENT_MAX = 0.05
_TABLETOP_EXTENT_MAX = 2.0
_TABLETOP_P95_MAX = 3.0
_OUTDOOR_P95_MAX = 500.0


class BucketError(ValueError):
    pass


class OutOfRange(BucketError):
    """Scene scale falls outside every supported bucket."""


@dataclass(frozen=True)
class SceneStats:
    """Summary numbers a bucket decision is made from.

    p95_depth          -- 95th percentile of all valid depth values, meters
    max_object_extent  -- largest axis-aligned extent of any non-floor object
    camera_height_m    -- height of the camera above ground, when known
    indoor             -- capture happened inside a building
    source             -- capture rig family; "scan" for scanner datasets,
                          anything containing "wild" for handheld video
    """

    p95_depth: float
    max_object_extent: float
    camera_height_m: float | None = None
    indoor: bool = False
    source: str = ""


def scale_bucket(stats: SceneStats) -> str:
    """Classify a scene into one of ``SCALE_BUCKETS``.

    First matching rule wins: camera above 10 m → drone; largest object
    under 5 cm → tiny_tabletop; under 2 m with sightlines under 3 m →
    tabletop; indoor flag → indoor (scanner source) or wild_indoor
    (handheld source); otherwise outdoor up to 500 m sightlines.
    """
    if not math.isfinite(stats.p95_depth) or stats.p95_depth <= 0.0:
        raise BucketError(f"p95_depth must be finite and positive, got {stats.p95_depth!r}")
    if not math.isfinite(stats.max_object_extent) or stats.max_object_extent < 0.0:
        raise BucketError(
            f"max_object_extent must be finite and non-negative, got {stats.max_object_extent!r}"
        )
    if stats.p95_depth > _P95_HARD_MAX:
        raise OutOfRange(f"p95 depth {stats.p95_depth:.1f} m beyond 0.7 km")
    if stats.max_object_extent < _EXTENT_HARD_MIN:
        raise OutOfRange(f"largest object {stats.max_object_extent*1000:.2f} mm below 1 mm")
    if stats.camera_height_m is not None and stats.camera_height_m > _DRONE_HEIGHT_MIN:
        return "drone"
    if stats.max_object_extent < _TINY_EXTENT_MAX:
        return "tiny_tabletop"
    if stats.max_object_extent < _TABLETOP_EXTENT_MAX and stats.p95_depth < _TABLETOP_P95_MAX:
        return "tabletop"
    if stats.indoor:
        return "wild_indoor" if "wild" in stats.source.lower() else "indoor"
    if stats.p95_depth < _OUTDOOR_P95_MAX:
        return "outdoor"
    raise OutOfRange(f"open scene with p95 depth {stats.p95_depth:.1f} m exceeds outdoor range")

"""Greedy association against an exhaustive per-frame assignment oracle.

The oracle replays the same track lifecycle rules (score filter, same-class
eligibility via IoU >= iou_min or center distance <= center_dist_max,
miss_max retirement, new tracks for unmatched detections) but replaces the
greedy matching inside each frame with a brute-force search over all
one-to-one assignments, maximizing (pairs matched, total IoU). Scenes use
well-separated linearly moving objects, so the optimum is unambiguous and
greedy must land on it every time.
"""

from itertools import permutations

import numpy as np
import pytest

from scaleforge.tracking import (
    AssociationConfig,
    ClassAbsent,
    Detection,
    NoAnchorTrack,
    SceneRejected,
    Track,
    appearance_order,
    associate,
    count_confirmed,
    iou,
    match_instance,
)


def test_paper_thresholds_are_the_defaults():
    cfg = AssociationConfig()
    assert cfg.score_min == 0.3
    assert cfg.iou_min == 0.4
    assert cfg.center_dist_max == 32.0
    assert cfg.confirm_count == 10
    assert cfg.scene_min_objects == 2
    assert cfg.scene_max_objects == 10


def test_iou_hand_computed():
    assert iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1.0 / 7.0)
    assert iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0
    assert iou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0


# ---------------------------------------------------------------- the oracle


def _predict(obs: dict[int, tuple], frame: int) -> tuple:
    frames = sorted(obs)
    last = obs[frames[-1]]
    cx, cy = 0.5 * (last[0] + last[2]), 0.5 * (last[1] + last[3])
    if len(frames) >= 2:
        prev = obs[frames[-2]]
        px, py = 0.5 * (prev[0] + prev[2]), 0.5 * (prev[1] + prev[3])
        dt = frames[-1] - frames[-2]
        gap = frame - frames[-1]
        cx += (cx - px) / dt * gap
        cy += (cy - py) / dt * gap
    hw, hh = 0.5 * (last[2] - last[0]), 0.5 * (last[3] - last[1])
    return (cx - hw, cy - hh, cx + hw, cy + hh)


def _oracle_tracks(frames_dets, cfg):
    """Optimal per-frame assignment by exhaustive permutation search."""
    tracks = []  # list of dicts: {"class", "obs", "miss"}
    for frame, dets in enumerate(frames_dets):
        dets = [d for d in dets if d.score >= cfg.score_min]
        dets = sorted(dets, key=lambda d: (d.class_name, d.bbox))
        live = [t for t in tracks if t["miss"] < cfg.miss_max]
        # eligibility per (track, det)
        elig = {}
        for ti, t in enumerate(live):
            pred = _predict(t["obs"], frame)
            pc = (0.5 * (pred[0] + pred[2]), 0.5 * (pred[1] + pred[3]))
            for di, d in enumerate(dets):
                if d.class_name != t["class"]:
                    continue
                ov = iou(pred, d.bbox)
                dc = (0.5 * (d.bbox[0] + d.bbox[2]), 0.5 * (d.bbox[1] + d.bbox[3]))
                dist = float(np.hypot(pc[0] - dc[0], pc[1] - dc[1]))
                if ov >= cfg.iou_min or dist <= cfg.center_dist_max:
                    elig[(ti, di)] = ov
        # brute-force best assignment: most pairs, then max summed IoU
        best, best_key = {}, (-1, -np.inf)
        n_t, n_d = len(live), len(dets)
        slots = list(range(n_d)) + [None] * n_t
        for perm in set(permutations(slots, n_t)):
            chosen = {
                ti: di
                for ti, di in enumerate(perm)
                if di is not None and (ti, di) in elig
            }
            if len(set(chosen.values())) != len(chosen):
                continue
            key = (len(chosen), sum(elig[(ti, di)] for ti, di in chosen.items()))
            if key > best_key:
                best_key, best = key, chosen
        matched_d = set(best.values())
        for ti, t in enumerate(live):
            if ti in best:
                t["obs"][frame] = tuple(dets[best[ti]].bbox)
                t["miss"] = 0
            else:
                t["miss"] += 1
        for di, d in enumerate(dets):
            if di not in matched_d:
                tracks.append({"class": d.class_name, "obs": {frame: tuple(d.bbox)}, "miss": 0})
    return tracks


def _random_scene(rng, t_len=20, canvas=(640, 480)):
    k = int(rng.integers(1, 5))
    classes = [rng.choice(["car", "person", "dog"]) for _ in range(k)]
    cells = rng.permutation(12)[:k]  # 4x3 grid keeps objects far apart
    objects = []
    for i in range(k):
        gx, gy = int(cells[i]) % 4, int(cells[i]) // 4
        w = float(rng.uniform(36, 60))
        h = float(rng.uniform(36, 60))
        x = 40.0 + 150.0 * gx + float(rng.uniform(0, 30))
        y = 40.0 + 140.0 * gy + float(rng.uniform(0, 25))
        vx = float(rng.uniform(-2.5, 2.5))
        vy = float(rng.uniform(-2.5, 2.5))
        start = int(rng.integers(0, 6)) if rng.random() < 0.25 else 0
        objects.append((classes[i], x, y, w, h, vx, vy, start))
    frames = []
    for f in range(t_len):
        dets = []
        for cls, x, y, w, h, vx, vy, start in objects:
            if f < start:
                continue
            bx = x + vx * f
            by = y + vy * f
            dets.append(Detection(f, cls, (bx, by, bx + w, by + h), 0.9))
        if rng.random() < 0.3:  # low-score junk the filter must drop
            dets.append(Detection(f, "car", (5.0, 5.0, 30.0, 30.0), 0.1))
        frames.append(dets)
    return frames


def _signature(tracks):
    """Order-free content signature: each track as its frame->bbox map."""
    sigs = []
    for t in tracks:
        obs = t.observations if isinstance(t, Track) else t["obs"]
        cls = t.class_name if isinstance(t, Track) else t["class"]
        sigs.append((cls, tuple(sorted(obs.items()))))
    return sorted(sigs)


def test_associate_matches_exhaustive_oracle_on_200_scenes():
    rng = np.random.default_rng(1234)
    cfg = AssociationConfig()
    agree = 0
    for _ in range(200):
        frames = _random_scene(rng)
        got = associate([d for fr in frames for d in fr], cfg)
        want = _oracle_tracks(frames, cfg)
        agree += _signature(got) == _signature(want)
    assert agree == 200


def test_nested_per_frame_input_is_equivalent_to_flat():
    rng = np.random.default_rng(5)
    frames = _random_scene(rng)
    flat = associate([d for fr in frames for d in fr])
    nested = associate(frames)
    assert _signature(flat) == _signature(nested)


def test_track_survives_short_occlusion():
    # object vanishes for 3 frames (< miss_max) and is re-acquired
    dets = []
    for f in range(15):
        if 5 <= f < 8:
            continue
        x = 100.0 + 2.0 * f
        dets.append(Detection(f, "car", (x, 100.0, x + 50, 150.0), 0.9))
    tracks = associate(dets)
    assert len(tracks) == 1
    assert tracks[0].first_frame == 0 and tracks[0].last_frame == 14


def test_track_splits_after_long_occlusion():
    dets = []
    for f in range(20):
        if 5 <= f < 12:  # 7 misses > miss_max=5
            continue
        dets.append(Detection(f, "car", (100.0, 100.0, 150.0, 150.0), 0.9))
    tracks = associate(dets)
    assert len(tracks) == 2


def test_confirmation_needs_ten_observations():
    mk = lambda n: associate(
        [Detection(f, "cup", (10.0, 10.0, 60.0, 60.0), 0.9) for f in range(n)]
    )[0]
    assert not mk(9).confirmed
    assert mk(10).confirmed


def test_count_confirmed_counts_and_gates():
    def steady(cls, x, n=12, side=50.0):
        return [Detection(f, cls, (x, 10.0, x + side, 10.0 + side), 0.9) for f in range(n)]

    tracks = associate(steady("car", 10.0) + steady("car", 300.0) + steady("dog", 500.0))
    assert count_confirmed(tracks) == {"car": 2, "dog": 1}


def test_count_confirmed_drops_small_tracks():
    big = [Detection(f, "car", (10.0, 10.0, 80.0, 80.0), 0.9) for f in range(12)]
    small = [Detection(f, "bug", (300.0, 300.0, 320.0, 320.0), 0.9) for f in range(12)]
    tracks = associate(big + small)
    # min side 20 < 32: the bug track is confirmed but below the size gate
    counts = count_confirmed(tracks + [Track(99, "car", {f: (0, 0, 70, 70) for f in range(12)}, True)])
    assert "bug" not in counts


def test_count_confirmed_scene_bounds():
    one = associate([Detection(f, "car", (10.0, 10.0, 80.0, 80.0), 0.9) for f in range(12)])
    with pytest.raises(SceneRejected):
        count_confirmed(one)  # 1 < scene_min_objects


def test_appearance_order_by_first_frame():
    t1 = Track(0, "car", {3: (0, 0, 10, 10)}, True)
    t2 = Track(1, "dog", {1: (0, 0, 10, 10)}, True)
    t3 = Track(2, "cat", {2: (0, 0, 10, 10)}, True)
    assert appearance_order([t1, t2, t3], ["car", "dog", "cat"]) == ["dog", "cat", "car"]
    with pytest.raises(ClassAbsent):
        appearance_order([t1], ["car", "ufo"])


def test_match_instance_same_and_different_track():
    dets = []
    for f in range(12):
        xa = 100.0 + 3.0 * f
        dets.append(Detection(f, "car", (xa, 100.0, xa + 50, 150.0), 0.9))
        dets.append(Detection(f, "car", (400.0, 300.0, 450.0, 350.0), 0.9))
    tracks = associate(dets)
    first = (100.0, 100.0, 150.0, 150.0)
    late_same = (100.0 + 3.0 * 11, 100.0, 150.0 + 3.0 * 11, 150.0)
    assert match_instance(first, late_same, 11, tracks) is True
    assert match_instance(first, (400.0, 300.0, 450.0, 350.0), 11, tracks) is False
    with pytest.raises(NoAnchorTrack):
        match_instance((0.0, 0.0, 5.0, 5.0), late_same, 11, tracks)

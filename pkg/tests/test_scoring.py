"""Answer extraction, per-item scoring, and benchmark aggregation."""

import numpy as np
import pytest

from scaleforge.scoring import (
    NoItems,
    ScoringError,
    Unparsable,
    aggregate,
    extract_answer,
    option_letter,
    score_item,
)


def test_option_letter_covers_a_through_f():
    assert [option_letter(i) for i in range(6)] == ["A", "B", "C", "D", "E", "F"]


def test_extract_answer_tag_wins_and_first_tag_wins():
    assert extract_answer("<answer>B</answer> no wait <answer>C</answer>", "mc") == "B"
    # inside a tag the first letter counts, outside the last one does
    assert extract_answer("<answer>A or B</answer>", "mc") == "A"
    assert extract_answer("could be A, could be B, final: C", "mc") == "C"


def test_extract_answer_mc_ignores_letters_inside_words():
    # \b keeps 'A' in 'Answer' or 'CABLE' from matching
    with pytest.raises(Unparsable):
        extract_answer("the cable runs along the floor", "mc")
    assert extract_answer("Answer: B", "mc") == "B"


def test_extract_answer_regression_normalizes_units():
    assert extract_answer("<answer>250 cm</answer>", "regression") == (2.5, "m")
    # untagged: the last quantity in the response is the commitment
    value, dim = extract_answer("roughly 3 m... actually 1.2 m", "regression")
    assert (value, dim) == (1.2, "m")
    with pytest.raises(Unparsable):
        extract_answer("no number here", "regression")


def test_extract_answer_free_falls_back_to_text():
    assert extract_answer("<answer> the blue mug </answer>", "free") == "the blue mug"
    assert extract_answer("<answer>4</answer>", "free") == (4.0, "")


def test_extract_answer_unknown_mode():
    with pytest.raises(ScoringError):
        extract_answer("<answer>B</answer>", "ordinal")


MC_RECORD = {
    "id": "s:task:00",
    "answer_mode": "mc",
    "answer": "a cup",
    "options": ["a bowl", "a cup", "a hat"],
}


def test_score_item_mc():
    assert score_item(MC_RECORD, "<answer>B</answer>") == 1.0
    assert score_item(MC_RECORD, "<answer>C</answer>") == 0.0
    assert score_item(MC_RECORD, "mumble") == 0.0  # unparsable scores zero
    # ground truth already stored as a bare letter
    assert score_item({**MC_RECORD, "answer": "B"}, "B") == 1.0


def test_score_item_mc_bad_record_raises():
    bad = {**MC_RECORD, "answer": "a spoon"}
    with pytest.raises(ScoringError):
        score_item(bad, "<answer>B</answer>")


def test_score_item_regression_anchors():
    record = {"answer_mode": "regression", "answer": {"value": 2.0, "unit": "m"}}
    assert score_item(record, "<answer>2 m</answer>") == 1.0
    assert score_item(record, "<answer>2.2 m</answer>") == pytest.approx(0.8)
    assert score_item(record, "<answer>3 m</answer>") == 0.0
    # unit mismatch scores zero, dimensionless passes through
    assert score_item(record, "<answer>2 deg</answer>") == 0.0
    assert score_item(record, "<answer>2.2</answer>") == pytest.approx(0.8)


def test_score_item_regression_numeric_gt():
    record = {"answer_mode": "regression", "answer": 4}
    assert score_item(record, "<answer>4</answer>") == 1.0
    assert score_item(record, "<answer>4.4</answer>") == pytest.approx(0.8)


def test_score_item_free_text_normalized_match():
    record = {"answer_mode": "free", "answer": "blue mug"}
    assert score_item(record, "<answer> Blue  MUG </answer>") == 1.0
    assert score_item(record, "<answer>red mug</answer>") == 0.0


def _rec(bucket, task):
    return {"scale_bucket": bucket, "task": task, "answer_mode": "mc"}


def test_aggregate_matches_hand_rollup():
    scored = [
        (_rec("tabletop", "counting"), 1.0),
        (_rec("tabletop", "counting"), 0.0),
        (_rec("tabletop", "obj_size"), 1.0),
        (_rec("room", "room_size"), 0.5),
    ]
    rep = aggregate(scored)
    tb = rep.per_bucket["tabletop"]
    assert tb["per_task"]["counting"] == {"mean": 0.5, "items": 2}
    assert tb["per_task"]["obj_size"] == {"mean": 1.0, "items": 1}
    # bucket mean is unweighted over tasks, not items
    assert tb["mean"] == pytest.approx(0.75)
    assert tb["items"] == 3
    assert rep.per_bucket["room"]["mean"] == 0.5
    assert rep.overall == pytest.approx((0.75 + 0.5) / 2)
    assert rep.overall_item_weighted == pytest.approx(2.5 / 4)
    assert rep.items_total == 4


def test_aggregate_random_vs_bruteforce():
    rng = np.random.default_rng(11)
    buckets = ["tabletop", "room", "outdoor"]
    tasks = ["a", "b", "c", "d"]
    for _ in range(20):
        n = int(rng.integers(5, 40))
        scored = [
            (_rec(buckets[rng.integers(3)], tasks[rng.integers(4)]), float(rng.uniform()))
            for _ in range(n)
        ]
        rep = aggregate(scored)
        cells = {}
        for r, s in scored:
            cells.setdefault(r["scale_bucket"], {}).setdefault(r["task"], []).append(s)
        want_bucket_means = [
            np.mean([np.mean(v) for v in tasks_.values()]) for tasks_ in cells.values()
        ]
        assert rep.overall == pytest.approx(np.mean(want_bucket_means), abs=1e-12)
        assert rep.overall_item_weighted == pytest.approx(
            np.mean([s for _, s in scored]), abs=1e-12
        )
        assert rep.items_total == n
        assert set(rep.per_bucket) == set(cells)


def test_aggregate_defaults_and_empty():
    rep = aggregate([({}, 1.0)])
    assert rep.per_bucket["unknown"]["per_task"]["unknown"]["mean"] == 1.0
    with pytest.raises(NoItems):
        aggregate([])


def test_report_round_trips_to_dict():
    rep = aggregate([(_rec("tabletop", "counting"), 1.0)])
    d = rep.to_dict()
    assert d["overall"] == 1.0
    assert d["items_total"] == 1
    assert "tabletop" in d["per_bucket"]

"""Benchmark scoring: answer extraction, per-item scores, aggregation.

Multiple-choice items score 0/1 on the option letter; regression items use
mean relative accuracy over the shared confidence thresholds, so the
evaluation metric and the training answer reward coincide by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .metrics import mean_relative_accuracy
from .units import UnparsableQuantity, parse_quantity


class ScoringError(ValueError):
    pass


class Unparsable(ScoringError):
    pass


class NoItems(ScoringError):
    pass


_ANSWER_TAG_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
# option letters run A..F (records carry 2 to 6 options)
_MC_LETTER_RE = re.compile(r"\b([A-F])\b")


def option_letter(index: int) -> str:
    return chr(ord("A") + index)


def extract_answer(response: str, mode: str):
    """Pull the model's answer out of a raw response string.

    The first <answer> tag pair wins when present. Without tags, mc falls
    back to the last standalone option letter and regression to the last
    number (with an optional unit, normalized to meters). Raises Unparsable
    when nothing usable is found.
    """
    m = _ANSWER_TAG_RE.search(response)
    body = m.group(1) if m else None
    if mode == "mc":
        text = body if body is not None else response
        letters = _MC_LETTER_RE.findall(text)
        if not letters:
            raise Unparsable(f"no option letter in {text[:80]!r}")
        return letters[0] if body is not None else letters[-1]
    if mode in ("regression", "free"):
        text = body if body is not None else response
        try:
            value, dim = parse_quantity(text)
        except UnparsableQuantity as e:
            if mode == "free":
                return text.strip()
            raise Unparsable(str(e)) from None
        return value, dim
    raise ScoringError(f"unknown answer mode {mode!r}")


def _mc_gt_letter(record: dict) -> str:
    answer = record["answer"]
    options = record.get("options") or []
    if isinstance(answer, str) and len(answer.strip()) == 1 and answer.strip() in "ABCDEF":
        return answer.strip()
    if answer in options:
        return option_letter(options.index(answer))
    raise ScoringError(f"mc record {record.get('id')!r} has no resolvable answer letter")


def score_item(record: dict, response: str) -> float:
    """Score one response against one QA record in [0, 1].

    Unparsable responses and unit mismatches score 0 (signalled, not
    raised). free-mode items with non-numeric answers use normalized exact
    string match.
    """
    mode = record.get("answer_mode", "mc")
    try:
        extracted = extract_answer(response, mode)
    except Unparsable:
        return 0.0
    if mode == "mc":
        return 1.0 if extracted == _mc_gt_letter(record) else 0.0

    gt = record["answer"]
    if isinstance(gt, dict):
        gt_value, gt_unit = float(gt["value"]), gt.get("unit", "")
    elif isinstance(gt, (int, float)):
        gt_value, gt_unit = float(gt), ""
    else:
        # free-form text ground truth
        pred = extracted if isinstance(extracted, str) else str(extracted[0])
        return 1.0 if " ".join(pred.lower().split()) == " ".join(str(gt).lower().split()) else 0.0

    if isinstance(extracted, str):
        return 0.0
    value, dim = extracted
    if dim != "" and dim != gt_unit:
        return 0.0  # unit mismatch
    return mean_relative_accuracy(value, gt_value)


@dataclass
class ScoreReport:
    per_bucket: dict
    overall: float
    overall_item_weighted: float
    items_total: int

    def to_dict(self) -> dict:
        return {
            "per_bucket": self.per_bucket,
            "overall": self.overall,
            "overall_item_weighted": self.overall_item_weighted,
            "items_total": self.items_total,
        }


def aggregate(scored) -> ScoreReport:
    """Aggregate (record, score) pairs.

    Per-(bucket, task) means first; a bucket's mean is the unweighted mean
    of its task means; the headline overall is the unweighted mean of bucket
    means. The item-weighted overall (plain mean over items) is always
    reported alongside. Buckets with no items are simply absent.
    """
    scored = list(scored)
    if not scored:
        raise NoItems("nothing to aggregate")
    cells: dict[str, dict[str, list[float]]] = {}
    for record, score in scored:
        bucket = record.get("scale_bucket", "unknown")
        task = record.get("task", "unknown")
        cells.setdefault(bucket, {}).setdefault(task, []).append(float(score))

    per_bucket = {}
    bucket_means = []
    for bucket in sorted(cells):
        task_means = {}
        for task in sorted(cells[bucket]):
            vals = cells[bucket][task]
            task_means[task] = {"mean": float(np.mean(vals)), "items": len(vals)}
        bmean = float(np.mean([tm["mean"] for tm in task_means.values()]))
        per_bucket[bucket] = {
            "mean": bmean,
            "items": sum(tm["items"] for tm in task_means.values()),
            "per_task": task_means,
        }
        bucket_means.append(bmean)

    return ScoreReport(
        per_bucket=per_bucket,
        overall=float(np.mean(bucket_means)),
        overall_item_weighted=float(np.mean([s for _, s in scored])),
        items_total=len(scored),
    )

"""Anchored rewards and group-relative policy optimization utilities.

Responses carry XML-ish anchor tags in the canonical order

    <think> ... </think> <semantics> ... </semantics>
    <scale> ... </scale> <answer> ... </answer>

The progressive reward chains the anchor rewards in the fixed order
(answer, scale, semantic): r_bar = sum over prefixes of the product of the
rewards seen so far, so a wrong answer zeroes everything downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .metrics import mean_relative_accuracy
from .seeding import fnv1a64
from .units import UnparsableQuantity, parse_quantity

CANONICAL_TAGS = ("think", "semantics", "scale", "answer")


class RewardError(ValueError):
    pass


class MissingAnswerTag(RewardError):
    pass


class MalformedScale(RewardError):
    pass


class NonPositiveScale(RewardError):
    pass


class ZeroVector(RewardError):
    pass


class DimMismatch(RewardError):
    pass


class GroupTooSmall(RewardError):
    pass


# ------------------------------------------------------------------ anchors


@dataclass
class Anchors:
    think: str | None
    semantics: str | None
    scale: float | None  # meters
    answer: str


def _first_span(text: str, tag: str):
    open_pos = text.find(f"<{tag}>")
    if open_pos < 0:
        return None
    close_pos = text.find(f"</{tag}>", open_pos)
    if close_pos < 0:
        return None
    return open_pos, close_pos + len(tag) + 3, text[open_pos + len(tag) + 2 : close_pos]


def parse_anchors(response: str) -> Anchors:
    """Extract the first occurrence of each anchor tag pair.

    The scale anchor is parsed as a number with an optional length unit and
    normalized to meters (a bare number is taken as meters already).
    Raises MissingAnswerTag when no <answer> pair exists and MalformedScale
    when a <scale> pair exists but does not parse to a positive length.
    """
    spans = {tag: _first_span(response, tag) for tag in CANONICAL_TAGS}
    if spans["answer"] is None:
        raise MissingAnswerTag("no <answer> ... </answer> pair")
    scale_m = None
    if spans["scale"] is not None:
        raw = spans["scale"][2].strip()
        try:
            value, dim = parse_quantity(raw)
        except UnparsableQuantity:
            raise MalformedScale(f"cannot parse scale anchor {raw!r}") from None
        if dim not in ("", "m") or not np.isfinite(value) or value <= 0:
            raise MalformedScale(f"scale anchor {raw!r} is not a positive length")
        scale_m = float(value)
    return Anchors(
        think=spans["think"][2] if spans["think"] else None,
        semantics=spans["semantics"][2] if spans["semantics"] else None,
        scale=scale_m,
        answer=spans["answer"][2].strip(),
    )


def r_format(response: str, required: tuple[str, ...] = ("think", "answer")) -> float:
    """1.0 iff the required tags are present, every present canonical tag is
    a single well-nested pair, and the pairs appear in canonical order."""
    spans = []
    for tag in CANONICAL_TAGS:
        opens = [m.start() for m in re.finditer(re.escape(f"<{tag}>"), response)]
        closes = [m.start() for m in re.finditer(re.escape(f"</{tag}>"), response)]
        if not opens and not closes:
            if tag in required:
                return 0.0
            continue
        if len(opens) != 1 or len(closes) != 1 or closes[0] < opens[0]:
            return 0.0
        spans.append((opens[0], closes[0] + len(tag) + 3))
    # pairwise disjoint and already in canonical order by construction
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        if s2 < e1:
            return 0.0
    return 1.0


# ------------------------------------------------------------- anchor scores


_LETTER_RE = re.compile(r"\b([A-Z])\b")


def r_answer(pred_answer: str, record_answer, mode: str) -> float:
    """Correctness reward for the answer anchor text.

    mode "mc": exact option-letter match (0/1). mode "regression":
    mean relative accuracy of the parsed quantity against the ground truth
    {"value", "unit"}. Unparsable or unit-mismatched predictions score 0
    (signalled, never raised).
    """
    if mode == "mc":
        m = _LETTER_RE.search(pred_answer.strip())
        if not m:
            return 0.0
        return 1.0 if m.group(1) == str(record_answer).strip() else 0.0
    if mode in ("regression", "free"):
        if isinstance(record_answer, dict):
            gt_value = float(record_answer["value"])
            gt_unit = record_answer.get("unit", "")
        else:
            gt_value, gt_unit = float(record_answer), ""
        try:
            value, dim = parse_quantity(pred_answer)
        except UnparsableQuantity:
            return 0.0
        if dim != "" and dim != gt_unit:
            return 0.0  # unit mismatch
        return mean_relative_accuracy(value, gt_value)
    raise RewardError(f"unknown answer mode {mode!r}")


def r_scale(c_ans: float, c_gt: float) -> float:
    """max(0, 1 - |ln c_ans - ln c_gt| / 2); both scales must be positive."""
    if not (c_ans > 0 and c_gt > 0) or not (np.isfinite(c_ans) and np.isfinite(c_gt)):
        raise NonPositiveScale(f"scales must be positive, got {c_ans}, {c_gt}")
    return max(0.0, 1.0 - abs(np.log(c_ans) - np.log(c_gt)) / 2.0)


class HashedBagEmbedder:
    """256-dim bag-of-unigrams embedding with FNV-1a token hashing.

    Deterministic and dependency-free; any callable str -> vector can stand
    in as the provider for semantically stronger embeddings.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        for token in re.findall(r"[a-z0-9]+", text.lower()):
            v[fnv1a64(token) % self.dim] += 1.0
        return v


default_embedder = HashedBagEmbedder()


def r_semantic(pred_anchor, gt_anchor, embed=None) -> float:
    """Cosine similarity of anchor embeddings, clamped to [0, 1].

    Accepts raw text (embedded with the provider) or ready-made vectors.
    """
    embed = embed or default_embedder
    a = embed(pred_anchor) if isinstance(pred_anchor, str) else np.asarray(pred_anchor, dtype=float)
    b = embed(gt_anchor) if isinstance(gt_anchor, str) else np.asarray(gt_anchor, dtype=float)
    if a.shape != b.shape:
        raise DimMismatch(f"{a.shape} vs {b.shape}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("zero-norm embedding")
    cos = float(a @ b) / (na * nb)
    return min(1.0, max(0.0, cos))


def progressive_reward(r_ans: float, r_scl: float, r_sem: float,
                       required: tuple[str, ...] = ("scale", "semantic")) -> float:
    """Progressive anchor chain in the fixed order (answer, scale, semantic).

    r_bar = sum over k of the product of the first k anchor rewards, where
    only the required anchors (plus the always-required answer) take part.
    With no required extras this is exactly r_ans.
    """
    total = r_ans
    prefix = r_ans
    if "scale" in required:
        prefix = prefix * r_scl
        total = total + prefix
    if "semantic" in required:
        prefix = prefix * r_sem
        total = total + prefix
    return total


@dataclass
class RewardBreakdown:
    r_format: float
    r_answer: float
    r_scale: float
    r_semantic: float
    r_bar: float


def breakdown_for(record: dict, response: str, embed=None) -> RewardBreakdown:
    """Full reward breakdown of one response against one QA record.

    The record decides which anchors are required: semantics when the record
    has a semantic anchor, scale when it has a scale anchor. Parse failures
    translate to zero component rewards rather than exceptions.
    """
    anchors_doc = record.get("anchors", {}) or {}
    required_extras = tuple(
        name for name, key in (("scale", "scale"), ("semantic", "semantic"))
        if anchors_doc.get(key) is not None
    )
    required_tags = ("think",) + tuple(
        {"scale": "scale", "semantic": "semantics"}[r] for r in required_extras
    ) + ("answer",)
    fmt = r_format(response, required=required_tags)

    try:
        anchors = parse_anchors(response)
    except RewardError:
        return RewardBreakdown(fmt, 0.0, 0.0, 0.0, 0.0)

    mode = record.get("answer_mode", "mc")
    gt = record.get("answer")
    if mode == "mc":
        # records store the correct option text; the letter reward wants A..F
        options = record.get("options") or []
        if gt in options:
            gt = chr(ord("A") + options.index(gt))
    ans = r_answer(anchors.answer, gt, mode)

    scl = 0.0
    if "scale" in required_extras:
        gt_scale = float(anchors_doc["scale"])
        if anchors.scale is not None and anchors.scale > 0 and gt_scale > 0:
            scl = r_scale(anchors.scale, gt_scale)

    sem = 0.0
    if "semantic" in required_extras and anchors.semantics is not None:
        try:
            sem = r_semantic(anchors.semantics, str(anchors_doc["semantic"]), embed)
        except RewardError:
            sem = 0.0

    r_bar = progressive_reward(ans, scl, sem, required=required_extras)
    return RewardBreakdown(fmt, ans, scl, sem, r_bar)


# ---------------------------------------------------------------------- GRPO


def grpo_advantages(rewards) -> np.ndarray:
    """Group-normalized advantages (R - mean) / population std.

    A degenerate group (std < 1e-8) gets all-zero advantages. Groups need at
    least two members.
    """
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise GroupTooSmall(f"need >= 2 rewards, got shape {r.shape}")
    std = float(r.std())  # population std (ddof = 0)
    if std < 1e-8:
        return np.zeros_like(r)
    return (r - r.mean()) / std


@dataclass
class PolicyGroup:
    """Toy categorical-policy group for the clipped objective.

    Every response is a sequence of token ids under a shared K-way
    categorical policy; log-probabilities add over tokens. new_logits are
    the free parameters; the old and reference policies are fixed per-token
    log-probability vectors (build the identity case by passing the
    log-softmax of new_logits for both).
    """

    new_logits: np.ndarray           # (K,)
    old_logprobs: np.ndarray         # (K,)
    ref_logprobs: np.ndarray         # (K,)
    responses: list                  # list of token-id sequences
    rewards: np.ndarray | None = None  # (G,), used when advantages not given


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def grpo_objective(group: PolicyGroup, epsilon: float = 0.2, beta: float = 0.04,
                   advantages=None) -> tuple[float, np.ndarray]:
    """Clipped surrogate with an exact categorical KL penalty.

        J = mean_i min(rho_i A_i, clip(rho_i, 1 - eps, 1 + eps) A_i)
            - beta * sum_k p_k ln(p_k / q_k)

    rho_i is the new/old probability ratio of response i, A_i the group
    advantage (computed from group.rewards unless pre-normalized advantages
    are passed), p the new policy, q the reference. Returns (J, dJ/dlogits).
    When new, old, and reference policies coincide, J equals mean(A) exactly.
    """
    z = np.asarray(group.new_logits, dtype=float)
    logp = _log_softmax(z)
    p = np.exp(logp)
    log_ref = np.asarray(group.ref_logprobs, dtype=float)
    log_old = np.asarray(group.old_logprobs, dtype=float)
    if advantages is None:
        if group.rewards is None:
            raise RewardError("need rewards or advantages")
        adv = grpo_advantages(group.rewards)
    else:
        adv = np.asarray(advantages, dtype=float)
    g = len(group.responses)
    if g < 2:
        raise GroupTooSmall(f"need >= 2 responses, got {g}")
    if len(adv) != g:
        raise RewardError("advantage count does not match responses")

    k = z.size
    terms = np.empty(g)
    grad = np.zeros(k)
    for i, toks in enumerate(group.responses):
        toks = np.asarray(toks, dtype=int)
        counts = np.bincount(toks, minlength=k).astype(float)
        length = float(toks.size)
        log_ratio = float((counts * logp).sum() - (counts * log_old).sum())
        rho = float(np.exp(log_ratio))
        unclipped = rho * adv[i]
        clipped = float(np.clip(rho, 1.0 - epsilon, 1.0 + epsilon)) * adv[i]
        if unclipped <= clipped:
            terms[i] = unclipped
            grad += adv[i] * rho * (counts - length * p)
        else:
            terms[i] = clipped  # rho strictly outside the clip box: zero grad
    grad /= g

    log_ratio_ref = logp - log_ref
    kl = float((p * log_ratio_ref).sum())
    grad -= beta * p * (log_ratio_ref - kl)
    j = float(np.mean(terms)) - beta * kl
    return j, grad

"""Wrong-answer synthesis for multiple-choice records.

Numeric distractors are drawn log-uniformly from [gt/3, 3·gt] with the band
(0.9·gt, 1.1·gt) excluded, so no distractor sits within 10% of the truth and
all are within a factor of 3.  Categorical distractors are sampled without
replacement from the task's label universe minus the answer.
"""

from __future__ import annotations

import math

from ..seeding import SplitMix64
from ..units import format_value

_LN3 = math.log(3.0)
_MAX_DRAWS = 1000


class DistractorError(ValueError):
    pass


class UniverseTooSmall(DistractorError):
    pass


def numeric_distractors(
    gt: float,
    rng: SplitMix64,
    k: int = 3,
    *,
    integer: bool = False,
    taken: tuple[str, ...] = (),
) -> list[float]:
    """k wrong numbers near gt, distinct after display rounding.

    Distinctness is judged on the formatted string (3 significant digits, or
    the integer repr when integer=True) so two options never render the same.
    """
    if not (math.isfinite(gt) and gt > 0):
        raise DistractorError(f"numeric ground truth must be positive, got {gt!r}")
    fmt = (lambda v: str(int(round(v)))) if integer else format_value
    seen = {fmt(gt), *taken}
    out: list[float] = []
    draws = 0
    while len(out) < k:
        draws += 1
        if draws > _MAX_DRAWS:
            raise UniverseTooSmall(
                f"could not find {k} distinct distractors near {gt!r} "
                f"after {_MAX_DRAWS} draws"
            )
        v = gt * math.exp((2.0 * rng.uniform() - 1.0) * _LN3)
        if 0.9 * gt < v < 1.1 * gt:
            continue
        if integer:
            v = float(round(v))
            if v < 0 or 0.9 * gt < v < 1.1 * gt:
                continue
        key = fmt(v)
        if key in seen:
            continue
        seen.add(key)
        out.append(v)
    return out


def categorical_distractors(
    answer: str,
    universe: list[str] | tuple[str, ...],
    rng: SplitMix64,
    k: int = 3,
) -> list[str]:
    pool = [u for u in universe if u != answer]
    if len(pool) < k:
        raise UniverseTooSmall(
            f"need {k} distractors but universe has only {len(pool)} besides the answer"
        )
    return rng.sample(pool, k)


def assemble_options(answer_text: str, distractor_texts: list[str], rng: SplitMix64) -> list[str]:
    """Shuffle the correct option in among the distractors with the record rng."""
    options = [answer_text, *distractor_texts]
    if len(set(options)) != len(options):
        raise DistractorError(f"options collide: {options!r}")
    if not 2 <= len(options) <= 6:
        raise DistractorError(f"mc records take 2-6 options, got {len(options)}")
    rng.shuffle(options)
    return options

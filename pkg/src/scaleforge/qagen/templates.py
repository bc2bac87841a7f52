"""Question template loading and rendering.

Templates live in ``templates/<task>.txt``, one per line, UTF-8, with
``{slot}`` placeholders.  The shipped starter set carries at least 15
templates per task; the asset directory is versioned through its VERSION
file so a regenerated corpus can be told apart from the starter set.
"""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path

from ..seeding import SplitMix64

_ASSET_DIR = Path(__file__).resolve().parent / "templates"
_SLOT_RE = re.compile(r"\{([A-Za-z0-9_]+)\}")


class TemplateError(ValueError):
    pass


class NoTemplates(TemplateError):
    pass


class UnknownSlot(TemplateError):
    pass


def template_version() -> str:
    return (_ASSET_DIR / "VERSION").read_text(encoding="utf-8").strip()


@lru_cache(maxsize=None)
def load_templates(task: str) -> tuple[str, ...]:
    """All question templates for a task, in file order."""
    path = _ASSET_DIR / f"{task}.txt"
    if not path.exists():
        raise NoTemplates(f"no template file for task {task!r}")
    lines = tuple(
        ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()
    )
    if not lines:
        raise NoTemplates(f"template file for task {task!r} is empty")
    return lines


def fill_slots(template: str, slots: dict[str, str]) -> str:
    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in slots:
            raise UnknownSlot(f"template slot {{{name}}} has no value")
        return str(slots[name])

    return _SLOT_RE.sub(sub, template)


def render_template(task: str, slots: dict[str, str], rng: SplitMix64) -> str:
    """Pick one of the task's templates uniformly with rng and fill it."""
    templates = load_templates(task)
    return fill_slots(templates[rng.randint(len(templates))], slots)

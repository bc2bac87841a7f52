"""Question/answer generation over annotated scenes."""

from .annotations import (
    AnnotationError,
    ObjectAnnotation,
    SceneAnnotations,
    annotate_scene,
    mask_bbox,
    p95,
)
from .buckets import SCALE_BUCKETS, BucketError, OutOfRange, SceneStats, scale_bucket
from .builder import (
    NUMERIC_TASKS,
    TASK_BUCKETS,
    TASKS,
    NoMask,
    QAGenConfig,
    ReferringError,
    SkipTask,
    attach_referring,
    build_qa,
    resolve_referring,
)
from .distractors import (
    DistractorError,
    UniverseTooSmall,
    assemble_options,
    categorical_distractors,
    numeric_distractors,
)
from .relations import RELATION_LABELS, classify_pair, classify_scene
from .templates import (
    NoTemplates,
    TemplateError,
    UnknownSlot,
    fill_slots,
    load_templates,
    render_template,
    template_version,
)

__all__ = [
    "AnnotationError",
    "BucketError",
    "DistractorError",
    "NUMERIC_TASKS",
    "NoMask",
    "NoTemplates",
    "ObjectAnnotation",
    "OutOfRange",
    "QAGenConfig",
    "RELATION_LABELS",
    "ReferringError",
    "SCALE_BUCKETS",
    "SceneAnnotations",
    "SceneStats",
    "SkipTask",
    "TASK_BUCKETS",
    "TASKS",
    "TemplateError",
    "UniverseTooSmall",
    "UnknownSlot",
    "annotate_scene",
    "assemble_options",
    "attach_referring",
    "build_qa",
    "categorical_distractors",
    "classify_pair",
    "classify_scene",
    "fill_slots",
    "load_templates",
    "mask_bbox",
    "numeric_distractors",
    "p95",
    "render_template",
    "resolve_referring",
    "scale_bucket",
    "template_version",
]

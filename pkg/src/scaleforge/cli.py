"""Command-line entry points: prepare, generate, reward, score, demo-fusion.

Exit codes: 0 ok, 1 check failure, 2 malformed input, 3 empty output,
4 id alignment failure.  Input errors print a machine-readable JSON object
on stderr.  Every command is deterministic given flags and seed, and scene
batches processed with --jobs N produce outputs identical to --jobs 1.

Options resolve as: command-line flag, then config-file key (flat key=value
lines via --config), then the SCALEFORGE_SEED environment variable for the
seed, then the built-in default.
"""

from __future__ import annotations

import argparse
import os
import sys
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .depth import DepthError, rescale_depth, temporal_smooth
from .formats import (
    FormatError,
    canonical_json,
    load_scene,
    read_jsonl,
    write_jsonl,
    write_tensor,
)
from .fusion import checks_pass, run_fusion_checks
from .qagen.annotations import AnnotationError, annotate_scene, p95
from .qagen.buckets import BucketError, OutOfRange
from .qagen.builder import (
    TASKS,
    QAGenConfig,
    ReferringError,
    attach_referring,
    build_qa,
)
from .rewards import PolicyGroup, RewardError, breakdown_for, grpo_advantages, grpo_objective
from .scoring import ScoringError, aggregate, score_item

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_ALIGN = 4

REFERRING_MODES = ("none", "point", "bbox", "mask")


class _Empty(Exception):
    """Command produced no output rows (exit 3)."""


class _Misaligned(Exception):
    """Prediction ids do not line up with QA ids (exit 4)."""


def _emit_error(command: str, exc: BaseException) -> None:
    sys.stderr.write(canonical_json({
        "command": command,
        "error": type(exc).__name__,
        "detail": str(exc),
    }))


# ------------------------------------------------------------- configuration


def _load_config(path) -> dict[str, str]:
    """Flat key=value option file; # starts a comment line."""
    cfg: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for ln, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise FormatError(f"{path}:{ln}: expected key=value, got {s!r}")
        key, value = s.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _opt(args, cfgf: dict, key: str, default, conv=str):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in cfgf:
        return conv(cfgf[key])
    return default


def _resolve_seed(args, cfgf: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in cfgf:
        return int(cfgf["seed"])
    return int(os.environ.get("SCALEFORGE_SEED", "0"))


def _run_jobs(worker, jobs: list, n_jobs: int) -> list:
    if n_jobs <= 1 or len(jobs) <= 1:
        return [worker(j) for j in jobs]
    with get_context("spawn").Pool(min(n_jobs, len(jobs))) as pool:
        return pool.map(worker, jobs)


# ------------------------------------------------------------------- prepare


def _prepare_scene(job: tuple) -> tuple:
    scene_dir, lam, scale_hint = job
    try:
        bundle = load_scene(scene_dir)
        if bundle.depth is None or bundle.depth_ref is None:
            raise FormatError(f"{scene_dir}: prepare needs files.depth and files.depth_ref")
        smoothed = temporal_smooth(bundle.depth, bundle.depth_ref, lam)
        if scale_hint is not None:
            smoothed = rescale_depth(smoothed, scale_hint)
        out = smoothed.astype(np.float32)
        write_tensor(Path(scene_dir) / "depth_consistent.svdf", out)
        bundle.depth_consistent = out

        stats = {
            "scene_id": bundle.scene_id,
            "lambda": float(lam),
            "scale_hint": None if scale_hint is None else float(scale_hint),
            "n_frames": bundle.n_frames,
            "p95_depth": p95(out),
            "object_extents": {},
            "max_object_extent": None,
            "scale_bucket": None,
            "out_of_range": False,
        }
        try:
            ann = annotate_scene(bundle)
            stats["object_extents"] = {
                str(oid): obj.extent for oid, obj in sorted(ann.objects.items())
            }
            stats["max_object_extent"] = ann.stats.max_object_extent
            stats["scale_bucket"] = ann.bucket
        except OutOfRange as e:
            stats["out_of_range"] = True
            stats["flag"] = str(e)
        except AnnotationError:
            pass  # depth-only scene: no extents to report
        Path(scene_dir, "prepared.json").write_text(canonical_json(stats), encoding="utf-8")
        line = f"{bundle.scene_id}: depth_consistent.svdf written, p95={stats['p95_depth']:.3f} m"
        return ("ok", str(scene_dir), line)
    except (FormatError, DepthError, BucketError, AnnotationError, OSError, ValueError) as e:
        return ("error", str(scene_dir), type(e).__name__, str(e))


def cmd_prepare(args, cfgf: dict) -> int:
    lam = _opt(args, cfgf, "lambda", 1.0, float)
    scale_hint = _opt(args, cfgf, "scale-hint", None, float)
    n_jobs = _opt(args, cfgf, "jobs", 1, int)
    jobs = [(d, lam, scale_hint) for d in args.scenes]
    for result in _run_jobs(_prepare_scene, jobs, n_jobs):
        if result[0] == "error":
            raise FormatError(f"{result[1]}: [{result[2]}] {result[3]}")
        print(result[2])
    return EXIT_OK


# ------------------------------------------------------------------ generate


def _generate_scene(job: tuple) -> tuple:
    scene_dir, tasks, modes, seed, referring, max_records = job
    try:
        bundle = load_scene(scene_dir, load_consistent=True)
        cfg = QAGenConfig(modes=tuple(modes), max_records=max_records)
        try:
            ann = annotate_scene(bundle)
        except OutOfRange as e:
            records: list[dict] = []
            skips = {t: f"scene flagged out of range: {e}" for t in (tasks or TASKS)}
        except AnnotationError as e:
            records = []
            skips = {t: f"annotation failed: {e}" for t in (tasks or TASKS)}
        else:
            records, skips = build_qa(ann, tasks=tasks, cfg=cfg, master_seed=seed)
            if referring != "none":
                with_ref = []
                for record in records:
                    try:
                        with_ref.append(attach_referring(record, referring, ann))
                    except ReferringError:
                        with_ref.append(record)  # target has no usable mask
                records = with_ref
        write_jsonl(Path(scene_dir) / "qa.jsonl", records)
        Path(scene_dir, "qa_skips.json").write_text(
            canonical_json({"scene_id": bundle.scene_id, "skips": skips}), encoding="utf-8"
        )
        return ("ok", str(scene_dir), len(records), len(skips))
    except (FormatError, BucketError, AnnotationError, OSError, ValueError) as e:
        return ("error", str(scene_dir), type(e).__name__, str(e))


def cmd_generate(args, cfgf: dict) -> int:
    tasks_value = _opt(args, cfgf, "tasks", None)
    tasks = tuple(t.strip() for t in tasks_value.split(",") if t.strip()) if tasks_value else None
    modes_value = _opt(args, cfgf, "modes", "mc,regression")
    modes = tuple(m.strip() for m in modes_value.split(",") if m.strip())
    for m in modes:
        if m not in ("mc", "regression"):
            raise FormatError(f"unknown answer mode {m!r}")
    referring = _opt(args, cfgf, "referring", "none")
    if referring not in REFERRING_MODES:
        raise FormatError(f"unknown referring mode {referring!r}")
    seed = _resolve_seed(args, cfgf)
    max_records = _opt(args, cfgf, "max-records", 25, int)
    n_jobs = _opt(args, cfgf, "jobs", 1, int)

    jobs = [(d, tasks, modes, seed, referring, max_records) for d in args.scenes]
    total = 0
    for result in _run_jobs(_generate_scene, jobs, n_jobs):
        if result[0] == "error":
            raise FormatError(f"{result[1]}: [{result[2]}] {result[3]}")
        _, scene_dir, n_records, n_skips = result
        total += n_records
        print(f"{scene_dir}: {n_records} records, {n_skips} tasks skipped")
    if total == 0:
        raise _Empty("no QA records produced")
    return EXIT_OK


# -------------------------------------------------------------------- reward


def _load_aligned(qa_path, pred_path) -> tuple[dict, list]:
    qa_rows = read_jsonl(qa_path)
    preds = read_jsonl(pred_path)
    qa: dict[str, dict] = {}
    for i, row in enumerate(qa_rows):
        if "id" not in row:
            raise FormatError(f"{qa_path}: row {i} has no id")
        qa[row["id"]] = row
    for i, row in enumerate(preds):
        if "id" not in row or "response" not in row:
            raise FormatError(f"{pred_path}: row {i} needs id and response")
    missing = sorted({p["id"] for p in preds} - set(qa))
    if missing:
        raise _Misaligned(f"{len(missing)} prediction ids missing from qa: {missing[:5]}")
    return qa, preds


def cmd_reward(args, cfgf: dict) -> int:
    qa, preds = _load_aligned(args.qa, args.predictions)
    epsilon = _opt(args, cfgf, "epsilon", 0.2, float)
    beta = _opt(args, cfgf, "beta", 0.04, float)
    out_dir = Path(_opt(args, cfgf, "out", Path(args.predictions).parent))
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    groups: dict[str, list[int]] = {}
    for p in preds:
        b = breakdown_for(qa[p["id"]], p["response"])
        row = {
            "id": p["id"],
            "r_format": b.r_format,
            "r_answer": b.r_answer,
            "r_scale": b.r_scale,
            "r_semantic": b.r_semantic,
            "r_bar": b.r_bar,
        }
        if "group" in p:
            row["group"] = p["group"]
            groups.setdefault(str(p["group"]), []).append(len(rows))
        rows.append(row)
    if not rows:
        raise _Empty("no predictions to reward")
    write_jsonl(out_dir / "rewards.jsonl", rows)

    adv_rows = []
    for group in sorted(groups):
        idxs = groups[group]
        # total training reward: format gate plus the progressive chain
        totals = [rows[i]["r_format"] + rows[i]["r_bar"] for i in idxs]
        adv = grpo_advantages(totals)
        arow = {
            "group": group,
            "ids": [rows[i]["id"] for i in idxs],
            "advantages": [float(a) for a in adv],
        }
        policy = next((preds[i]["policy"] for i in idxs if "policy" in preds[i]), None)
        if policy is not None and all("tokens" in preds[i] for i in idxs):
            pg = PolicyGroup(
                new_logits=np.asarray(policy["new_logits"], dtype=float),
                old_logprobs=np.asarray(policy["old_logprobs"], dtype=float),
                ref_logprobs=np.asarray(policy["ref_logprobs"], dtype=float),
                responses=[preds[i]["tokens"] for i in idxs],
                rewards=np.asarray(totals),
            )
            objective, _ = grpo_objective(pg, epsilon=epsilon, beta=beta)
            arow["objective"] = objective
        adv_rows.append(arow)
    if adv_rows:
        write_jsonl(out_dir / "advantages.jsonl", adv_rows)
    print(f"{len(rows)} rewards, {len(adv_rows)} groups -> {out_dir}")
    return EXIT_OK


# --------------------------------------------------------------------- score


def cmd_score(args, cfgf: dict) -> int:
    qa, preds = _load_aligned(args.qa, args.predictions)
    if not preds:
        raise _Empty("no predictions to score")
    scored = [(qa[p["id"]], score_item(qa[p["id"]], p["response"])) for p in preds]
    report = aggregate(scored)
    out_path = Path(_opt(args, cfgf, "out", "report.json"))
    out_path.write_text(canonical_json(report.to_dict()), encoding="utf-8")
    print(f"overall {report.overall:.6f} ({report.items_total} items) -> {out_path}")
    return EXIT_OK


# --------------------------------------------------------------- demo-fusion


def cmd_demo_fusion(args, cfgf: dict) -> int:
    dims = _opt(args, cfgf, "dims", 8, int)
    experts = _opt(args, cfgf, "experts", 3, int)
    seed = _resolve_seed(args, cfgf)
    report = run_fusion_checks(d=dims, n_experts=experts, seed=seed, perturb=args.perturb)
    for key in sorted(report):
        print(f"{key:32s} {report[key]:.3e}")
    if not checks_pass(report):
        print("CHECK FAILURE")
        return EXIT_CHECK
    print("all checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scaleforge",
        description="Metric-scale spatial QA generation, rewards, and scoring.",
    )
    parser.add_argument("--config", help="flat key=value option file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="temporally smooth depth and write scene stats")
    p.add_argument("scenes", nargs="+", help="scene directories")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="consistency weight (default 1.0)")
    p.add_argument("--scale-hint", type=float, default=None,
                   help="rescale depth so the lower-median matches this value")
    p.add_argument("--jobs", type=int, default=None, help="parallel scene pool size")

    g = sub.add_parser("generate", help="build qa.jsonl for prepared scenes")
    g.add_argument("scenes", nargs="+", help="scene directories (prepare first)")
    g.add_argument("--tasks", default=None, help="comma-separated task subset")
    g.add_argument("--seed", type=int, default=None, help="master seed")
    g.add_argument("--modes", default=None, help="comma-separated answer modes")
    g.add_argument("--referring", default=None, choices=REFERRING_MODES,
                   help="attach a referring input of this kind to each record")
    g.add_argument("--max-records", type=int, default=None, help="per-scene record cap")
    g.add_argument("--jobs", type=int, default=None, help="parallel scene pool size")

    r = sub.add_parser("reward", help="reward predictions against QA records")
    r.add_argument("qa", help="qa.jsonl")
    r.add_argument("predictions", help="predictions.jsonl")
    r.add_argument("--epsilon", type=float, default=None, help="clip width")
    r.add_argument("--beta", type=float, default=None, help="KL weight")
    r.add_argument("--out", default=None, help="output directory")

    s = sub.add_parser("score", help="score predictions and write report.json")
    s.add_argument("qa", help="qa.jsonl")
    s.add_argument("predictions", help="predictions.jsonl")
    s.add_argument("--out", default=None, help="report path (default report.json)")

    f = sub.add_parser("demo-fusion", help="run fusion equivalence and gradient checks")
    f.add_argument("--dims", type=int, default=None, help="feature width")
    f.add_argument("--experts", type=int, default=None, help="number of adapter experts")
    f.add_argument("--seed", type=int, default=None, help="rng seed")
    f.add_argument("--perturb", action="store_true",
                   help="corrupt one analytic gradient (failure-path demo)")
    return parser


_HANDLERS = {
    "prepare": cmd_prepare,
    "generate": cmd_generate,
    "reward": cmd_reward,
    "score": cmd_score,
    "demo-fusion": cmd_demo_fusion,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfgf = _load_config(args.config) if args.config else {}
        return _HANDLERS[args.command](args, cfgf)
    except _Empty as e:
        _emit_error(args.command, e)
        return EXIT_EMPTY
    except _Misaligned as e:
        _emit_error(args.command, e)
        return EXIT_ALIGN
    except (FormatError, DepthError, RewardError, ScoringError, OSError, ValueError) as e:
        _emit_error(args.command, e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

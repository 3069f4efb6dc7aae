"""Command-line front end: score benchmarks, rank validators, run experiments.

Commands: synth, score, rank, aatn, noise, report. Everything lands under
--out with fixed names (scores.csv, accuracies.csv, wsc_per_task.csv,
wsc_summary.csv, wsc_best_per_algorithm.csv, aatn.csv, noise.csv, report.md,
run_manifest.json). CSVs use a header row, comma separator, 6 decimal places
and LF line endings, so reruns diff bit-exactly. Every command is
deterministic given its flags plus --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .ranking import (
    ScoreTable,
    aatn_summary,
    noise_resilience,
    wsc_by_algorithm,
    wsc_per_task,
    wsc_summary,
)
from .store import scan_benchmark
from .synth import SynthConfig, generate_benchmark
from .validators import all_variants, score_benchmark, variants_by_name

FLOAT_FORMAT = "%.6f"
KEY_COLUMNS = ["task", "algorithm", "run", "ckpt"]


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _write_manifest(out: Path, command: str, args: argparse.Namespace) -> None:
    manifest_path = out / "run_manifest.json"
    entry = {
        "command": command,
        "flags": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "version": __version__,
    }
    existing = []
    if manifest_path.is_file():
        with open(manifest_path, encoding="utf-8") as fh:
            existing = json.load(fh)
    existing = [e for e in existing if e.get("command") != command]
    existing.append(entry)
    existing.sort(key=lambda e: e["command"])
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(existing, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


def _resolve_jobs(args: argparse.Namespace) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("VALBENCH_JOBS")
    return max(1, int(env)) if env else 1


def cmd_synth(args: argparse.Namespace) -> int:
    if args.runs < 1 or args.tasks < 1 or args.checkpoints < 1:
        raise SystemExit("synth: --tasks, --runs and --checkpoints must all be >= 1")
    config = SynthConfig(
        num_tasks=args.tasks,
        runs_per_task=args.runs,
        checkpoints_per_run=args.checkpoints,
        num_classes=args.classes,
        feature_dim=args.dims,
        samples_per_split=args.samples,
        domain_shift=args.domain_shift,
        quality_floor=args.quality_floor,
        overfit_drop_range=(0.0, 0.0) if args.monotone else (0.0, 0.5),
        collapse_clusters=args.pathology == "collapse_clusters",
        confident_wrong=args.pathology == "confident_wrong",
        pathology_runs=args.pathology_runs,
        master_seed=args.seed,
    )
    summary = generate_benchmark(config, args.out)
    print(
        f"wrote {summary.num_checkpoints} checkpoints "
        f"({summary.num_tasks} tasks x {config.runs_per_task} runs x "
        f"{config.checkpoints_per_run} checkpoints) to {summary.root}"
    )
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = scan_benchmark(args.root)
    if args.variants:
        variants = variants_by_name([v.strip() for v in args.variants.split(",") if v.strip()])
    else:
        variants = list(all_variants())
    results = score_benchmark(index.refs, variants, seed=args.seed, jobs=_resolve_jobs(args))

    score_rows = []
    acc_rows = []
    for res in results:
        for score in res.scores:
            score_rows.append(
                {
                    "task": res.task_id,
                    "algorithm": res.algorithm,
                    "run": res.run_id,
                    "ckpt": res.checkpoint_index,
                    "variant": score.variant,
                    "raw": score.raw,
                    "oriented": score.oriented,
                    "error": score.error or "",
                }
            )
        if res.accuracy is not None:
            acc_rows.append(
                {
                    "task": res.task_id,
                    "algorithm": res.algorithm,
                    "run": res.run_id,
                    "ckpt": res.checkpoint_index,
                    "accuracy": res.accuracy,
                }
            )
    _write_csv(pd.DataFrame(score_rows), out / "scores.csv")
    if acc_rows:
        _write_csv(pd.DataFrame(acc_rows), out / "accuracies.csv")
    _write_manifest(out, "score", args)
    n_err = sum(1 for r in score_rows if r["error"])
    print(f"scored {len(results)} checkpoints x {len(variants)} variants "
          f"({n_err} error entries) -> {out / 'scores.csv'}")
    return 0


def _load_accuracies(args: argparse.Namespace, scores_path: Path) -> pd.DataFrame:
    if getattr(args, "accuracy_csv", None):
        return pd.read_csv(args.accuracy_csv)
    if getattr(args, "root", None):
        index = scan_benchmark(args.root)
        results = score_benchmark(index.refs, variants=[], seed=0, jobs=_resolve_jobs(args))
        rows = [
            {
                "task": r.task_id,
                "algorithm": r.algorithm,
                "run": r.run_id,
                "ckpt": r.checkpoint_index,
                "accuracy": r.accuracy,
            }
            for r in results
            if r.accuracy is not None
        ]
        if not rows:
            raise SystemExit("benchmark tree has no target labels; pass --accuracy-csv instead")
        return pd.DataFrame(rows)
    sibling = scores_path.parent / "accuracies.csv"
    if sibling.is_file():
        return pd.read_csv(sibling)
    raise SystemExit(
        "no accuracy source: pass --accuracy-csv or --root, "
        f"or place accuracies.csv next to {scores_path}"
    )


def _build_table(scores: pd.DataFrame, accs: pd.DataFrame) -> ScoreTable:
    variants = list(dict.fromkeys(scores["variant"]))
    meta = scores[KEY_COLUMNS].drop_duplicates(keep="first").reset_index(drop=True)
    merged = meta.merge(accs[KEY_COLUMNS + ["accuracy"]], on=KEY_COLUMNS, how="left")
    missing = merged["accuracy"].isna()
    if missing.any():
        first = merged[missing].iloc[0]
        raise SystemExit(
            "missing accuracy for checkpoint "
            f"{first['task']}/run_{first['run']}/ckpt_{first['ckpt']}"
        )
    wide = scores.pivot(index=KEY_COLUMNS, columns="variant", values="oriented")
    wide = wide.reindex(pd.MultiIndex.from_frame(meta), columns=variants)
    return ScoreTable(
        variant_names=tuple(variants),
        task_ids=meta["task"].astype(str).to_numpy(),
        algorithms=meta["algorithm"].astype(str).to_numpy(),
        run_ids=meta["run"].astype(int).to_numpy(),
        checkpoint_indices=meta["ckpt"].astype(int).to_numpy(),
        oriented=wide.to_numpy(dtype=np.float64),
        accuracies=merged["accuracy"].to_numpy(dtype=np.float64),
    )


def _load_table(args: argparse.Namespace) -> ScoreTable:
    scores_path = Path(args.scores)
    if not scores_path.is_file():
        raise SystemExit(f"missing scores file {scores_path}")
    scores = pd.read_csv(scores_path)
    accs = _load_accuracies(args, scores_path)
    return _build_table(scores, accs)


def cmd_rank(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = _load_table(args)

    per_task = wsc_per_task(table)
    frame = pd.DataFrame(per_task, columns=["task", "variant", "wsc", "error"])
    frame["error"] = frame["error"].fillna("")
    _write_csv(frame, out / "wsc_per_task.csv")

    summary = wsc_summary(table)
    rows = [
        {"variant": name, "mean_wsc": mean, "std_wsc": std, "num_tasks": n_tasks}
        for name, (mean, std, n_tasks) in summary.items()
    ]
    rows.sort(key=lambda r: (-r["mean_wsc"], r["variant"]))
    _write_csv(pd.DataFrame(rows), out / "wsc_summary.csv")

    by_algo = wsc_by_algorithm(table)
    best_rows = []
    for algorithm in sorted({a for a, _ in by_algo}):
        candidates = [(v, *by_algo[(a, v)]) for (a, v) in by_algo if a == algorithm]
        variant, mean, n_tasks = max(candidates, key=lambda c: (c[1], c[0]))
        best_rows.append(
            {"algorithm": algorithm, "variant": variant, "mean_wsc": mean, "num_tasks": n_tasks}
        )
    _write_csv(pd.DataFrame(best_rows), out / "wsc_best_per_algorithm.csv")
    _write_manifest(out, "rank", args)
    print(f"ranked {len(table.variant_names)} variants over {len(table.tasks)} tasks -> {out}")
    return 0


def cmd_aatn(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = _load_table(args)
    summary = aatn_summary(table, args.n)
    if not summary:
        raise SystemExit(f"aatn: n={args.n} exceeds the number of runs in every task")
    rows = [
        {
            "algorithm": algorithm,
            "variant": variant,
            "aatn": value,
            "oracle_aatn": oracle,
            "delta": value - oracle,
        }
        for (algorithm, variant), (value, oracle) in sorted(summary.items())
    ]
    _write_csv(pd.DataFrame(rows), out / "aatn.csv")
    _write_manifest(out, "aatn", args)
    print(f"wrote AATN (n={args.n}) for {len(rows)} (algorithm, variant) pairs -> {out / 'aatn.csv'}")
    return 0


def cmd_noise(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = _load_table(args)
    sigmas = [float(s) for s in args.sigmas.split(",") if s.strip() != ""]
    seeds = [int(s) for s in np.random.SeedSequence((args.seed, 777)).generate_state(args.num_seeds)]
    points = noise_resilience(table, sigmas, seeds, args.aatn_n)
    rows = [
        {
            "sigma": p.sigma,
            "metric": p.metric,
            "mean_correlation": p.mean_correlation,
            "std_correlation": p.std_correlation,
            "seeds_used": p.seeds_used,
            "error": p.error or "",
        }
        for p in points
    ]
    _write_csv(pd.DataFrame(rows), out / "noise.csv")
    _write_manifest(out, "noise", args)
    print(f"wrote noise-resilience curve ({len(sigmas)} sigmas x {args.num_seeds} seeds) "
          f"-> {out / 'noise.csv'}")
    return 0


def _fmt(value) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    # canonical variant names contain '|', which must not split table cells
    return str(value).replace("|", "\\|")


def _markdown_table(frame: pd.DataFrame) -> str:
    headers = list(frame.columns)
    lines = ["| " + " | ".join(headers) + " |", "| " + " | ".join("---" for _ in headers) + " |"]
    for _, row in frame.iterrows():
        lines.append("| " + " | ".join(_fmt(row[h]) for h in headers) + " |")
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    required = {"wsc_summary": out / "wsc_summary.csv", "aatn": out / "aatn.csv"}
    for name, path in required.items():
        if not path.is_file():
            raise SystemExit(f"report: missing input file {path}")
    summary = pd.read_csv(required["wsc_summary"])
    aatn_frame = pd.read_csv(required["aatn"])

    sections = ["# Validator benchmark report", ""]
    sections += ["## Validator ranking (mean and std of WSC across tasks)", ""]
    sections.append(_markdown_table(summary))
    sections.append("")

    per_task_path = out / "wsc_per_task.csv"
    if per_task_path.is_file():
        per_task = pd.read_csv(per_task_path)
        for task in per_task["task"].drop_duplicates():
            sections += [f"## Weighted Spearman per variant: {task}", ""]
            sub = per_task[per_task["task"] == task][["variant", "wsc", "error"]]
            sub = sub.fillna({"wsc": float("nan"), "error": ""})
            sections.append(_markdown_table(sub))
            sections.append("")

    best_path = out / "wsc_best_per_algorithm.csv"
    if best_path.is_file():
        best = pd.read_csv(best_path)
        merged = best.merge(aatn_frame, on=["algorithm", "variant"], how="left")
        merged = merged[["algorithm", "variant", "mean_wsc", "aatn", "delta"]]
        merged = merged.rename(columns={"delta": "val_minus_oracle"})
        sections += ["## Best validator per algorithm", ""]
        sections.append(_markdown_table(merged))
        sections.append("")

    sections += ["## AATN per (algorithm, validator)", ""]
    sections.append(_markdown_table(aatn_frame))
    sections.append("")

    noise_path = out / "noise.csv"
    if noise_path.is_file():
        sections += ["## Noise resilience of validator rankings", ""]
        sections.append(_markdown_table(pd.read_csv(noise_path).fillna({"error": ""})))
        sections.append("")

    report_path = out / "report.md"
    report_path.write_text("\n".join(sections), encoding="utf-8")
    print(f"wrote {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valbench",
        description="Score UDA checkpoints with label-free validators and rank the validators.",
    )
    parser.add_argument("--version", action="version", version=f"valbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker count (default: VALBENCH_JOBS or 1)")

    p = sub.add_parser("synth", help="generate a synthetic benchmark tree")
    common(p)
    p.add_argument("--tasks", type=int, default=3)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--checkpoints", type=int, default=20)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--dims", type=int, default=16)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--domain-shift", type=float, default=0.0)
    p.add_argument("--quality-floor", type=float, default=0.0)
    p.add_argument("--monotone", action="store_true",
                   help="disable the overfitting fall-off (quality only rises)")
    p.add_argument("--pathology", choices=["none", "collapse_clusters", "confident_wrong"],
                   default="none")
    p.add_argument("--pathology-runs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="score every checkpoint of a benchmark tree")
    common(p)
    p.add_argument("--root", required=True, help="benchmark tree root")
    p.add_argument("--variants", default=None,
                   help="comma-separated canonical variant (or family) names; default: all 35")
    p.set_defaults(func=cmd_score)

    def accuracy_source(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scores", required=True, help="scores.csv from the score command")
        p.add_argument("--root", default=None, help="benchmark tree to pull oracle accuracies from")
        p.add_argument("--accuracy-csv", default=None, help="CSV with task,algorithm,run,ckpt,accuracy")

    p = sub.add_parser("rank", help="rank validators by weighted Spearman correlation")
    common(p)
    accuracy_source(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("aatn", help="average accuracy of each validator's top-N runs")
    common(p)
    accuracy_source(p)
    p.add_argument("--n", type=int, default=5)
    p.set_defaults(func=cmd_aatn)

    p = sub.add_parser("noise", help="noise-resilience of WSC and AATN validator rankings")
    common(p)
    accuracy_source(p)
    p.add_argument("--sigmas", default="0,1,2,5,10",
                   help="comma-separated noise standard deviations in accuracy percent points")
    p.add_argument("--num-seeds", type=int, default=20)
    p.add_argument("--aatn-n", type=int, default=5)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("report", help="render a markdown summary of rank/aatn/noise outputs")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"valbench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: generate, score, train, predict, evaluate,
bootstrap, simulate review, and render.

Every randomized subcommand requires an explicit --seed, all outputs are
written atomically, and identical inputs plus seeds reproduce identical
bytes.  On failure a single machine-readable JSON error line goes to
stderr and the exit status is non-zero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import confnet, measures, review_sim, stats_boot, synthgen
from .core_data import (
    DIAGNOSIS_CODES,
    Dataset,
    FormatError,
    ValidationError,
    _write_atomic,
    load_dataset,
    majority_softmax,
    predicted_hypnogram,
    save_dataset,
)
from .features import tcp_targets
from .metrics import classification_report, discordance_roc_pr, subject_aggregate
from .render import RenderSpec, render_confidence_hypnogram


class CliError(ValueError):
    """User-facing failure: bad flags, missing inputs, malformed files."""


def _write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_atomic(path, text.encode("utf-8"))


def _write_json(path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _write_csv(path, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    _write_text(path, buf.getvalue())


def _load_data(path) -> Dataset:
    dataset = load_dataset(path)
    if not dataset.recordings:
        raise CliError(f"dataset at {path} contains no recordings")
    return dataset


def _load_scores(path, dataset: Dataset, measure: str | None = None) -> dict:
    """Scores CSV -> {recording_id: {measure: series}}, length-checked."""
    with open(path, newline="") as fh:
        series_list = measures.read_scores_csv(fh)
    out: dict = {}
    for series in series_list:
        if measure is not None and series.measure != measure:
            continue
        out.setdefault(series.recording_id, {})[series.measure] = series
    for rid, per_measure in out.items():
        try:
            rec = dataset.get(rid)
        except KeyError as exc:
            raise CliError(f"{path}: scores reference unknown recording {rid!r}") from exc
        for series in per_measure.values():
            if series.scores.shape[0] != rec.n_epochs:
                raise CliError(
                    f"{path}: {rid}/{series.measure} has {series.scores.shape[0]} "
                    f"epochs, dataset has {rec.n_epochs}"
                )
    return out


def _tcp_by_recording(scores: dict, dataset: Dataset, split) -> dict:
    out = {}
    for rec in split:
        per_measure = scores.get(rec.recording_id, {})
        if confnet.TCP_MEASURE not in per_measure:
            raise CliError(
                f"no '{confnet.TCP_MEASURE}' scores for recording {rec.recording_id}"
            )
        out[rec.recording_id] = per_measure[confnet.TCP_MEASURE].raw_values
    return out


def _parse_ratios(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--splits expects 'train,val,test' fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"--splits contains a non-number: {text!r}") from exc


def cmd_gen(args) -> int:
    config = synthgen.GenConfig(
        n_recordings=args.recordings,
        epochs_per_recording=args.epochs,
        n_pairs=args.pairs,
        target_error_rate=args.error_rate,
        stay_probability=args.stay_prob,
        unknown_rate=args.unknown_rate,
        seed=args.seed,
    )
    dataset = synthgen.gen_cohort(config)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} recordings to {args.out}")
    return 0


def cmd_measures(args) -> int:
    dataset = _load_data(args.data)
    names = measures.MEASURES if args.measure == "all" else (args.measure,)
    series = []
    for rec in dataset:
        for name in names:
            series.append(measures.compute_measure(name, rec))
    buf = io.StringIO()
    measures.write_scores_csv(series, buf)
    _write_text(args.out, buf.getvalue())
    print(f"wrote {len(series)} score series to {args.out}")
    return 0


def cmd_tcp(args) -> int:
    dataset = _load_data(args.data)
    series = []
    for rec in dataset:
        if rec.labels is None:
            raise CliError(f"{rec.recording_id}: target extraction needs labels")
        tcp = tcp_targets(majority_softmax(rec), rec.labels)
        series.append(
            measures.UncertaintyScoreSeries(
                recording_id=rec.recording_id,
                measure="tcp_target",
                raw_values=tcp,
                scores=1.0 - tcp,
            )
        )
    buf = io.StringIO()
    measures.write_scores_csv(series, buf)
    _write_text(args.out, buf.getvalue())
    print(f"wrote targets for {len(series)} recordings to {args.out}")
    return 0


def cmd_train(args) -> int:
    dataset = _load_data(args.data)
    if args.splits == "manifest":
        assignment = None
    else:
        assignment = synthgen.split_manifest(dataset, _parse_ratios(args.splits), args.seed)
    model = confnet.init_model(confnet.ConfNetConfig(seed=args.seed))
    config = confnet.TrainConfig(
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
    )
    model, history = confnet.train(model, dataset, assignment, config)
    confnet.save_model(model, args.model_out)
    _write_csv(Path(args.model_out).with_suffix(".history.csv"), confnet.history_to_csv_rows(history))
    best = min(h["val_mae"] for h in history)
    print(f"trained {len(history) - 1} epochs, best validation MAE {best:.4f}")
    return 0


def cmd_predict(args) -> int:
    dataset = _load_data(args.data)
    model = confnet.load_model(args.model)
    series = [confnet.predict_tcp(model, rec) for rec in dataset]
    buf = io.StringIO()
    measures.write_scores_csv(series, buf)
    _write_text(args.out, buf.getvalue())
    print(f"wrote confidence for {len(series)} recordings to {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = _load_data(args.data)
    scores = _load_scores(args.scores, dataset)
    results = []
    for tag in dataset.tags_present():
        split = dataset.by_tag(tag)
        measure_names: list = []
        for rec in split:
            for name in scores.get(rec.recording_id, {}):
                if name not in measure_names:
                    measure_names.append(name)
        for name in measure_names:
            true_parts, pred_parts, score_parts = [], [], []
            for rec in split:
                series = scores.get(rec.recording_id, {}).get(name)
                if series is None:
                    raise CliError(f"missing {name} scores for {rec.recording_id}")
                if rec.labels is None:
                    raise CliError(f"{rec.recording_id}: evaluation needs labels")
                true_parts.append(rec.labels)
                pred_parts.append(predicted_hypnogram(rec))
                score_parts.append(series.scores)
            roc = discordance_roc_pr(
                np.concatenate(score_parts),
                np.concatenate(true_parts),
                np.concatenate(pred_parts),
            )
            results.append({"split": tag, "measure": name, **roc.as_dict()})
    _write_json(args.out, results)
    print(f"wrote {len(results)} evaluations to {args.out}")
    return 0


def _read_prediction_csv(path, dataset: Dataset) -> dict:
    overrides: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["recording_id", "epoch_index", "predicted_stage"]:
            raise CliError(f"{path}: unexpected predictions header {header}")
        for rid, idx, stage in reader:
            overrides.setdefault(rid, {})[int(idx)] = int(stage)
    out = {}
    for rid, stages in overrides.items():
        rec = dataset.get(rid)
        pred = predicted_hypnogram(rec).copy()
        for idx, stage in stages.items():
            pred[idx] = stage
        out[rid] = pred
    return out


def cmd_metrics(args) -> int:
    dataset = _load_data(args.data)
    overrides = _read_prediction_csv(args.predictions, dataset) if args.predictions else {}
    results = []
    for tag in dataset.tags_present():
        split = dataset.by_tag(tag)
        true_parts, pred_parts = [], []
        per_subject = {}
        subject_true: dict = {}
        subject_pred: dict = {}
        for rec in split:
            if rec.labels is None:
                raise CliError(f"{rec.recording_id}: metrics need labels")
            pred = overrides.get(rec.recording_id, predicted_hypnogram(rec))
            true_parts.append(rec.labels)
            pred_parts.append(pred)
            subject_true.setdefault(rec.subject_id, []).append(rec.labels)
            subject_pred.setdefault(rec.subject_id, []).append(pred)
        epochwise = classification_report(
            np.concatenate(true_parts), np.concatenate(pred_parts)
        )
        for sid in subject_true:
            per_subject[sid] = classification_report(
                np.concatenate(subject_true[sid]), np.concatenate(subject_pred[sid])
            )
        agg = subject_aggregate(per_subject)
        results.append(
            {
                "split": tag,
                "epochwise": epochwise.as_dict(),
                "subjectwise_mean": agg["mean"],
                "subjectwise_median": agg["median"],
                "n_subjects": len(per_subject),
            }
        )
    _write_json(args.out, results)
    print(f"wrote metrics for {len(results)} splits to {args.out}")
    return 0


def cmd_bootstrap(args) -> int:
    dataset = _load_data(args.data)
    scores = _load_scores(args.scores, dataset)
    tcp = _tcp_by_recording(scores, dataset, dataset.recordings)
    summaries = stats_boot.summarize_subjects(dataset, tcp)
    groups = [stats_boot.GROUP_ALL] if args.group_by == "all" else list(DIAGNOSIS_CODES)
    metrics_list = [args.metric] if args.hypothesis == "h02" else [None]
    rows = [
        ["hypothesis", "group", "metric", "n", "median", "ci_low", "ci_high",
         "reps", "seed", "rejected"]
    ]
    for group in groups:
        for metric in metrics_list:
            try:
                if args.hypothesis == "h01":
                    res = stats_boot.bootstrap_mean_diff(
                        summaries, group, reps=args.reps, seed=args.seed
                    )
                else:
                    res = stats_boot.bootstrap_correlation(
                        summaries, group, metric, reps=args.reps, seed=args.seed
                    )
            except stats_boot.InsufficientSubjectsError as exc:
                rows.append(
                    [args.hypothesis, group, metric or "", exc.eligible, "", "",
                     "", args.reps, args.seed, "skipped: insufficient subjects"]
                )
                continue
            rows.append(
                [
                    args.hypothesis,
                    res.group,
                    res.metric or "",
                    res.n_subjects,
                    repr(res.median),
                    repr(res.ci_low),
                    repr(res.ci_high),
                    res.reps,
                    res.seed,
                    str(res.rejected).lower(),
                ]
            )
    _write_csv(args.out, rows)
    print(f"wrote {len(rows) - 1} bootstrap rows to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    dataset = _load_data(args.data)
    scores = _load_scores(args.scores, dataset)
    levels = tuple(int(v) for v in args.benchmarks.split(","))
    out_dir = Path(args.out)
    curve_rows = [
        ["split", "t", "effort_pct", "acc", "f1w", "kappa", "detection_recall"]
    ]
    benches = []
    for tag in dataset.tags_present():
        split = dataset.by_tag(tag)
        tcp = _tcp_by_recording(scores, dataset, split)
        curve = review_sim.sweep(split, tcp, grid_step=args.grid_step)
        for row in curve.rows():
            curve_rows.append([tag] + row)
        table = review_sim.effort_to_benchmark(curve, levels)
        benches.append({"split": tag, "benchmarks": table.as_list()})
    _write_csv(out_dir / "review_curve.csv", curve_rows)
    _write_json(out_dir / "benchmarks.json", benches)
    print(f"wrote review curves and benchmarks to {out_dir}")
    return 0


def cmd_render(args) -> int:
    dataset = _load_data(args.data)
    try:
        rec = dataset.get(args.recording)
    except KeyError as exc:
        raise CliError(f"no recording {args.recording!r} in dataset") from exc
    scores = _load_scores(args.scores, dataset)
    tcp = _tcp_by_recording(scores, dataset, [rec])[rec.recording_id]
    spec = RenderSpec(
        recording_id=rec.recording_id,
        predicted=predicted_hypnogram(rec),
        tcp=np.asarray(tcp, dtype=np.float64),
        reference=rec.labels if args.with_reference else None,
    )
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_atomic(path, render_confidence_hypnogram(spec))
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypnoconf",
        description="Confidence estimation and review simulation for "
        "automated sleep-stage hypnograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic cohort")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--recordings", type=int, default=10, help="number of recordings (default 10)")
    p.add_argument("--epochs", type=int, default=960, help="epochs per recording (default 960)")
    p.add_argument("--pairs", type=int, default=2, help="channel pairs per recording (default 2)")
    p.add_argument("--error-rate", type=float, default=0.18,
                   help="target misclassification rate (default 0.18)")
    p.add_argument("--stay-prob", type=float, default=0.85,
                   help="Markov self-transition probability (default 0.85)")
    p.add_argument("--unknown-rate", type=float, default=0.02,
                   help="fraction of labels replaced by Unknown (default 0.02)")
    p.add_argument("--seed", type=int, required=True, help="generator seed (required)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("measures", help="softmax uncertainty measures to CSV")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--measure", default="all", choices=("all",) + measures.MEASURES,
                   help="measure to compute (default all)")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.set_defaults(func=cmd_measures)

    p = sub.add_parser("tcp", help="true-class-probability training targets to CSV")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output targets CSV")
    p.set_defaults(func=cmd_tcp)

    p = sub.add_parser("train", help="train the confidence network")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--splits", default="manifest",
                   help="'manifest' to use stored tags, or 'train,val,test' fractions "
                   "(default manifest)")
    p.add_argument("--model-out", required=True, help="output model file")
    p.add_argument("--seed", type=int, required=True,
                   help="seed for init, shuffling, and dropout (required)")
    p.add_argument("--max-epochs", type=int, default=100, help="epoch cap (default 100)")
    p.add_argument("--patience", type=int, default=5,
                   help="early-stop patience in epochs (default 5)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default 1e-3)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict per-epoch confidence to CSV")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="discordance-detection ROC/PR per split")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--scores", required=True, help="scores CSV (measures or predict output)")
    p.add_argument("--out", required=True, help="output JSON report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="classification metrics per split")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--predictions", default=None,
                   help="optional CSV of corrected predictions "
                   "(recording_id, epoch_index, predicted_stage); "
                   "default: majority-vote predictions")
    p.add_argument("--out", required=True, help="output JSON report")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bootstrap", help="bootstrap hypothesis tests by diagnosis group")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--scores", required=True, help="scores CSV containing tcp series")
    p.add_argument("--hypothesis", required=True, choices=("h01", "h02"),
                   help="h01 = confidence gap, h02 = confidence/metric correlation")
    p.add_argument("--metric", default="acc", choices=("acc", "f1w", "kappa"),
                   help="metric for h02 (default acc)")
    p.add_argument("--reps", type=int, default=stats_boot.DEFAULT_REPS,
                   help="bootstrap repetitions (default 5000)")
    p.add_argument("--seed", type=int, required=True, help="resampling seed (required)")
    p.add_argument("--group-by", default="diagnosis", choices=("all", "diagnosis"),
                   help="single pooled group or one per diagnosis class (default diagnosis)")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("simulate", help="simulated physician review sweep")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--scores", required=True, help="scores CSV containing tcp series")
    p.add_argument("--grid-step", type=float, default=0.01,
                   help="threshold grid step (default 0.01)")
    p.add_argument("--benchmarks", default="80,85,90,95",
                   help="benchmark levels in percent (default 80,85,90,95)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="render a confidence-supplemented hypnogram SVG")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--recording", required=True, help="recording id to render")
    p.add_argument("--scores", required=True, help="scores CSV containing tcp series")
    p.add_argument("--out", required=True, help="output SVG file")
    p.add_argument("--with-reference", action="store_true",
                   help="overlay the reference hypnogram (default off)")
    p.set_defaults(func=cmd_render)
    return parser


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def main(argv=None) -> int:
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except (CliError, FormatError, ValidationError, ValueError, OSError) as exc:
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(line, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

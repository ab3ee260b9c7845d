"""Command-line interface: scoring, evaluation, bound reports, scenario
demos and benchmark sweeps.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O or input-data
error, 4 internal invariant breach. Every output file embeds the resolved
run configuration and the tool version. All randomness funnels through one
seeded generator per invocation; `--threads 1` and `--threads T` produce
identical numeric output.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    COMMENT_PREFIX,
    CsvFormatError,
    LabeledDataset,
    generate_scenario,
    load_csv,
    save_csv,
)
from .detectors import (
    DEFAULT_MASS,
    METHODS,
    DetectorConfig,
    dtmf2_scores,
    lof_scores,
    rank_anomalies,
    score_dataset,
)
from .evaluation import evaluate_scores
from .nnindex import build_index
from .theory import (
    INF,
    TheoryInputs,
    UniformInterval,
    compute_report,
    fit_regularity_constant,
)

DEMO_METHODS = ("dtm2", "knn", "kthnn", "dtmf", "lof")


def _err(msg) -> None:
    print(f"dtmad: {msg}", file=sys.stderr)


def _parse_q(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return INF
    return float(text)


def _threads_default() -> int:
    try:
        return max(1, int(os.environ.get("DTMAD_THREADS", "1")))
    except ValueError:
        return 1


def _load_config_defaults(args: argparse.Namespace) -> None:
    """Fill None-valued options from a JSON config file (flags win)."""
    if not getattr(args, "config", None):
        return
    payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in payload.items():
        dest = key.replace("-", "_")
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, value)


def _run_config(args: argparse.Namespace, **resolved) -> dict:
    cfg = {"command": args.command, "version": __version__}
    cfg.update(resolved)
    return cfg


def _label_column(raw):
    if raw is None:
        return None
    try:
        return int(raw)
    except (TypeError, ValueError):
        return raw


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def cmd_score(args) -> int:
    _load_config_defaults(args)
    threads = args.threads or _threads_default()
    labeled = load_csv(args.input, label_column=_label_column(args.label_column))
    q = _parse_q(args.q) if args.q is not None else None
    config = DetectorConfig(method=args.method, q=q, k=args.k, m=args.m)
    report = score_dataset(labeled.dataset, config, threads=threads)
    predicted = None
    if args.top is not None or args.threshold is not None:
        predicted = rank_anomalies(report, top=args.top, threshold=args.threshold)
    run = _run_config(args, input=str(args.input), threads=threads,
                      label_column=args.label_column,
                      detector=report.config_dict(),
                      top=args.top, threshold=args.threshold)
    out = Path(args.output)
    fmt = args.format or ("json" if out.suffix == ".json" else "csv")
    if fmt == "json":
        report.write_json(out, predicted=predicted, metadata={"run": run})
    else:
        report.write_csv(out, predicted=predicted, metadata={"run": run})
    print(f"scored {report.n} points with {report.method} (k={report.k}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _read_scores_file(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        return np.asarray(payload["scores"], dtype=float)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh)
                if row and not row[0].lstrip().startswith(COMMENT_PREFIX)]
    if not rows:
        raise CsvFormatError(f"{path}: empty scores file")
    header = rows[0]
    if "score" not in header:
        raise CsvFormatError(f"{path}: scores file needs a 'score' column")
    col = header.index("score")
    try:
        return np.asarray([float(row[col]) for row in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise CsvFormatError(f"{path}: malformed scores file: {exc}") from None


def cmd_eval(args) -> int:
    _load_config_defaults(args)
    scores = _read_scores_file(args.scores)
    if args.label_column is None:
        raise ValueError("--label-column is required for evaluation")
    labeled = load_csv(args.input, label_column=_label_column(args.label_column))
    if labeled.n != scores.size:
        raise ValueError(
            f"scores ({scores.size}) and dataset ({labeled.n}) sizes differ"
        )
    result = evaluate_scores(scores, labeled.labels)
    run = _run_config(args, scores=str(args.scores), input=str(args.input),
                      label_column=args.label_column)
    out = Path(args.output)
    fmt = args.format or ("csv" if out.suffix == ".csv" else "json")
    if fmt == "json":
        payload = {"run": run, **result.to_dict()}
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
    else:
        with out.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {json.dumps({'run': run}, sort_keys=True)}\n")
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for key, value in result.to_dict().items():
                writer.writerow([key, repr(float(value)) if isinstance(value, float)
                                 else value])
    print(f"auc={result.auc:.6f} ap={result.ap:.6f} "
          f"(pos={result.n_pos}, neg={result.n_neg}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def cmd_bounds(args) -> int:
    _load_config_defaults(args)
    inputs = TheoryInputs(
        n=args.n, d=args.d,
        delta=args.delta if args.delta is not None else 0.05,
        m=args.m if args.m is not None else DEFAULT_MASS,
        C=args.C if args.C is not None else 1.0,
        epsilon=args.epsilon if args.epsilon is not None else 0.0,
        eta=args.eta, h=args.h if args.h is not None else 0.0,
        a0=args.a0, b=args.b,
        q=_parse_q(args.q) if args.q is not None else 2.0,
    )
    report = compute_report(inputs)
    payload = {"run": _run_config(args), **report}
    out = Path(args.output)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    for name, entry in report["quantities"].items():
        if "value" in entry:
            print(f"{name} = {entry['value']:.6g}")
        else:
            print(f"{name}: skipped ({entry['skipped']})")
    print(f"-> {out}")
    return 0


# ---------------------------------------------------------------------------
# demo
# ---------------------------------------------------------------------------


def _svg_document(points: np.ndarray, scores: np.ndarray, predicted: np.ndarray,
                  comment: str) -> str:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.06 * span.max()
    size = 640.0
    scale = (size - 2) / (span.max() + 2 * pad)
    smax = scores.max() if scores.max() > 0 else 1.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f"<!-- {comment} -->",
    ]
    for i in range(points.shape[0]):
        cx = (points[i, 0] - lo[0] + pad) * scale + 1
        cy = size - ((points[i, 1] - lo[1] + pad) * scale + 1)
        r = 2.0 + 16.0 * float(scores[i]) / smax
        color = "#d62728" if predicted[i] else "#333333"
        lines.append(
            f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{r:.3f}" fill="{color}" '
            f'fill-opacity="0.35" stroke="{color}" stroke-width="1"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_demo(args) -> int:
    _load_config_defaults(args)
    threads = args.threads or _threads_default()
    params = dict(json.loads(args.params)) if args.params else {}
    for key, value in (("n_normals", args.n_normals),
                       ("n_anomalies", args.n_anomalies),
                       ("eta", args.eta), ("jitter", args.jitter)):
        if value is not None:
            params[key] = value
    seed = args.seed if args.seed is not None else 0
    labeled = generate_scenario(args.scenario, params, seed=seed)
    index = build_index(labeled.dataset)
    config = DetectorConfig(method="dtm", q=None, k=args.k, m=args.m)
    k = config.resolve_k(labeled.n)

    scores = {
        "dtm2": index.power_means(labeled.points, k, 2.0, workers=threads),
        "knn": index.power_means(labeled.points, k, 1.0, workers=threads),
        "kthnn": index.kth_distances(labeled.points, k, workers=threads),
        "dtmf": dtmf2_scores(index, k, threads=threads),
        "lof": lof_scores(index, min(k, labeled.n - 1), threads=threads),
    }
    budget = labeled.n_anomalies
    predicted = rank_anomalies(scores["dtm2"], top=budget)

    run = _run_config(args, scenario=args.scenario, params=params, seed=seed,
                      k=k, threads=threads, budget=budget)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_csv(labeled, outdir / "dataset.csv", metadata={"run": run})
    with (outdir / "scores.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {json.dumps({'run': run}, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(["index", *DEMO_METHODS, "predicted"])
        for i in range(labeled.n):
            writer.writerow([i, *(repr(float(scores[meth][i])) for meth in DEMO_METHODS),
                             int(predicted[i])])
    if labeled.d == 2:
        svg = _svg_document(labeled.points, scores["dtm2"], predicted,
                            comment=json.dumps({"run": run}, sort_keys=True))
        (outdir / "demo.svg").write_text(svg, encoding="utf-8")
    else:
        _err(f"svg skipped: scenario dimension is {labeled.d}, not 2")
    mis = int(((labeled.labels == 0) & (predicted == 1)).sum())
    print(f"{args.scenario}: n={labeled.n}, k={k}, "
          f"misclassified normals at oracle budget: {mis} -> {outdir}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _bench_dataset(entry: dict, default_seed: int) -> LabeledDataset:
    if "path" in entry:
        return load_csv(entry["path"], label_column=_label_column(entry.get("label_column")))
    if "scenario" in entry:
        return generate_scenario(entry["scenario"], entry.get("params"),
                                 seed=entry.get("seed", default_seed))
    raise ValueError(f"bench dataset entry needs 'path' or 'scenario': {entry}")


def cmd_bench(args) -> int:
    _load_config_defaults(args)
    threads = args.threads or _threads_default()
    seed = args.seed if args.seed is not None else 0
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    datasets = spec.get("datasets", [])
    methods = spec.get("methods", [])
    if not datasets or not methods:
        raise ValueError("bench spec needs non-empty 'datasets' and 'methods'")

    rows = []
    for ds_entry in datasets:
        ds_name = ds_entry.get("name") or ds_entry.get("path") or ds_entry.get("scenario")
        try:
            labeled = _bench_dataset(ds_entry, seed)
        except Exception as exc:
            for meth in methods:
                mname = meth.get("name") or meth.get("method")
                rows.append((ds_name, mname, "load", "", "", str(exc)))
            continue
        has_labels = 0 < labeled.n_anomalies < labeled.n
        for meth in methods:
            mname = meth.get("name") or meth.get("method")
            t0 = time.perf_counter()
            try:
                q = meth.get("q")
                config = DetectorConfig(method=meth["method"],
                                        q=_parse_q(str(q)) if q is not None else None,
                                        k=meth.get("k"), m=meth.get("m"))
                report = score_dataset(labeled.dataset, config, threads=threads)
                wall = time.perf_counter() - t0
                if not has_labels:
                    rows.append((ds_name, mname, "auc", "", f"{wall:.6f}",
                                 "labels required"))
                    rows.append((ds_name, mname, "ap", "", f"{wall:.6f}",
                                 "labels required"))
                    continue
                result = evaluate_scores(report.scores, labeled.labels)
                rows.append((ds_name, mname, "auc", repr(result.auc),
                             f"{wall:.6f}", ""))
                rows.append((ds_name, mname, "ap", repr(result.ap),
                             f"{wall:.6f}", ""))
            except Exception as exc:
                wall = time.perf_counter() - t0
                rows.append((ds_name, mname, "auc", "", f"{wall:.6f}", str(exc)))
                rows.append((ds_name, mname, "ap", "", f"{wall:.6f}", str(exc)))

    run = _run_config(args, spec=str(args.spec), seed=seed, threads=threads)
    out = Path(args.output)
    with out.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {json.dumps({'run': run}, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "metric", "value", "wall_time_s", "error"])
        writer.writerows(rows)
    print(f"bench: {len(rows)} rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def cmd_calibrate(args) -> int:
    _load_config_defaults(args)
    low = args.low if args.low is not None else 0.0
    high = args.high if args.high is not None else 1.0
    n = args.n if args.n is not None else 2000
    m = args.m if args.m is not None else 0.1
    q = _parse_q(args.q) if args.q is not None else 2.0
    delta = args.delta if args.delta is not None else 0.05
    trials = args.trials if args.trials is not None else 5
    seed = args.seed if args.seed is not None else 0

    from .data import ContaminationSpec, sample_contaminated

    reference = UniformInterval(low, high)
    k = max(1, math.ceil(m * n))
    constants = []
    for t in range(trials):
        spec = ContaminationSpec(("uniform", {"low": [low], "high": [high]}),
                                 ("uniform", {"low": [low], "high": [high]}),
                                 epsilon=0.0, n=n, seed=seed + t)
        sample = sample_contaminated(spec)
        index = build_index(sample.dataset)
        empirical = index.power_means(sample.points, k, q)
        population = np.array([reference.dtm_closed(x, m, q) for x in sample.points])
        deviation = float(np.abs(empirical - population).max())
        constants.append(fit_regularity_constant(deviation, n, delta, m))
    c_star = max(constants)
    run = _run_config(args, low=low, high=high, n=n, m=m,
                      q="inf" if q == INF else q, delta=delta,
                      trials=trials, seed=seed)
    payload = {"run": run, "constants": constants, "C": c_star}
    if args.output:
        Path(args.output).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    print(f"calibrated regularity constant C = {c_star:.6g} "
          f"(max over {trials} trials at n={n})")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtmad",
        description="Nearest-neighbor / distance-to-measure anomaly detection",
    )
    parser.add_argument("--version", action="version", version=f"dtmad {__version__}")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="JSON file with default option values")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: DTMAD_THREADS or 1)")

    p = sub.add_parser("score", help="score a CSV dataset")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--q", default=None, help="DTM order in [1, inf] (dtm only)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--label-column", default=None,
                   help="column to exclude from features (name or index)")
    p.add_argument("--top", type=int, default=None,
                   help="also predict: flag the top-N scores")
    p.add_argument("--threshold", type=float, default=None,
                   help="also predict: flag scores above this value")
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUC / AP of a scores file against labels")
    common(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="finite-sample bound / threshold report")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--a0", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--q", default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("demo", help="generate a scenario, score it, emit an SVG")
    common(p)
    p.add_argument("--scenario", required=True,
                   choices=("ring", "local", "clustered", "shrinking_separation"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--n-normals", type=int, default=None)
    p.add_argument("--n-anomalies", type=int, default=None)
    p.add_argument("--jitter", type=float, default=None)
    p.add_argument("--params", default=None,
                   help="JSON object with extra scenario parameters")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("bench", help="datasets x detectors sweep to tidy CSV")
    common(p)
    p.add_argument("--spec", required=True, help="JSON bench specification")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate",
                       help="fit the regularity constant C on a pilot sample")
    common(p)
    p.add_argument("--low", type=float, default=None)
    p.add_argument("--high", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--q", default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args) or 0
    except CsvFormatError as exc:
        _err(exc)
        return 3
    except (ValueError, KeyError) as exc:
        _err(exc)
        return 2
    except OSError as exc:
        _err(exc)
        return 3
    except Exception as exc:  # internal invariant breach
        _err(f"internal error: {exc!r}")
        return 4


if __name__ == "__main__":
    sys.exit(main())

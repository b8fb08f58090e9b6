"""Command-line entry point: data building, training, evaluation, reporting.

Every command resolves its configuration (defaults < config file < explicit
flags), writes a ``config.resolved.yaml`` snapshot next to its outputs, and
keeps timestamps out of artifacts (they only go to the ``run.log`` sidecar).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import yaml

from . import corpus, evaluators, harness, lexical, metrics
from .encoder import EncoderConfig, Vocabulary
from .evaluators import EvaluatorConfig, Family, TrainConfig


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicitly passed flags."""
    config = dict(defaults)
    config.update(_load_config_file(getattr(args, "config", None)))
    for key, value in vars(args).items():
        if key in ("command", "config", "func"):
            continue
        if value is not None:
            config[key.replace("_", "-")] = value
    # normalize keys to dashed form for the snapshot
    return {str(k).replace("_", "-"): v for k, v in config.items()}


def _prepare_out(config: dict) -> Path:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    snapshot = {k: v for k, v in sorted(config.items())}
    (out / "config.resolved.yaml").write_text(
        yaml.safe_dump(snapshot, sort_keys=True), encoding="utf-8"
    )
    return out


def _log(out: Path, message: str) -> None:
    with open(out / "run.log", "a", encoding="utf-8") as handle:
        handle.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_build_data(args: argparse.Namespace) -> int:
    config = _resolve(args, {"seed": 0})
    out = _prepare_out(config)
    _log(out, f"build-data corpus={config['corpus']}")
    docs = corpus.read_records(config["corpus"], "mr-document")
    records = corpus.derive_as2(docs)
    corpus.write_records(out / "as2.jsonl", records)
    sets = corpus.filter_multi_answer(corpus.to_candidate_sets(records))
    tuples = corpus.build_eval_tuples(sets)
    corpus.write_records(out / "tuples.jsonl", tuples)
    stats = corpus.dataset_stats(sets, tuples)
    _write_json(out / "stats.json", vars(stats))
    _log(out, f"build-data wrote {len(records)} sentence records, {len(tuples)} tuples")
    print(
        f"questions={stats.num_questions} correct={stats.num_correct_answers} "
        f"wrong={stats.num_wrong_answers} positives={stats.num_positive_tuples} "
        f"negatives={stats.num_negative_tuples}"
    )
    return 0


_FAMILY_DEFAULT_PAIRS = {
    "pair": evaluators.DIRECT_PAIRS,
    "triple": evaluators.CONCAT_PAIRS,
    "peer": evaluators.PEER_PAIRS,
}


def _texts_of(tuples) -> list[str]:
    texts = []
    for t in tuples:
        texts.extend((t.question, t.reference, t.candidate))
    return texts


def cmd_train(args: argparse.Namespace) -> int:
    defaults = {
        "seed": 0,
        "family": "triple",
        "pairs": None,
        "learning-rate": 1e-3,
        "epochs": 2,
        "batch-size": 32,
        "weight-decay": 0.01,
        "hidden-size": 32,
        "layers": 2,
        "heads": 4,
        "ffn-size": 64,
        "max-len": 128,
        "dropout": 0.0,
    }
    config = _resolve(args, defaults)
    out = _prepare_out(config)
    _log(out, f"train family={config['family']}")
    train_tuples = corpus.read_records(config["train"], "eval-tuple")
    dev_tuples = corpus.read_records(config["dev"], "eval-tuple")

    if config["family"] == "linear":
        model = lexical.train_linear(train_tuples, dev_tuples, seed=int(config["seed"]))
        model.save(out / "model.txt")
        dev_f1 = metrics.precision_recall_f1(
            [model.predict(t.question, t.reference, t.short_answer, t.candidate)[1] for t in dev_tuples],
            [t.label for t in dev_tuples],
        )[2]
        _write_json(out / "history.json", {"alpha": model.alpha, "dev_f1": dev_f1})
        print(f"linear judge: alpha={model.alpha:.2f} dev_f1={dev_f1:.4f}")
        _log(out, "train finished")
        return 0

    family = Family(config["family"])
    if config.get("pairs"):
        pairs = tuple(evaluators.parse_pair(p.strip()) for p in str(config["pairs"]).split(","))
    else:
        pairs = _FAMILY_DEFAULT_PAIRS[family.value]
    eval_config = EvaluatorConfig(family=family, pairs=pairs)
    encoder_config = EncoderConfig(
        hidden_size=int(config["hidden-size"]),
        num_layers=int(config["layers"]),
        num_heads=int(config["heads"]),
        ffn_size=int(config["ffn-size"]),
        max_len=int(config["max-len"]),
        dropout=float(config["dropout"]),
    )
    vocab = Vocabulary.from_texts(_texts_of(train_tuples) + _texts_of(dev_tuples))
    seed = int(config["seed"])
    model = evaluators.assemble(
        eval_config, evaluators.tiny_encoder_factory(encoder_config, vocab, seed), seed=seed
    )
    train_config = TrainConfig(
        learning_rate=float(config["learning-rate"]),
        epochs=int(config["epochs"]),
        batch_size=int(config["batch-size"]),
        weight_decay=float(config["weight-decay"]),
        seed=seed,
    )
    model, history = evaluators.train(model, train_tuples, dev_tuples, train_config)
    evaluators.save_evaluator(model, out / "model")
    _write_json(out / "history.json", history.to_records())
    best = history.epochs[history.best_epoch - 1]
    print(f"trained {family.value} judge: best epoch {best.epoch} dev_f1={best.dev_f1:.4f}")
    _log(out, "train finished")
    return 0


def _load_judge(config: dict, tuples=None, refs=None):
    if config.get("judge") == "oracle":
        if refs is not None:
            return harness.OracleJudge.from_references(refs)
        if tuples is not None:
            return harness.OracleJudge.from_tuples(tuples)
        raise ValueError("oracle judge needs tuples or references with gold labels")
    model_path = config.get("model")
    if not model_path:
        raise ValueError("either --model or --judge oracle is required")
    path = Path(model_path)
    if path.is_dir():
        return evaluators.load_evaluator(path)
    return lexical.LinearModel.load(path)


def cmd_eval_pointwise(args: argparse.Namespace) -> int:
    config = _resolve(args, {"seed": 0})
    out = _prepare_out(config)
    _log(out, "eval-pointwise")
    tuples = corpus.read_records(config["tuples"], "eval-tuple")
    judge = _load_judge(config, tuples=tuples)
    report = harness.pointwise_report(judge, tuples)
    _write_json(out / "report.json", report.to_record())
    (out / "report.txt").write_text(metrics.render_reports([report]), encoding="utf-8")
    print(
        f"f1={report.value:.4f} precision={report.extras['precision']:.4f} "
        f"recall={report.extras['recall']:.4f} n={report.n}"
    )
    _log(out, "eval-pointwise finished")
    return 0


def cmd_eval_system(args: argparse.Namespace) -> int:
    config = _resolve(args, {"seed": 0, "alpha": None, "tune": None})
    out = _prepare_out(config)
    _log(out, "eval-system")
    runs = harness.read_system_runs(config["runs"])
    refs = harness.read_references(config["refs"])
    judge = _load_judge(config, refs=refs)

    if config.get("tune"):
        dev_runs = (
            harness.read_system_runs(config["dev-runs"]) if config.get("dev-runs") else runs
        )
        calibration = harness.tune_threshold(judge, dev_runs, refs)
        alpha = calibration.alpha
        _write_json(
            out / "calibration.json",
            {
                "alpha": calibration.alpha,
                "dev_rmse": calibration.dev_rmse,
                "grid": calibration.grid,
            },
        )
    elif config.get("alpha") is not None:
        alpha = float(config["alpha"])
    else:
        alpha = 0.5

    have_gold = refs.has_gold_labels()
    ranked = all(run.is_ranked for run in runs)
    estimates: dict[str, dict[str, float]] = {}
    gold: dict[str, dict[str, float]] = {}
    for run in runs:
        if ranked:
            estimates[run.system_id] = harness.estimate_ranking_metrics(judge, run, refs, alpha)
            if have_gold:
                gold[run.system_id] = harness.gold_ranking_metrics(run, refs)
        else:
            estimates[run.system_id] = {
                "p_at_1": harness.estimate_system_accuracy(judge, run, refs, alpha)
            }
            if have_gold:
                gold[run.system_id] = {"p_at_1": harness.gold_system_accuracy(run, refs)}
    _write_json(out / "estimates.json", {"alpha": alpha, "estimated": estimates, "gold": gold})

    if have_gold:
        metric_names = sorted(next(iter(estimates.values())))
        comparisons = [
            harness.compare_systems(
                {s: estimates[s][m] for s in estimates},
                {s: gold[s][m] for s in gold},
                metric=m,
                strict=False,
            )
            for m in metric_names
        ]
        with open(out / "report.jsonl", "w", encoding="utf-8") as handle:
            for comparison in comparisons:
                handle.write(json.dumps(comparison.to_record(), sort_keys=True) + "\n")
        text = "\n".join(harness.render_comparison(c) for c in comparisons)
        (out / "report.txt").write_text(text, encoding="utf-8")
        for comparison in comparisons:
            print(
                f"{comparison.metric}: tau={comparison.tau:.4f} rmse={comparison.rmse:.4f} "
                f"sigma={comparison.sigma:.4f}"
            )
    else:
        print("no gold labels in references; wrote estimates only")
    _log(out, "eval-system finished")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.input)
    lines = []
    with open(path, encoding="utf-8") as handle:
        records = [json.loads(line) for line in handle if line.strip()]
    for record in records:
        if "systems" in record:
            nan = float("nan")
            comparison = harness.SystemComparison(
                metric=record["metric"],
                systems=record["systems"],
                estimated=record["estimated"],
                gold=record["gold"],
                tau=record["tau"] if record["tau"] is not None else nan,
                p_value=record["p_value"] if record["p_value"] is not None else nan,
                rmse=record["rmse"],
                sigma=record["sigma"],
            )
            lines.append(harness.render_comparison(comparison))
        else:
            report = metrics.MetricReport(
                name=record["name"],
                value=record["value"],
                n=record["n"],
                extras=record.get("extras", {}),
            )
            lines.append(metrics.render_reports([report]))
    text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _add_common(parser: argparse.ArgumentParser, need_out: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--config", default=None, help="YAML config file")
    if need_out:
        parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qaeval", description="Automatic accuracy estimation for QA systems"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-data", help="derive sentence labels and judge tuples from a corpus")
    p.add_argument("--corpus", required=True, help="mr-document records (JSON lines)")
    _add_common(p)
    p.set_defaults(func=cmd_build_data)

    p = sub.add_parser("train", help="train a point-wise judge")
    p.add_argument("--train", required=True, help="training tuples (eval-tuple records)")
    p.add_argument("--dev", required=True, help="dev tuples for early stopping / threshold")
    p.add_argument("--family", choices=["linear", "pair", "triple", "peer"], default=None)
    p.add_argument("--pairs", default=None, help="comma-separated pair specs, e.g. 'r:qt,t:qr'")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--hidden-size", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--ffn-size", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-pointwise", help="score judge decisions against tuple labels")
    p.add_argument("--tuples", required=True)
    p.add_argument("--model", default=None, help="model bundle directory or linear model file")
    p.add_argument("--judge", choices=["oracle"], default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval_pointwise)

    p = sub.add_parser("eval-system", help="estimate system metrics and compare against gold")
    p.add_argument("--runs", required=True, help="system run records (JSON lines)")
    p.add_argument("--refs", required=True, help="reference records (JSON lines)")
    p.add_argument("--model", default=None)
    p.add_argument("--judge", choices=["oracle"], default=None)
    p.add_argument("--alpha", type=float, default=None, help="decision threshold")
    p.add_argument("--tune", action="store_const", const=True, default=None,
                   help="tune the threshold on dev runs (or on --runs)")
    p.add_argument("--dev-runs", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval_system)

    p = sub.add_parser("report", help="render a machine-readable report as a text table")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, corpus.RecordFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

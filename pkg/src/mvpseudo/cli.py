"""Command-line entry point.

Subcommands::

    mvpseudo synth        --out DIR [--seed N] [--label-rate R] [generator flags]
    mvpseudo fad          --config C --item ID [--item ID ...] --out DIR
    mvpseudo pseudo-label --config C --out DIR [--seed N] [--label-rate R]
    mvpseudo train        --config C --out DIR [--strategy S] [--seed N] [--label-rate R]
    mvpseudo report       --out DIR [--audit FILE ...]

Exit status: 0 success, 1 runtime error, 2 invalid configuration or input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import RunConfig, default_threshold, load_run_config, validate_run_config
from .acoustic import assign_acoustic_label, average_over_encoders
from .classifier import LinearModel
from .engine import STRATEGIES, MergedModel, SslResult, ViewModel
from .errors import MvPseudoError, ValidationError
from .formats import atomic_write_text, write_embeddings, write_labels, write_predictions, write_splits
from .pipeline import load_dataset, pseudo_label, run_from_config, score_items, select_seed
from .synth import BENCHMARK_HYPERPARAMS, SynthConfig, SynthCorpus, generate_corpus

log = logging.getLogger("mvpseudo")

AUDIT_FILE = "audit.jsonl"
HISTORY_FILE = "history.json"

def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- synth -------------------------------------------------------------------


def write_corpus(corpus: SynthCorpus, out: Path) -> Path:
    """Write a corpus in the on-disk formats plus a ready-to-run config.json."""
    out.mkdir(parents=True, exist_ok=True)
    emb_paths = {}
    for enc in corpus.encoders:
        name = f"{enc}.emb"
        write_embeddings(out / name, corpus.embeddings[enc])
        emb_paths[enc] = name
    write_labels(out / "labels.csv", corpus.labels)
    write_predictions(out / "predictions.csv", corpus.predictions)
    write_splits(out / "splits.csv", corpus.splits)
    cfg = corpus.config
    run_cfg = {
        "classes": list(corpus.classes),
        "encoders": list(corpus.encoders),
        "audio_view": corpus.encoders[0],
        "text_view": corpus.encoders[-1],
        "fusion": "early",
        "strategy": "proposed",
        "label_rate": cfg.label_rate,
        "threshold": default_threshold(cfg.classes),
        "hyperparams": dict(BENCHMARK_HYPERPARAMS),
        "max_iterations": 40,
        "patience": 2,
        "removal_fraction": 0.2,
        "seed": cfg.seed,
        "paths": {
            "embeddings": emb_paths,
            "labels": "labels.csv",
            "predictions": "predictions.csv",
            "splits": "splits.csv",
        },
    }
    validate_run_config(run_cfg, out)
    atomic_write_text(out / "synth.json", _dump(cfg.to_dict()))
    atomic_write_text(out / "config.json", _dump(run_cfg))
    return out / "config.json"


def cmd_synth(args) -> int:
    overrides = {
        k: v
        for k, v in {
            "seed": args.seed,
            "label_rate": args.label_rate,
            "classes": args.classes,
            "encoders": args.encoders,
            "items_per_class": args.items_per_class,
            "frames_per_item": args.frames_per_item,
            "dims": args.dims,
            "class_separation": args.separation,
            "item_spread": args.item_spread,
            "predictor_count": args.predictors,
            "predictor_accuracy": args.predictor_accuracy,
        }.items()
        if v is not None
    }
    cfg = replace(SynthConfig(), **overrides)
    path = write_corpus(generate_corpus(cfg), Path(args.out))
    print(f"wrote synthetic corpus; run config at {path}")
    return 0


# -- fad / pseudo-label --------------------------------------------------------


def _append_audit(out: Path, record: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / AUDIT_FILE, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _load(args) -> RunConfig:
    cfg = load_run_config(args.config)
    return cfg.with_overrides(
        seed=getattr(args, "seed", None),
        label_rate=getattr(args, "label_rate", None),
        strategy=getattr(args, "strategy", None),
    )


def cmd_fad(args) -> int:
    cfg = _load(args)
    ds = load_dataset(cfg)
    seed_labels = select_seed(ds, cfg.label_rate, cfg.seed)
    unknown = [i for i in args.item if i not in ds.embeddings[ds.encoders[0]]]
    if unknown:
        raise ValidationError(f"unknown item(s) {unknown}")
    tables, jittered = score_items(ds, seed_labels, args.item, cfg.ridge)
    payload = []
    for item, table in tables.items():
        avg = average_over_encoders(table)
        payload.append({**table.to_dict(), "average": avg, "acoustic_label": assign_acoustic_label(avg, ds.classes)})
        print(_render_fad(table, avg))
    out = Path(args.out)
    atomic_write_text(out / "fad_scores.json", _dump({"tables": payload, "jittered": [list(j) for j in jittered]}))
    _append_audit(out, {"command": "fad", "config_digest": cfg.digest(), "seed": cfg.seed,
                        "label_rate": cfg.label_rate, "items": list(args.item)})
    return 0


def _render_fad(table, avg) -> str:
    width = max(8, *(len(c) for c in table.classes))
    head = f"{table.item_id:<10}" + "".join(f"{c:>{width + 2}}" for c in table.classes)
    rows = [head]
    for enc, row in zip(table.encoders, table.scores):
        rows.append(f"{enc:<10}" + "".join(f"{v:>{width + 2}.2f}" for v in row))
    best = min(avg, key=lambda c: (avg[c], table.classes.index(c)))
    rows.append(f"{'average':<10}" + "".join(
        f"{('*' if c == best else '') + format(avg[c], '.2f'):>{width + 2}}" for c in table.classes
    ))
    return "\n".join(rows)


def cmd_pseudo_label(args) -> int:
    cfg = _load(args)
    ds = load_dataset(cfg)
    seed_labels = select_seed(ds, cfg.label_rate, cfg.seed)
    pl = pseudo_label(ds, seed_labels, cfg.ridge)
    lines = ["item_id,acoustic_label,linguistic_label,status"]
    for item, rec in pl.records.items():
        lines.append(f"{item},{rec.acoustic_label},{rec.linguistic_label or ''},{rec.status}")
    out = Path(args.out)
    atomic_write_text(out / "pseudo_labels.csv", "\n".join(lines) + "\n")
    partition = {
        "labeled_seed": pl.partition.labeled_seed,
        "confident": pl.partition.confident,
        "unconfident": list(pl.partition.unconfident),
    }
    atomic_write_text(out / "partition.json", _dump(partition))
    atomic_write_text(out / "pseudo_label_report.json", _dump({"config_digest": cfg.digest(), **pl.summary()}))
    s = pl.summary()
    _append_audit(out, {"command": "pseudo-label", "config_digest": cfg.digest(), "seed": cfg.seed,
                        "label_rate": cfg.label_rate, "seed_items": s["seed"],
                        "confident": s["confident"], "unconfident": s["unconfident"]})
    print(f"seed={s['seed']} confident={s['confident']} unconfident={s['unconfident']} no_consensus={s['no_consensus']}")
    return 0


# -- train ---------------------------------------------------------------------


def _model_payload(model) -> dict:
    def lin(m: LinearModel) -> dict:
        return {"classes": list(m.classes), "weights": m.weights.tolist(), "bias": m.bias.tolist()}

    if isinstance(model, MergedModel):
        return {"kind": "merged", "audio": lin(model.audio_model), "text": lin(model.text_model)}
    if isinstance(model, ViewModel):
        return {"kind": "view", "view": model.view, **lin(model.model)}
    return {"kind": "bimodal", **lin(model)}


def audit_record(cfg: RunConfig, result: SslResult) -> dict:
    return {
        "command": "train",
        "config_digest": cfg.digest(),
        "strategy": result.strategy,
        "seed": cfg.seed,
        "label_rate": cfg.label_rate,
        "fusion": cfg.fusion,
        "iterations": len(result.history),
        "best_iteration": result.best_iteration,
        "validation_ua": [s.validation_ua for s in result.history],
        "final_test_ua": result.final_test_ua,
    }


def cmd_train(args) -> int:
    cfg = _load(args)
    result, pl = run_from_config(cfg)
    out = Path(args.out)
    history = {"config": cfg.raw, **result.to_dict(), "config_digest": cfg.digest()}
    if pl is not None:
        history["pseudo_labeling"] = pl.summary()
    atomic_write_text(out / HISTORY_FILE, _dump(history))
    atomic_write_text(out / "model.json", _dump(_model_payload(result.final_model)))
    _append_audit(out, audit_record(cfg, result))
    print(
        f"{result.strategy}: {len(result.history)} iteration(s), best at {result.best_iteration}, "
        f"test UA {100 * result.final_test_ua:.2f}%"
    )
    return 0


# -- report --------------------------------------------------------------------


def render_report(records: list[dict]) -> str:
    """Markdown table of mean test UA (%) per strategy and label rate."""
    cells: dict[tuple[str, float], list[float]] = defaultdict(list)
    for r in records:
        if r.get("command", "train") != "train":
            continue
        cells[(r["strategy"], float(r["label_rate"]))].append(float(r["final_test_ua"]))
    rates = sorted({rate for _, rate in cells}, reverse=True)
    strategies = [s for s in STRATEGIES if any((s, r) in cells for r in rates)]
    head = "| Strategy | " + " | ".join(f"N={100 * r:g}%" for r in rates) + " |"
    lines = [head, "|" + "---|" * (len(rates) + 1)]
    for s in strategies:
        vals = []
        for r in rates:
            v = cells.get((s, r))
            vals.append(f"{100 * sum(v) / len(v):.2f} (n={len(v)})" if v else "-")
        lines.append(f"| {s} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    out = Path(args.out)
    sources = [Path(p) for p in args.audit] if args.audit else [out / AUDIT_FILE]
    records = []
    for src in sources:
        if not src.exists():
            raise ValidationError(f"audit file {src} does not exist")
        for lineno, line in enumerate(src.read_text(encoding="utf-8").splitlines(), 1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError:
                    raise ValidationError(f"{src}:{lineno}: not a JSON record") from None
    if not any(r.get("command", "train") == "train" for r in records):
        raise ValidationError("no training records to report")
    table = render_report(records)
    atomic_write_text(out / "report.md", table)
    print(table, end="")
    return 0


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvpseudo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, strategy=False):
        if config:
            p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--label-rate", type=float, help="override the ground-truth labeling rate")
        if strategy:
            p.add_argument("--strategy", choices=STRATEGIES)

    p = sub.add_parser("synth", help="emit a synthetic corpus and matching config")
    common(p, config=False)
    p.add_argument("--classes", type=int)
    p.add_argument("--encoders", type=int)
    p.add_argument("--items-per-class", type=int)
    p.add_argument("--frames-per-item", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--item-spread", type=float)
    p.add_argument("--predictors", type=int)
    p.add_argument("--predictor-accuracy", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fad", help="score unlabeled items against labeled classes")
    common(p)
    p.add_argument("--item", action="append", required=True, help="item id (repeatable)")
    p.set_defaults(func=cmd_fad)

    p = sub.add_parser("pseudo-label", help="acoustic + linguistic pseudo-labels and partition")
    common(p)
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("train", help="run a training strategy end to end")
    common(p, strategy=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="render audit records as a comparison table")
    p.add_argument("--out", required=True)
    p.add_argument("--audit", action="append", help="audit.jsonl file(s); default OUT/audit.jsonl")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (MvPseudoError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: generate, train, eval, extract, grad-check.

Configuration precedence is flags > config file > built-in defaults; the
built-in training defaults are the reference hyperparameters (learning
rate 4e-5, batch 16, alpha 0.1, beta 0.9, gamma 0.95).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .corpus import (
    CorpusError,
    InfeasibleConfigError,
    SynthConfig,
    generate_synthetic,
    filter_corpus,
    load_corpus,
    load_schema,
    overlap_histogram,
    save_corpus,
    save_schema,
    synthetic_schema,
    Sentence,
)
from .encoder import load_embedding_file
from .environment import extract
from .evaluation import evaluate_model
from .model import ModelConfig
from .training import (
    CheckpointError,
    TrainConfig,
    TrainingError,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train,
)

TRAIN_FLAGS = {
    "lr": "learning_rate",
    "batch": "batch_size",
    "alpha": "alpha",
    "beta": "beta",
    "gamma": "gamma",
    "epochs": "epochs",
    "clip": "clip_norm",
    "seed": "seed",
    "workers": "workers",
    "final_reward": "final_reward_mode",
    "optimizer": "optimizer",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hirex",
        description="Hierarchical-RL joint relation extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic train/valid/test corpus")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--config", help="JSON file with synthetic-corpus settings")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--train", type=int, default=None, help="training sentences")
    gen.add_argument("--valid", type=int, default=None, help="validation sentences")
    gen.add_argument("--test", type=int, default=None, help="test sentences")

    tr = sub.add_parser("train", help="train a model and save the best checkpoint")
    tr.add_argument("--train", required=True, help="training corpus (JSONL)")
    tr.add_argument("--test", required=True, help="test corpus used for type filtering")
    tr.add_argument("--schema", required=True, help="relation schema (JSON)")
    tr.add_argument("--out", required=True, help="checkpoint output path")
    tr.add_argument("--metrics", help="metrics log output path (JSONL)")
    tr.add_argument("--config", help="JSON file with training settings")
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--batch", type=int, default=None)
    tr.add_argument("--alpha", type=float, default=None)
    tr.add_argument("--beta", type=float, default=None)
    tr.add_argument("--gamma", type=float, default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--clip", type=float, default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--workers", type=int, default=None)
    tr.add_argument("--final-reward", choices=["types", "triples"], default=None,
                    dest="final_reward")
    tr.add_argument("--optimizer", choices=["sgd", "adam"], default=None)
    tr.add_argument("--baseline", action="store_true", default=None,
                    help="moving-average return baseline")
    tr.add_argument("--embeddings", help="pretrained embedding file (token v1 .. vD)")
    tr.add_argument("--dim", type=int, default=None,
                    help="set all vector dimensions (default 300)")

    ev = sub.add_parser("eval", help="score a checkpoint on a corpus")
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--data", required=True, help="evaluation corpus (JSONL)")
    ev.add_argument("--out", help="report JSON output path")

    ex = sub.add_parser("extract", help="extract triples from raw token lines")
    ex.add_argument("--ckpt", required=True)
    ex.add_argument("--input", required=True, help="one whitespace-tokenized sentence per line")
    ex.add_argument("--out", help="output path (default: stdout)")

    gc = sub.add_parser("grad-check", help="verify gradients against finite differences")
    gc.add_argument("--instances", type=int, default=20)
    gc.add_argument("--tol", type=float, default=1e-3)
    gc.add_argument("--seed", type=int, default=0)
    return parser


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _merged_train_config(args) -> TrainConfig:
    settings = TrainConfig().to_dict()
    if args.config:
        file_cfg = _load_json(args.config)
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(file_cfg) - known - {"dim"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        settings.update({k: v for k, v in file_cfg.items() if k in known})
    for flag, key in TRAIN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            settings[key] = value
    if args.baseline is not None:
        settings["use_baseline"] = bool(args.baseline)
    return TrainConfig.from_dict(settings)


def _model_config(args) -> ModelConfig:
    dim = args.dim
    if dim is None and args.config:
        dim = _load_json(args.config).get("dim")
    return ModelConfig.uniform(dim) if dim is not None else ModelConfig()


def cmd_generate(args) -> int:
    synth = SynthConfig.from_dict(_load_json(args.config)) if args.config else SynthConfig()
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schema = synthetic_schema(synth)
    save_schema(schema, out / "schema.json")

    counts = {
        "train": args.train if args.train is not None else 200,
        "valid": args.valid if args.valid is not None else 20,
        "test": args.test if args.test is not None else 50,
    }
    manifest = {"seed": seed, "config": synth.to_dict(), "splits": {}}
    for offset, (split, n) in enumerate(counts.items()):
        cfg = SynthConfig.from_dict({**synth.to_dict(), "n_sentences": n})
        sentences = generate_synthetic(cfg, seed + offset)
        save_corpus(sentences, schema, out / f"{split}.jsonl")
        manifest["splits"][split] = {
            "sentences": n,
            "overlap_histogram": overlap_histogram(sentences),
        }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {', '.join(counts)} corpora to {out}")
    return 0


def cmd_train(args) -> int:
    config = _merged_train_config(args)
    model_config = _model_config(args)
    schema = load_schema(args.schema)
    train_corpus = load_corpus(args.train, schema)
    test_corpus = load_corpus(args.test, schema)
    train_corpus, _ = filter_corpus(train_corpus, test_corpus)
    if not train_corpus:
        raise CorpusError("no training sentences left after filtering")

    pretrained = None
    if args.embeddings:
        pretrained = load_embedding_file(args.embeddings, model_config.word_dim)

    ckpt, metrics = train(
        train_corpus, schema, config, model_config=model_config, pretrained=pretrained
    )
    save_checkpoint(ckpt, args.out)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            for entry in metrics:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    best = max((m["val_f1"] for m in metrics), default=0.0)
    print(f"trained {config.epochs} epochs on {len(train_corpus)} sentences; "
          f"best validation F1 {best:.3f}; checkpoint at {args.out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.to_model()
    sentences = load_corpus(args.data, model.schema)
    report = evaluate_model(model, sentences)
    print(report.format_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    return 0


def cmd_extract(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.to_model()
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        with open(args.input, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                tokens = line.split()
                if not tokens:
                    print(f"warning: line {line_no} is empty, skipped", file=sys.stderr)
                    continue
                sentence = Sentence.from_texts(tokens)
                triples = extract(sentence, model)
                record = [
                    {
                        "source_tokens": sentence.span_text(t.source),
                        "type": model.schema.name_of(t.relation),
                        "target_tokens": sentence.span_text(t.target),
                        "source_span": [t.source.start, t.source.end],
                        "target_span": [t.target.start, t.target.end],
                    }
                    for t in triples
                ]
                out.write(json.dumps(record) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_grad_check(args) -> int:
    report = grad_check(n_instances=args.instances, tolerance=args.tol, seed=args.seed)
    for inst in report.instances:
        print(
            f"instance {inst['instance']:>2}: hidden={inst['hidden_dim']} "
            f"length={inst['length']} steps={inst['steps']} "
            f"max_rel_err={inst['max_relative_error']:.2e}"
        )
    print(f"max relative error {report.max_relative_error:.2e} "
          f"(tolerance {report.tolerance:.0e})")
    if not report.passed:
        print("gradient check FAILED", file=sys.stderr)
        return 1
    print("gradient check passed")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "train": cmd_train,
        "eval": cmd_eval,
        "extract": cmd_extract,
        "grad-check": cmd_grad_check,
    }
    try:
        return handlers[args.command](args)
    except (CorpusError, InfeasibleConfigError, CheckpointError, TrainingError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

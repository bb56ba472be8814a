"""Parent prediction for document entities: generate, train, predict, evaluate.

Exit codes: 0 success, 1 usage error, 2 data validation failure,
3 internal consistency / configuration failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus as corpus_io
from .doc_model import read_documents, read_predictions, write_predictions
from .errors import DocForestError
from .evaluation import accuracy_counts, compare_methods, format_table
from .features import FeatureConfig, load_external_embeddings
from .matcher import init_model, load_model, save_model, train
from .pipeline import parse_hierarchy
from .rules import DEFAULT_RULES
from .synth import GenConfig, generate_corpus

logger = logging.getLogger("docforest")

EXIT_OK, EXIT_USAGE = 0, 1


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _categories(value: str | None):
    if value is None:
        return None
    return [c.strip() for c in value.split(",") if c.strip()]


def _external(args, dim: int):
    if getattr(args, "embeddings", None) is None:
        return None
    return load_external_embeddings(args.embeddings, dim)


def cmd_gen(args) -> int:
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = GenConfig.from_json(raw)
    split = generate_corpus(cfg)
    out = corpus_io.write_corpus(args.out, split)
    print(
        f"wrote {len(split.documents)} documents "
        f"(train {len(split.train)}, val {len(split.val)}, test {len(split.test)}) to {out}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    split = corpus_io.read_corpus(args.corpus)
    fcfg = FeatureConfig(text_hash_dim=args.text_hash_dim)
    model = init_model(fcfg, args.hidden_dim, args.emb_dim, args.s, args.m, args.seed)
    model, log = train(
        split, model, epochs=args.epochs, lr=args.lr, seed=args.seed,
        external=_external(args, fcfg.text_hash_dim),
    )
    save_model(model, args.out)
    if args.log:
        Path(args.log).write_text(json.dumps(log, indent=2) + "\n", encoding="utf-8")
    if log["epoch_loss"]:
        print(f"loss {log['initial_loss']:.5f} -> {log['epoch_loss'][-1]:.5f} over {args.epochs} epochs")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    docs = read_documents(args.input)
    external = _external(args, model.feature_config.text_hash_dim)
    rules_enabled = not args.no_rules
    write_predictions(
        args.out, ((d, parse_hierarchy(d, model, rules_enabled, external)) for d in docs)
    )
    print(f"predicted {sum(len(d) for d in docs)} entities in {len(docs)} documents -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    preds = read_predictions(args.preds)
    docs = read_documents(args.gold)
    correct, total = accuracy_counts(preds, docs, _categories(args.scored_categories))
    if total == 0:
        print("no labeled entities to score", file=sys.stderr)
        return 2
    print(json.dumps({"accuracy": correct / total, "correct": correct, "scored": total}))
    return EXIT_OK


def cmd_compare(args) -> int:
    split = corpus_io.read_corpus(args.corpus)
    model = load_model(args.model)
    report = compare_methods(
        split, model, _external(args, model.feature_config.text_hash_dim),
        _categories(args.scored_categories),
    )
    print(format_table(report))
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def cmd_rules(args) -> int:
    if not args.dump:
        print("nothing to do; pass --dump", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(DEFAULT_RULES.to_json(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="docforest", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    g.add_argument("--config", help="JSON file with generator settings")
    g.add_argument("--out", required=True, help="output corpus directory")
    g.add_argument("--seed", type=int, help="overrides the config seed")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the matcher on a corpus's train split")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--s", type=float, default=16.0, help="logit scale")
    t.add_argument("--m", type=float, default=0.2, help="angular margin (radians)")
    t.add_argument("--emb-dim", type=int, default=64)
    t.add_argument("--hidden-dim", type=int, default=128)
    t.add_argument("--text-hash-dim", type=int, default=64)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--embeddings", help="external text embeddings JSONL")
    t.add_argument("--log", help="write the training log JSON here")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict parents for a corpus JSONL")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--no-rules", action="store_true", help="matcher only (loss-only setting)")
    pr.add_argument("--embeddings")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="accuracy of predictions against gold labels")
    e.add_argument("--preds", required=True)
    e.add_argument("--gold", required=True)
    e.add_argument("--scored-categories", help="comma-separated categories to score")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="loss-only vs loss+greedy on val/test")
    c.add_argument("--corpus", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--json-out")
    c.add_argument("--embeddings")
    c.add_argument("--scored-categories")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("rules", help="inspect the compiled rule configuration")
    r.add_argument("--dump", action="store_true", help="print the rule config as JSON")
    r.set_defaults(func=cmd_rules)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except DocForestError as exc:
        print(f"docforest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"docforest: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"docforest: invalid JSON: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``prosodynn <subcommand> ...``.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 data/model mismatch.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import corpus as corpus_mod
from .embeddings import EmbeddingFormatError, load_embeddings_text, save_embeddings_text, train_skipgram
from .evaluation import emit_report, score_prf
from .features import LEVELS, tag_names
from .layers import check_topology
from .modelio import ModelFormatError, ModelMismatchError, load_model, save_model
from .training import (DEFAULT_LR, GRADCHECK_MAX_HIDDEN, GRADCHECK_MAX_T, TrainConfig, gradient_check,
                       predict_cascade, random_gradcheck_case, train_level)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _topology(s: str) -> str:
    try:
        return check_topology(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _load_chain(paths, embeddings=None):
    bundles = []
    for p in paths:
        try:
            bundles.append(load_model(p, embeddings))
        except (ModelFormatError, EmbeddingFormatError) as e:
            raise DataError(str(e)) from None
        except ModelMismatchError as e:
            raise DataError(str(e)) from None
        except OSError as e:
            raise UsageError(str(e)) from None
    levels = [b.level for b in bundles]
    if levels != list(LEVELS[:len(levels)]):
        raise DataError(f"models must be given in cascade order {LEVELS[:len(levels)]}, got {tuple(levels)}")
    for k, b in enumerate(bundles):
        if b.cascade and k == 0:
            raise DataError(f"{b.level} model expects a previous-level model")
    return bundles


def cmd_train(args) -> int:
    level = args.level.upper()
    try:
        config = TrainConfig(level=level, topology=args.topology, hidden=args.hidden, feature_mode=args.features,
                             learning_rate=args.lr, momentum=args.momentum, batch_size=args.batch,
                             patience=args.patience, max_epochs=args.max_epochs, seed=args.seed,
                             cascade=not args.no_cascade, criterion=args.criterion)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if config.uses_cascade and not args.prev_model:
        raise UsageError(f"--level {args.level} uses the cascade feature and needs --prev-model "
                         "(the previous level's model chain), or pass --no-cascade")
    embeddings = None
    if config.feature_mode == "embedding":
        if not args.embeddings:
            raise UsageError("--features embedding needs --embeddings")
        embeddings = _read_embeddings(args.embeddings)
    train = _read_corpus(args.train)
    valid = _read_corpus(args.valid)
    prev_train = prev_valid = None
    if config.uses_cascade:
        chain = _load_chain(args.prev_model.split(","), None)
        if chain[-1].level != LEVELS[LEVELS.index(level) - 1]:
            raise DataError(f"--prev-model chain ends at {chain[-1].level}; {level} needs "
                            f"{LEVELS[LEVELS.index(level) - 1]}")
        prev_train = [d[chain[-1].level] for d in predict_cascade(chain, [s.chars for s in train])]
        prev_valid = [d[chain[-1].level] for d in predict_cascade(chain, [s.chars for s in valid])]
    ref = None
    if embeddings is not None:
        ref = os.path.relpath(os.path.abspath(args.embeddings), os.path.dirname(os.path.abspath(args.out)))

    def report(rec):
        print(f"epoch {rec.epoch}\tloss {rec.train_loss:.6f}\tvalid_error {rec.valid_error:.6f}", flush=True)

    try:
        best, records = train_level(train, valid, config, embeddings=embeddings, embedding_ref=ref,
                                    prev_train=prev_train, prev_valid=prev_valid, on_epoch=report)
    except ValueError as e:
        raise DataError(str(e)) from None
    save_model(best, args.out)
    best_rec = min(records, key=lambda r: (r.valid_error, r.epoch))
    print(f"best epoch {best_rec.epoch}; model written to {args.out}")
    return EXIT_OK


def _read_corpus(path, allow_missing=False):
    try:
        return corpus_mod.parse_corpus(path, allow_missing=allow_missing)
    except corpus_mod.CorpusFormatError as e:
        raise DataError(str(e)) from None
    except OSError as e:
        raise UsageError(str(e)) from None


def _read_embeddings(path):
    try:
        return load_embeddings_text(path)
    except EmbeddingFormatError as e:
        raise DataError(str(e)) from None
    except OSError as e:
        raise UsageError(str(e)) from None


def cmd_predict(args) -> int:
    embeddings = _read_embeddings(args.embeddings) if args.embeddings else None
    chain = _load_chain(args.models.split(","), embeddings)
    try:
        sentences = corpus_mod.parse_plain(args.input)
    except OSError as e:
        raise UsageError(str(e)) from None
    if not sentences:
        raise DataError(f"{args.input}: no sentences")
    preds = predict_cascade(chain, sentences)
    out = []
    for chars, d in zip(sentences, preds):
        tags = {lv.lower(): tag_names(d[lv]) if lv in d else None for lv in LEVELS}
        out.append(corpus_mod.AnnotatedSentence(chars, **tags))
    corpus_mod.write_corpus(out, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    gold = _read_corpus(args.gold)
    pred = _read_corpus(args.pred, allow_missing=True)
    if len(gold) != len(pred):
        raise UsageError(f"{args.gold} has {len(gold)} sentences, {args.pred} has {len(pred)}")
    for n, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise UsageError(f"sentence {n + 1}: gold length {len(g)} vs predicted {len(p)}")
    metrics = {}
    for lv in LEVELS:
        if pred and all(s.has_level(lv) for s in pred) and all(s.has_level(lv) for s in gold):
            metrics[lv] = score_prf([s.tags(lv) for s in pred], [s.tags(lv) for s in gold])
    if not metrics:
        raise UsageError("no level is present in both files")
    print(emit_report(metrics, args.out, args.kv), end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.hidden > GRADCHECK_MAX_HIDDEN or args.length > GRADCHECK_MAX_T:
        raise UsageError(f"gradcheck needs --hidden <= {GRADCHECK_MAX_HIDDEN} and --length <= {GRADCHECK_MAX_T}")
    bundle, enc, gold = random_gradcheck_case(args.topology, args.hidden, args.input_dim, args.length, args.seed)
    err = gradient_check(bundle, enc, gold, args.epsilon)
    ok = err < GRADCHECK_TOLERANCE
    print(f"topology {args.topology or '-'} hidden {args.hidden}: max relative error {err:.3e} "
          f"({'ok' if ok else 'FAILED'}, tolerance {GRADCHECK_TOLERANCE:g})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_embed_train(args) -> int:
    try:
        table = train_skipgram(args.input, dim=args.dim, window=args.window, negatives=args.negatives,
                               epochs=args.epochs, lr=args.lr, seed=args.seed)
    except OSError as e:
        raise UsageError(str(e)) from None
    except ValueError as e:
        raise DataError(str(e)) from None
    save_embeddings_text(table, args.out)
    print(f"{len(table)} vectors of dimension {table.dim} written to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    sentences = _read_corpus(args.corpus)
    try:
        parts = corpus_mod.split_corpus(sentences, args.train, args.valid, args.test, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    os.makedirs(args.out_dir, exist_ok=True)
    for name, part in zip(("train", "valid", "test"), parts):
        path = os.path.join(args.out_dir, f"{name}.tsv")
        corpus_mod.write_corpus(part, path)
        print(f"{path}: {len(part)} sentences")
    return EXIT_OK


class _DefaultsFormatter(argparse.HelpFormatter):
    """Append ``(default: ...)`` to options that have a meaningful default."""

    def _get_help_string(self, action):
        text = action.help or ""
        if action.default not in (None, False, argparse.SUPPRESS) and action.option_strings:
            text += " (default: %(default)s)"
        return text


def build_parser() -> argparse.ArgumentParser:
    fmt = _DefaultsFormatter
    parser = argparse.ArgumentParser(prog="prosodynn", description="Neural prosodic boundary prediction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", formatter_class=fmt, help="train one boundary level")
    p.add_argument("--level", required=True, choices=["pw", "pph", "iph"])
    p.add_argument("--train", required=True, help="training corpus (TSV)")
    p.add_argument("--valid", required=True, help="validation corpus (TSV)")
    p.add_argument("--topology", type=_topology, default="FBB", help="layer string over F (feed-forward) and B (BLSTM)")
    p.add_argument("--hidden", type=_positive_int, default=32, help="nodes per hidden layer (typical: 32, 64, 128, 256)")
    p.add_argument("--features", choices=["onehot", "embedding"], default="onehot", help="input encoding")
    p.add_argument("--embeddings", help="word2vec text-format vectors for --features embedding")
    p.add_argument("--prev-model", help="comma-separated model chain for the previous levels (pph: pw.model; "
                                        "iph: pw.model,pph.model)")
    p.add_argument("--no-cascade", action="store_true", help="do not append the previous level's predicted tag")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--seed", type=int, default=1, help="seed for weight init and batch shuffling")
    p.add_argument("--lr", type=float, default=None,
                   help=f"learning rate (default {DEFAULT_LR['PW']:g} for pw, {DEFAULT_LR['PPH']:g} for pph/iph)")
    p.add_argument("--momentum", type=float, default=0.9, help="classical momentum coefficient")
    p.add_argument("--batch", type=_positive_int, default=32, help="sentences per SGD batch")
    p.add_argument("--patience", type=_positive_int, default=10, help="epochs without validation improvement before stopping")
    p.add_argument("--max-epochs", type=_positive_int, default=500, help="hard cap on training epochs")
    p.add_argument("--criterion", choices=["error", "fscore"], default="error",
                   help="validation criterion: tag error rate or 1 - F")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", formatter_class=fmt, help="tag sentences with a model chain")
    p.add_argument("--models", required=True, help="pw.model[,pph.model[,iph.model]]")
    p.add_argument("--input", required=True, help="characters (one or more per line), blank line between sentences")
    p.add_argument("--out", required=True, help="output corpus TSV ('-' for levels not predicted)")
    p.add_argument("--embeddings", help="embedding table for embedding-feature models")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", formatter_class=fmt, help="precision/recall/F of predictions")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", help="write the report table here too")
    p.add_argument("--kv", help="write a key=value dump of the metrics")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", formatter_class=fmt, help="finite-difference check of a random model")
    p.add_argument("--topology", type=_topology, default="FB", help="layer string over F and B")
    p.add_argument("--hidden", type=_positive_int, default=8, help="nodes per hidden layer")
    p.add_argument("--input-dim", type=_positive_int, default=12, help="random input vector size")
    p.add_argument("--length", type=_positive_int, default=5, help="sentence length")
    p.add_argument("--epsilon", type=float, default=1e-5, help="central-difference step")
    p.add_argument("--seed", type=int, default=1, help="seed for the random model and data")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("embed-train", formatter_class=fmt, help="train skip-gram character vectors")
    p.add_argument("--input", required=True, help="raw UTF-8 text, one sentence per line")
    p.add_argument("--out", required=True, help="output vectors (word2vec text format)")
    p.add_argument("--dim", type=_positive_int, default=100, help="vector size")
    p.add_argument("--window", type=_positive_int, default=5, help="context characters on each side")
    p.add_argument("--negatives", type=int, default=5, help="noise samples per context pair")
    p.add_argument("--epochs", type=_positive_int, default=5, help="passes over the text")
    p.add_argument("--lr", type=float, default=0.025, help="initial learning rate, decays linearly")
    p.add_argument("--seed", type=int, default=1, help="seed for init and sampling")
    p.set_defaults(func=cmd_embed_train)

    p = sub.add_parser("split", formatter_class=fmt, help="seeded train/valid/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--train", type=int, required=True, help="sentences, e.g. 43390")
    p.add_argument("--valid", type=int, required=True, help="sentences, e.g. 2410")
    p.add_argument("--test", type=int, required=True, help="sentences, e.g. 2410")
    p.add_argument("--seed", type=int, default=1, help="shuffle seed")
    p.add_argument("--out-dir", default=".", help="directory for train.tsv, valid.tsv, test.tsv")
    p.set_defaults(func=cmd_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"prosodynn {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"prosodynn {args.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: train, decode, eval, inspect.

All settings can come from a TOML config file; flags override file values.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .corpus import (CorpusError, evaluate, load_corpus, load_predictions,
                     prolog_query, save_predictions)
from .funql import FunqlError, SemanticType, build_grammar, serialize_mr
from .hybridtree import Sentence, format_diagram
from .model import DivergedLossError, Model, ModelConfig, TrainingError
from .neural import EmbeddingTable
from .chart import NoDerivationError, inside_unclamped
from .funql import load_signatures

log = logging.getLogger("depsem")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# The TOML file uses the same keys as the long flags (dashes -> underscores).
CONFIG_KEYS = {
    "corpus", "test_corpus", "signatures", "embeddings", "model",
    "predictions", "loss_trace", "root_type", "depth_cap", "l2", "optimizer",
    "lr", "epochs", "max_iterations", "features", "embedding_features",
    "neural", "seed", "threads", "emit_prolog", "language",
}


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _merge(args):
    """File values fill in flags the user left at None."""
    settings = _load_config(args.config) if args.config else {}
    for key, value in settings.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")


def _add_common(sub):
    sub.add_argument("--config", help="TOML config file; flags override it")
    sub.add_argument("--signatures", help="function signature TSV")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)


def _model_config(args) -> ModelConfig:
    cfg = ModelConfig()
    if args.depth_cap is not None:
        if args.depth_cap < 1:
            raise ConfigError("--c must be at least 1")
        cfg.depth_cap = args.depth_cap
    if args.l2 is not None:
        cfg.l2 = args.l2
    if getattr(args, "lr", None) is not None:
        if args.lr <= 0:
            raise ConfigError("--lr must be positive")
        cfg.lr = args.lr
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    if getattr(args, "max_iterations", None) is not None:
        cfg.max_iterations = args.max_iterations
    if args.features is not None:
        cfg.feature_spec = args.features
    if getattr(args, "embedding_features", None):
        cfg.use_embedding_features = True
    if getattr(args, "neural", None):
        cfg.neural = True
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    try:
        cfg.flags()
    except ValueError as exc:
        raise ConfigError(str(exc))
    return cfg


def _load_instances(args, path):
    _require(args, "signatures")
    try:
        table = load_signatures(args.signatures)
    except (OSError, FunqlError) as exc:
        raise ConfigError(f"cannot load signatures: {exc}")
    try:
        instances, errors = load_corpus(path, table,
                                        language=args.language or "en")
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}")
    for lineno, message in errors:
        log.warning("%s:%d: %s", path, lineno, message)
    if not instances:
        raise DataError(f"no usable instances in {path}")
    return table, instances


def _load_embeddings(args):
    if getattr(args, "embeddings", None) is None:
        return None
    try:
        return EmbeddingTable.load(args.embeddings)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load embeddings: {exc}")


def _seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))


def _infer_root_type(args, instances):
    if args.root_type:
        return SemanticType(args.root_type)
    roots = {inst.gold.root.unit.return_type for inst in instances}
    if len(roots) != 1:
        raise DataError(
            f"corpus has {len(roots)} distinct root types; pass --root-type")
    return roots.pop()


def cmd_train(args):
    args = _merge(args)
    _require(args, "corpus", "model")
    cfg = _model_config(args)
    if cfg.neural or cfg.use_embedding_features:
        _require(args, "embeddings")
    _, instances = _load_instances(args, args.corpus)
    embeddings = _load_embeddings(args)
    if embeddings is not None:
        cfg.embedding_dim = embeddings.dim
    grammar = build_grammar((inst.gold for inst in instances),
                            _infer_root_type(args, instances))
    _seed_everything(cfg.seed)
    model = Model(grammar, cfg, embeddings=embeddings)
    optimizer = args.optimizer or "lbfgs"
    if optimizer not in ("lbfgs", "sgd"):
        raise ConfigError(f"unknown optimizer {optimizer!r}")
    trace = model.train(instances, optimizer=optimizer)
    model.save(args.model)
    if args.loss_trace:
        with open(args.loss_trace, "w", encoding="utf-8") as fh:
            for i, loss in enumerate(trace):
                fh.write(f"{i}\t{loss!r}\n")
    log.info("trained on %d instances (%d skipped); final loss %.6f",
             len(instances), len(model.skipped),
             trace[-1] if trace else float("nan"))
    return EXIT_OK


def _load_model(args):
    _require(args, "model")
    try:
        return Model.load(args.model, embeddings=_load_embeddings(args))
    except OSError as exc:
        raise ConfigError(f"cannot read model {args.model}: {exc}")


def cmd_decode(args):
    args = _merge(args)
    _require(args, "corpus", "predictions")
    model = _load_model(args)
    if (model.config.neural or model.config.use_embedding_features) \
            and model.embeddings is None:
        raise ConfigError("this model needs --embeddings at decode time")
    _, instances = _load_instances(args, args.corpus)
    predictions = []
    for inst in instances:
        decoded = model.decode(inst.sentence)
        predictions.append(None if decoded is None else decoded[0])
    save_predictions(args.predictions, predictions)
    if args.emit_prolog:
        with open(args.emit_prolog, "w", encoding="utf-8") as fh:
            for pred in predictions:
                fh.write(("" if pred is None else prolog_query(pred)) + "\n")
    produced = sum(1 for p in predictions if p is not None)
    log.info("decoded %d/%d instances", produced, len(predictions))
    return EXIT_OK


def cmd_eval(args):
    args = _merge(args)
    _require(args, "corpus", "predictions", "signatures")
    table, instances = _load_instances(args, args.corpus)
    try:
        predictions = load_predictions(args.predictions, table)
    except OSError as exc:
        raise DataError(f"cannot read predictions: {exc}")
    except FunqlError as exc:
        raise DataError(f"bad prediction: {exc}")
    try:
        metrics = evaluate(predictions, [inst.gold for inst in instances])
    except CorpusError as exc:
        raise DataError(str(exc))
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_inspect(args):
    args = _merge(args)
    model = _load_model(args)
    if args.sentence:
        sentence = Sentence.from_text(args.sentence)
    else:
        raise ConfigError("--sentence is required")
    try:
        chart = inside_unclamped(sentence, model.grammar, model.scorer(),
                                 model.config.depth_cap)
        tree, m, score = chart.viterbi()
    except NoDerivationError:
        raise DataError("no derivation covers this sentence")
    print(f"# sentence: {' '.join(sentence.tokens)}")
    print(f"# viterbi:  {serialize_mr(m)}   (log score {score:.6f})")
    print(format_diagram(tree, sentence))
    if args.marginals:
        with open(args.marginals, "w", encoding="utf-8") as fh:
            fh.write("i\tj\tk\tdirection\tpattern\tunit\tlog_marginal\n")
            for head, end, mod, direction, pattern, unit, lm in \
                    chart.marginal_rows():
                fh.write(f"{head}\t{end}\t{mod}\t{direction}\t{pattern}\t"
                         f"{unit.label()}\t{lm:.10f}\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="depsem",
        description="Semantic parsing with latent dependency-based hybrid trees")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="fit a model on a paired corpus")
    _add_common(p)
    p.add_argument("--corpus", help="training corpus file")
    p.add_argument("--model", help="output model file")
    p.add_argument("--loss-trace", dest="loss_trace",
                   help="output TSV of per-iteration loss")
    p.add_argument("--root-type", dest="root_type")
    p.add_argument("--c", dest="depth_cap", type=int, default=None,
                   help="maximum semantic tree depth (default 20)")
    p.add_argument("--l2", type=float, default=None,
                   help="L2 strength (default 0.03)")
    p.add_argument("--optimizer", choices=("lbfgs", "sgd"), default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--max-iterations", dest="max_iterations", type=int,
                   default=None)
    p.add_argument("--features",
                   choices=("basic", "basic+hm", "basic+bow", "full"),
                   default=None)
    p.add_argument("--embedding-features", dest="embedding_features",
                   action="store_true", default=None)
    p.add_argument("--neural", action="store_true", default=None,
                   help="add the bilinear arc scorer")
    p.add_argument("--embeddings", help="word embedding text file")
    p.add_argument("--language", default=None)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("decode", help="predict meaning representations")
    _add_common(p)
    p.add_argument("--corpus", help="corpus file to decode")
    p.add_argument("--model", help="trained model file")
    p.add_argument("--predictions", help="output predictions file")
    p.add_argument("--emit-prolog", dest="emit_prolog",
                   help="also write Prolog query strings to this file")
    p.add_argument("--embeddings")
    p.add_argument("--language", default=None)
    p.set_defaults(func=cmd_decode)

    p = subs.add_parser("eval", help="score predictions against a corpus")
    _add_common(p)
    p.add_argument("--corpus", help="gold corpus file")
    p.add_argument("--predictions", help="predictions file")
    p.add_argument("--out", help="also write the metrics JSON here")
    p.add_argument("--language", default=None)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("inspect",
                        help="show the Viterbi tree and chart marginals")
    _add_common(p)
    p.add_argument("--model", help="trained model file")
    p.add_argument("--sentence", help="pre-tokenized sentence text")
    p.add_argument("--marginals", help="output TSV of arc-span marginals")
    p.add_argument("--embeddings")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergedLossError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FunqlError, CorpusError, TrainingError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

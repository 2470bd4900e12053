"""Command-line entry point.

Subcommands cover the whole pipeline: ingest raw tweets, train word
embeddings, train the supervised baseline, run the zero-shot and
few-shot grids, cross-validate the baseline, and recommend hashtags
for a single text.

Every option can come from three places, in priority order: the
command line, a JSON config file ({"zsl": {...}, "ingest": {...}},
selected by --config or the TAGREC_CONFIG environment variable), and
the built-in default. The fully resolved configuration is echoed into
every artifact a command writes.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .embedding import SgnsConfig, build_vocab, load_embeddings, save_embeddings, train_sgns
from .errors import DataError, NumericalError, UsageError
from .evaluate import (
    SupervisedExperimentConfig,
    ZslExperimentConfig,
    format_supervised_table,
    format_zsl_table,
    run_supervised_experiment,
    run_zsl_experiment,
)
from .ingest import (
    clean_text,
    corpus_from_clean,
    default_stopwords,
    extract_hashtags,
    filter_corpus,
    load_stopwords,
    materialize_dataset,
    minimal_tokens,
    normalize_raw,
    parse_raw_record,
    read_clean_jsonl,
    read_raw_jsonl,
    select_top_labels,
    write_clean_jsonl,
)
from .supervised import TrainSpec, save_baseline_bundle, train_baseline
from .zsl import (
    ZslBundle,
    dem_fit,
    eszsl_fit,
    fsl_augment,
    load_zsl_bundle,
    make_conse,
    make_split,
    recommend,
    save_zsl_bundle,
    subset_by_labels,
)

CONFIG_ENV_VAR = "TAGREC_CONFIG"

DEFAULTS: dict[str, dict] = {
    "ingest": {
        "input": None,
        "out": None,
        "stopwords": None,
        "top_n": 50,
        "min_tweets": 200,
        "labels_out": None,
        "report_out": None,
        "emb_corpus": None,
    },
    "train-embeddings": {
        "corpus": None,
        "out": None,
        "dim": 150,
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "lr": 0.025,
        "min_count": 1,
        "seed": 0,
        "subsample": None,
    },
    "train-baseline": {
        "clean": None,
        "embeddings": None,
        "out": None,
        "labels": None,
        "top_n": 50,
        "min_tweets": 200,
        "epochs": 50,
        "batch_size": 32,
        "lr": 0.001,
        "seed": 0,
        "hidden": 1024,
    },
    "zsl": {
        "clean": None,
        "embeddings": None,
        "labels": None,
        "top_n": 50,
        "min_tweets": 200,
        "splits": "40/10,30/20,25/25",
        "methods": "conse,eszsl,dem",
        "seeds": "0,1,2,3,4",
        "ks": "1,2,5",
        "gamma": 1.0,
        "conse_t": None,
        "epochs": 50,
        "batch_size": 32,
        "lr": 0.001,
        "hidden": 1024,
        "dem_epochs": 50,
        "dem_batch_size": 32,
        "dem_lr": 0.001,
        "out": None,
        "save_bundle": None,
    },
    "eval": {
        "clean": None,
        "embeddings": None,
        "labels": None,
        "top_n": 50,
        "min_tweets": 200,
        "folds": 5,
        "seed": 0,
        "averaging": "micro",
        "epochs": 50,
        "batch_size": 32,
        "lr": 0.001,
        "hidden": 1024,
        "out": None,
    },
    "recommend": {
        "bundle": None,
        "text": None,
        "k": 5,
        "candidates": None,
        "stopwords": None,
    },
}
DEFAULTS["fsl"] = {**DEFAULTS["zsl"], "shots": None, "shots_min": 5, "shots_max": 10}

REQUIRED: dict[str, tuple[str, ...]] = {
    "ingest": ("input", "out"),
    "train-embeddings": ("corpus", "out"),
    "train-baseline": ("clean", "embeddings", "out"),
    "zsl": ("clean", "embeddings"),
    "fsl": ("clean", "embeddings"),
    "eval": ("clean", "embeddings"),
    "recommend": ("bundle", "text"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="tagrec", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--config",
        help=f"JSON config file keyed by command name (default: ${CONFIG_ENV_VAR})",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", parents=[], help="clean a raw tweet JSONL file")
    p.add_argument("--input", "--in", dest="input", help="raw tweet JSONL")
    p.add_argument("--out", help="cleaned JSONL destination")
    p.add_argument("--stopwords", help="stopword file (default: bundled list)")
    p.add_argument("--top-n", dest="top_n", type=int, help="label catalog size")
    p.add_argument("--min-tweets", dest="min_tweets", type=int, help="minimum tweets per label")
    p.add_argument("--labels-out", dest="labels_out", help="label catalog destination")
    p.add_argument("--report-out", dest="report_out", help="drop report destination")
    p.add_argument(
        "--emb-corpus",
        dest="emb_corpus",
        help="also write a minimally cleaned text corpus for embedding training",
    )

    p = sub.add_parser("train-embeddings", help="train skip-gram embeddings")
    p.add_argument("--corpus", help="text file, one sentence per line")
    p.add_argument("--out", help="embedding destination (word2vec text format)")
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--subsample", type=float, help="frequent-token subsampling threshold")

    p = sub.add_parser("train-baseline", help="train the supervised classifier")
    _add_dataset_flags(p)
    p.add_argument("--out", help="model bundle destination")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden", type=int)

    for name in ("zsl", "fsl"):
        p = sub.add_parser(name, help=f"run the {name} evaluation grid")
        _add_dataset_flags(p)
        p.add_argument("--splits", help="comma-separated seen/unseen sizes, e.g. 40/10,30/20")
        p.add_argument("--methods", help="comma-separated subset of conse,eszsl,dem")
        p.add_argument("--seeds", help="comma-separated seeds")
        p.add_argument("--ks", help="comma-separated hit@K cutoffs")
        p.add_argument("--gamma", type=float, help="bilinear-model regularization strength")
        p.add_argument("--conse-t", dest="conse_t", type=int, help="labels combined per prediction")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--hidden", type=int)
        p.add_argument("--dem-epochs", dest="dem_epochs", type=int)
        p.add_argument("--dem-batch-size", dest="dem_batch_size", type=int)
        p.add_argument("--dem-lr", dest="dem_lr", type=float)
        p.add_argument("--out", help="also write results JSON here")
        p.add_argument(
            "--save-bundle",
            dest="save_bundle",
            help="fit and save one ranker bundle (single split, method, seed)",
        )
        if name == "fsl":
            p.add_argument("--shots", type=int, help="fixed shots per unseen label")
            p.add_argument("--shots-min", dest="shots_min", type=int)
            p.add_argument("--shots-max", dest="shots_max", type=int)

    p = sub.add_parser("eval", help="cross-validate the supervised baseline")
    _add_dataset_flags(p)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--averaging", choices=("micro", "macro"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--out", help="also write results JSON here")

    p = sub.add_parser("recommend", help="rank candidate hashtags for one text")
    p.add_argument("--bundle", help="ranker bundle from zsl/fsl --save-bundle")
    p.add_argument("--text", help="the text to tag")
    p.add_argument("--k", type=int)
    p.add_argument("--candidates", help="comma-separated candidate labels")
    p.add_argument("--stopwords", help="stopword file (default: bundled list)")
    return parser


def _add_dataset_flags(p) -> None:
    p.add_argument("--clean", help="cleaned JSONL from ingest")
    p.add_argument("--embeddings", help="word2vec-format embedding file")
    p.add_argument("--labels", help="label catalog JSON (default: derive with --top-n)")
    p.add_argument("--top-n", dest="top_n", type=int)
    p.add_argument("--min-tweets", dest="min_tweets", type=int)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DataError(f"config file {path}: expected an object keyed by command")
    return obj


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge CLI flags over config-file values over defaults."""
    command = args.command
    section = _load_config_file(args.config).get(command, {})
    if not isinstance(section, dict):
        raise DataError(f"config section {command!r} must be an object")
    resolved = {}
    for key, default in DEFAULTS[command].items():
        value = getattr(args, key, None)
        if value is None:
            value = section.get(key, default)
        resolved[key] = value
    for key in REQUIRED[command]:
        if resolved[key] is None:
            raise UsageError(f"--{key.replace('_', '-')} is required for {command}")
    return resolved


def _parse_pair_list(value) -> list[tuple[int, int]]:
    items = value.split(",") if isinstance(value, str) else list(value)
    pairs = []
    for item in items:
        if isinstance(item, str):
            parts = item.strip().split("/")
            if len(parts) != 2:
                raise UsageError(f"expected seen/unseen pair, got {item!r}")
            item = parts
        try:
            a, b = int(item[0]), int(item[1])
        except (ValueError, IndexError) as exc:
            raise UsageError(f"expected seen/unseen pair, got {item!r}") from exc
        pairs.append((a, b))
    if not pairs:
        raise UsageError("at least one split is required")
    return pairs


def _parse_int_list(value) -> list[int]:
    items = value.split(",") if isinstance(value, str) else list(value)
    try:
        result = [int(str(item).strip()) for item in items if str(item).strip()]
    except ValueError as exc:
        raise UsageError(f"expected integers, got {value!r}") from exc
    if not result:
        raise UsageError("empty integer list")
    return result


def _parse_str_list(value) -> list[str]:
    items = value.split(",") if isinstance(value, str) else list(value)
    result = [str(item).strip() for item in items if str(item).strip()]
    if not result:
        raise UsageError("empty list")
    return result


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def _derived_path(out: str, suffix: str) -> str:
    root, _ = os.path.splitext(out)
    return f"{root}.{suffix}"


def _load_dataset(cfg):
    corpus = corpus_from_clean(read_clean_jsonl(cfg["clean"]))
    if cfg["labels"]:
        with open(cfg["labels"], "r", encoding="ascii") as fh:
            catalog = json.load(fh)
        labels = catalog.get("labels") if isinstance(catalog, dict) else catalog
        if not isinstance(labels, list) or not labels:
            raise DataError(f"{cfg['labels']}: expected a non-empty label list")
    else:
        labels = select_top_labels(corpus, cfg["top_n"], cfg["min_tweets"])
        if not labels:
            raise DataError(
                f"no labels with >= {cfg['min_tweets']} tweets; lower --min-tweets"
            )
    return materialize_dataset(corpus, labels)


def _stopword_set(path: str | None) -> set[str]:
    return load_stopwords(path) if path else default_stopwords()


def cmd_ingest(cfg: dict) -> int:
    records = read_raw_jsonl(cfg["input"])
    if not records:
        raise DataError(f"{cfg['input']}: no input records")
    stopwords = _stopword_set(cfg["stopwords"])
    corpus = filter_corpus(records, stopwords)
    write_clean_jsonl(corpus.tweets, cfg["out"])
    labels = select_top_labels(corpus, cfg["top_n"], cfg["min_tweets"])
    labels_path = cfg["labels_out"] or _derived_path(cfg["out"], "labels.json")
    report_path = cfg["report_out"] or _derived_path(cfg["out"], "report.json")
    _write_json(
        labels_path,
        {
            "config": cfg,
            "labels": labels,
            "counts": {label: corpus.label_counts[label] for label in labels},
        },
    )
    _write_json(
        report_path,
        {
            "config": cfg,
            "n_input": corpus.n_input,
            "n_kept": len(corpus.tweets),
            "drops": corpus.drop_counts,
            "n_labels": len(labels),
        },
    )
    if cfg["emb_corpus"]:
        with open(cfg["emb_corpus"], "w", encoding="utf-8") as fh:
            for obj in records:
                try:
                    record = parse_raw_record(obj)
                    if record.lang != "en":
                        continue
                    tokens = minimal_tokens(normalize_raw(record))
                except DataError:
                    continue
                if tokens:
                    fh.write(" ".join(tokens) + "\n")
    drops = " ".join(f"{k}={v}" for k, v in sorted(corpus.drop_counts.items()))
    print(f"kept {len(corpus.tweets)} of {corpus.n_input} tweets -> {cfg['out']}")
    print(f"drops: {drops}")
    print(f"labels: {len(labels)} -> {labels_path}")
    return 0


def cmd_train_embeddings(cfg: dict) -> int:
    with open(cfg["corpus"], "r", encoding="utf-8") as fh:
        sentences = [line.split() for line in fh if line.split()]
    vocab = build_vocab(sentences, min_count=cfg["min_count"])
    config = SgnsConfig(
        dim=cfg["dim"],
        window=cfg["window"],
        negatives=cfg["negatives"],
        epochs=cfg["epochs"],
        learning_rate=cfg["lr"],
        min_count=cfg["min_count"],
        seed=cfg["seed"],
        subsample_threshold=cfg["subsample"],
    )
    emb, losses = train_sgns(sentences, vocab, config)
    save_embeddings(emb, vocab, cfg["out"])
    print(
        json.dumps(
            {
                "command": "train-embeddings",
                "config": cfg,
                "vocab_size": len(vocab),
                "epoch_losses": losses,
            },
            sort_keys=True,
        )
    )
    return 0


def _train_spec(cfg: dict, seed: int = 0) -> TrainSpec:
    return TrainSpec(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        seed=seed,
        learning_rate=cfg["lr"],
        hidden_units=cfg["hidden"],
    )


def cmd_train_baseline(cfg: dict) -> int:
    dataset = _load_dataset(cfg)
    vocab, emb = load_embeddings(cfg["embeddings"])
    model = train_baseline(dataset, vocab, emb, _train_spec(cfg, seed=cfg["seed"]))
    save_baseline_bundle(model, cfg["out"], cfg["embeddings"], config=cfg)
    print(
        json.dumps(
            {
                "command": "train-baseline",
                "config": cfg,
                "n_examples": len(dataset.examples),
                "n_labels": len(dataset.label_set),
                "final_loss": model.loss_history[-1],
            },
            sort_keys=True,
        )
    )
    return 0


def _grid_config(cfg: dict, setting: str) -> ZslExperimentConfig:
    if setting == "fsl":
        if cfg["shots"] is not None:
            shots_min = shots_max = cfg["shots"]
        else:
            shots_min, shots_max = cfg["shots_min"], cfg["shots_max"]
    else:
        shots_min, shots_max = 0, 0
    return ZslExperimentConfig(
        splits=_parse_pair_list(cfg["splits"]),
        methods=tuple(_parse_str_list(cfg["methods"])),
        setting=setting,
        seeds=tuple(_parse_int_list(cfg["seeds"])),
        ks=tuple(_parse_int_list(cfg["ks"])),
        gamma=cfg["gamma"],
        conse_T=cfg["conse_t"],
        shots_min=shots_min,
        shots_max=shots_max,
        train=_train_spec(cfg),
        dem_train=TrainSpec(
            epochs=cfg["dem_epochs"],
            batch_size=cfg["dem_batch_size"],
            learning_rate=cfg["dem_lr"],
        ),
    )


def _fit_bundle(dataset, vocab, emb, zconfig: ZslExperimentConfig, method, seed) -> ZslBundle:
    from .embedding import label_embedding
    from .evaluate import _one_hot
    from .supervised import extract_features_batch
    from .zsl import AttributeMatrix

    import numpy as np

    n_seen, n_unseen = zconfig.splits[0]
    split = make_split(dataset.label_set, n_seen, n_unseen, seed)
    seen_set = subset_by_labels(dataset, split.seen)
    if zconfig.setting == "fsl":
        train_set, _ = fsl_augment(
            seen_set,
            subset_by_labels(dataset, split.unseen),
            shots_min=zconfig.shots_min,
            shots_max=zconfig.shots_max,
            seed=seed,
        )
    else:
        train_set = seen_set
    classifier = train_baseline(train_set, vocab, emb, replace(zconfig.train, seed=seed))
    if method == "conse":
        head = make_conse(classifier, vocab, emb, T=zconfig.conse_T)
    elif method == "eszsl":
        X = extract_features_batch(
            classifier, [tokens for tokens, _ in train_set.examples]
        ).T
        Y = _one_hot([label for _, label in train_set.examples], train_set.label_set)
        A = AttributeMatrix.from_labels(train_set.label_set, vocab, emb)
        head = eszsl_fit(X, Y, A.matrix, zconfig.gamma)
    else:
        feats = extract_features_batch(
            classifier, [tokens for tokens, _ in train_set.examples]
        )
        S = np.stack(
            [label_embedding(label, vocab, emb) for _, label in train_set.examples]
        )
        head = dem_fit(feats, S, replace(zconfig.dem_train, seed=seed))
    return ZslBundle(method=method, classifier=classifier, head=head, split=split)


def _cmd_grid(cfg: dict, setting: str) -> int:
    dataset = _load_dataset(cfg)
    vocab, emb = load_embeddings(cfg["embeddings"])
    zconfig = _grid_config(cfg, setting)
    result = run_zsl_experiment(dataset, vocab, emb, zconfig)
    result["invocation"] = cfg
    print(json.dumps(result, sort_keys=True))
    print()
    print(format_zsl_table(result))
    if cfg["out"]:
        _write_json(cfg["out"], result)
    if cfg["save_bundle"]:
        if (
            len(zconfig.splits) != 1
            or len(zconfig.methods) != 1
            or len(zconfig.seeds) != 1
        ):
            raise UsageError(
                "--save-bundle needs exactly one split, one method, and one seed"
            )
        bundle = _fit_bundle(
            dataset, vocab, emb, zconfig, zconfig.methods[0], zconfig.seeds[0]
        )
        save_zsl_bundle(bundle, cfg["save_bundle"], cfg["embeddings"], config=cfg)
    return 0


def cmd_eval(cfg: dict) -> int:
    dataset = _load_dataset(cfg)
    vocab, emb = load_embeddings(cfg["embeddings"])
    config = SupervisedExperimentConfig(
        folds=cfg["folds"],
        seed=cfg["seed"],
        averaging=cfg["averaging"],
        train=_train_spec(cfg, seed=cfg["seed"]),
    )
    result = run_supervised_experiment(dataset, vocab, emb, config)
    result["invocation"] = cfg
    print(json.dumps(result, sort_keys=True))
    print()
    print(format_supervised_table(result))
    if cfg["out"]:
        _write_json(cfg["out"], result)
    return 0


def cmd_recommend(cfg: dict) -> int:
    bundle = load_zsl_bundle(cfg["bundle"])
    if cfg["candidates"]:
        candidates = _parse_str_list(cfg["candidates"])
    elif bundle.split is not None:
        candidates = bundle.split.unseen
    else:
        raise UsageError(
            "no candidates: pass --candidates or use a bundle with a recorded split"
        )
    body, _ = extract_hashtags(clean_text(cfg["text"], _stopword_set(cfg["stopwords"])))
    prediction = recommend(bundle, body, candidates, cfg["k"])
    print(
        json.dumps(
            [{"label": label, "score": score} for label, score in prediction.ranked],
            sort_keys=True,
        )
    )
    for rank, (label, score) in enumerate(prediction.ranked, start=1):
        print(f"{rank}. {label}  {score:.6f}")
    if prediction.all_oov:
        print("note: no token of the text is in the model vocabulary", file=sys.stderr)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "train-embeddings": cmd_train_embeddings,
    "train-baseline": cmd_train_baseline,
    "zsl": lambda cfg: _cmd_grid(cfg, "zsl"),
    "fsl": lambda cfg: _cmd_grid(cfg, "fsl"),
    "eval": cmd_eval,
    "recommend": cmd_recommend,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (see --help)")
        return _COMMANDS[args.command](resolve_config(args))
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: dataset plumbing, training, decoding, evaluation.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources

from . import decode as dec
from . import models
from .corpus import (
    apply_split_tags,
    assemble_reconstruction_input,
    build_vocabulary,
    parse_dataset,
    parse_split_file,
    serialize_dataset,
    serialize_split_tags,
    split_dataset,
)
from .errors import (
    CheckpointError,
    ConfigError,
    ProtoreconError,
    SchemaError,
    VocabularyError,
)
from .experiment import (
    DEFAULT_K_RANGE,
    DEFAULT_LAMBDA_RANGE,
    ExperimentConfig,
    grid_search,
    run_experiment,
)
from .metrics import FeatureTable, bundled_feature_table, evaluate
from .rerank import ReflexCache, RerankConfig, reconstruct_reranked, format_rerank_tsv
from .stats import compare, pearson_correlation, significant
from .analysis import (
    ErrorItem,
    RerankBehavior,
    behavior_distribution,
    categorize,
    per_language_error_rates,
    similarity_comparison_table,
)

DATA_ERRORS = (SchemaError, VocabularyError, CheckpointError, OSError)


def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def _write(path, text):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _emit(text, out=None):
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def _load_dataset(args, require_split=False):
    ds = parse_dataset(_read(args.dataset), tokenize=getattr(args, "tokenize", "whitespace"))
    split = getattr(args, "split", None)
    if split:
        ds = apply_split_tags(ds, parse_split_file(_read(split)))
    elif require_split:
        ds = split_dataset(ds, (0.7, 0.1, 0.2), getattr(args, "split_seed", 0))
    return ds


def load_preset(name: str) -> dict:
    """Load a bundled hyperparameter preset by name, or a JSON file by path."""
    if os.path.exists(name):
        return json.loads(_read(name))
    try:
        text = (resources.files("protorecon") / "presets" / f"{name}.json").read_text("utf-8")
    except FileNotFoundError:
        available = sorted(
            p.name[:-5]
            for p in (resources.files("protorecon") / "presets").iterdir()
            if p.name.endswith(".json")
        )
        raise ConfigError(f"unknown preset {name!r}; available: {available}") from None
    return json.loads(text)


def _model_config(args, kind: str):
    cls = models.ReconModelConfig if kind == "recon" else models.ReflexModelConfig
    fields = {f.name for f in dataclasses.fields(cls)}
    values = {}
    if getattr(args, "preset", None):
        preset = load_preset(args.preset)
        unknown = set(preset) - fields
        if unknown:
            raise ConfigError(f"preset has fields not valid for a {kind} model: {sorted(unknown)}")
        values.update(preset)
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return cls(**values)


def _feature_table(args):
    path = getattr(args, "feature_table", None)
    if path is None:
        return None
    if path == "bundled":
        return bundled_feature_table()
    return FeatureTable.from_tsv(_read(path))


def _load_model(path, expect=None):
    model = models.load_checkpoint(path)
    if expect is not None and not isinstance(model, expect):
        raise ConfigError(f"checkpoint {path} holds a {type(model).__name__}, "
                          f"expected {expect.__name__}")
    return model


def _parse_predictions(text):
    """id -> token tuple from a two-column TSV (comment lines ignored)."""
    preds = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise SchemaError(f"prediction rows need 2 tab-separated columns: {line!r}")
        preds[parts[0]] = tuple(parts[1].split())
    return preds


def _float_range(text):
    values = tuple(float(v) for v in text.split(","))
    if not values:
        raise ConfigError("empty range")
    return values


def _int_range(text):
    return tuple(int(v) for v in text.split(","))


# --- subcommand handlers ---


def cmd_ingest(args):
    ds = _load_dataset(args)
    _emit(serialize_dataset(ds), args.out)
    print(f"{len(ds.sets)} cognate sets, {len(ds.languages)} languages", file=sys.stderr)


def cmd_split(args):
    ds = parse_dataset(_read(args.dataset), tokenize=args.tokenize)
    ratios = tuple(args.ratios)
    ds = split_dataset(ds, ratios, args.seed)
    _emit(serialize_split_tags(ds.split_tags), args.out)


def _cmd_train(args, kind):
    ds = _load_dataset(args, require_split=True)
    vocab = build_vocabulary(ds)
    config = _model_config(args, kind)
    model = models.new_model(kind, config, vocab)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    model = models.train(model, ds, log=log)
    model.save(args.out)
    print(f"saved {kind} checkpoint to {args.out}", file=sys.stderr)


def cmd_train_recon(args):
    _cmd_train(args, "recon")


def cmd_train_reflex(args):
    _cmd_train(args, "reflex")


def cmd_decode(args):
    model = _load_model(args.checkpoint, models.ReconModel)
    ds = parse_dataset(_read(args.dataset), tokenize=args.tokenize)
    cfg = dec.BeamConfig(
        k=args.beam_size,
        alpha=model.config.alpha if args.alpha is None else args.alpha,
        max_len=args.max_len or model.max_decode_len,
    )
    lines = ["id\trank\tcandidate\tm"]
    for cset in ds.sets:
        ids = assemble_reconstruction_input(cset, model.vocab)
        for rank, cand in enumerate(dec.beam_search(model.decoder(ids), cfg)):
            lines.append(f"{cset.id}\t{rank}\t"
                         f"{' '.join(model.vocab.decode(cand.tokens))}\t{cand.m:.6f}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_rerank(args):
    recon = _load_model(args.recon_checkpoint, models.ReconModel)
    reflex = _load_model(args.reflex_checkpoint, models.ReflexModel)
    ds = parse_dataset(_read(args.dataset), tokenize=args.tokenize)
    lam = 0.0 if args.ablation == "no-reranker" else args.lam
    cfg = RerankConfig(
        lam=lam,
        k=args.beam_size,
        alpha=recon.config.alpha if args.alpha is None else args.alpha,
        max_len=args.max_len or recon.max_decode_len,
    )
    cache = ReflexCache()
    summary = ["id\treranked_top\ts"]
    for cset in ds.sets:
        top, reranked, _, preds = reconstruct_reranked(recon, reflex, cset, cfg, cache=cache)
        if args.out:
            _write(os.path.join(args.out, f"{cset.id}.tsv"),
                   format_rerank_tsv(cset, reranked, preds, recon.vocab))
        summary.append(f"{cset.id}\t{' '.join(recon.vocab.decode(top.tokens))}\t{top.s:.6f}")
    text = "\n".join(summary) + "\n"
    if args.out:
        _write(os.path.join(args.out, "summary.tsv"), text)
    else:
        sys.stdout.write(text)


def cmd_eval(args):
    ds = parse_dataset(_read(args.dataset), tokenize=args.tokenize)
    preds = _parse_predictions(_read(args.predictions))
    table = _feature_table(args)
    predicted, golds = [], []
    for cset in ds.sets:
        if cset.protoform is None:
            continue
        if cset.id not in preds:
            raise SchemaError(f"no prediction for cognate set {cset.id!r}")
        predicted.append(preds[cset.id])
        golds.append(tuple(cset.protoform))
    report = evaluate(predicted, golds, table)
    _emit(report.as_tsv_row(), args.out)


def cmd_gridsearch(args):
    recon = _load_model(args.recon_checkpoint, models.ReconModel)
    reflex = _load_model(args.reflex_checkpoint, models.ReflexModel)
    ds = _load_dataset(args, require_split=True)
    result = grid_search(
        recon, reflex, ds.subset("val"),
        k_range=args.k_range, lambda_range=args.lambda_range,
        alpha=args.alpha,
    )
    lines = ["k\tlambda\taccuracy"]
    for (k, lam), acc in sorted(result.grid.items()):
        lines.append(f"{k}\t{lam:g}\t{acc:.4f}")
    lines.append(f"# best\t{result.k}\t{result.lam:g}")
    _emit("\n".join(lines) + "\n", args.out)
    print(f"best k={result.k} lambda={result.lam:g}", file=sys.stderr)


def _read_column(path):
    values = []
    for line in _read(path).splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            values.append(float(line.split("\t")[-1]))
    return values


def cmd_compare(args):
    x, y = _read_column(args.a), _read_column(args.b)
    result = compare(x, y, alternative=args.alternative, n_resamples=args.resamples,
                     level=args.level, seed=args.seed or 0)
    verdict = significant(result, alpha=args.alpha_level)
    _emit(
        "p_value\tci_low\tci_high\tsignificant\n"
        f"{result.p_value:.6g}\t{result.ci_low:.6g}\t{result.ci_high:.6g}\t{verdict}\n",
        args.out,
    )


def cmd_correlate(args):
    x, y = _read_column(args.a), _read_column(args.b)
    r = pearson_correlation(x, y)
    _emit(f"pearson_r\n{r:.6f}\n", args.out)


def cmd_analyze(args):
    recon = _load_model(args.recon_checkpoint, models.ReconModel)
    reflex = _load_model(args.reflex_checkpoint, models.ReflexModel)
    ds = parse_dataset(_read(args.dataset), tokenize=args.tokenize)
    table = _feature_table(args)
    cfg = RerankConfig(
        lam=args.lam, k=args.beam_size,
        alpha=recon.config.alpha if args.alpha is None else args.alpha,
        max_len=args.max_len or recon.max_decode_len,
    )
    cache = ReflexCache()
    records, error_items, rate_items = [], [], []
    for cset in ds.sets:
        if cset.protoform is None:
            continue
        top, reranked, beam, _ = reconstruct_reranked(recon, reflex, cset, cfg, cache=cache)
        gold_ids = tuple(recon.vocab.encode(cset.protoform))
        record = categorize(beam, reranked, gold_ids)
        records.append(record)
        rate_items.append((cset, record.behavior))
        if top.tokens != gold_ids:
            error_items.append(ErrorItem(cset=cset, predicted=recon.vocab.decode(top.tokens),
                                         gold=tuple(cset.protoform), behavior=record.behavior))
    os.makedirs(args.out, exist_ok=True)

    dist = behavior_distribution(records)
    lines = ["category\tcount\tpercent"]
    for b in RerankBehavior:
        c = dist["counts"][b]
        lines.append(f"{b.value}\t{c}\t{100 * c / dist['total']:.2f}")
    ratio = dist["improved_over_changed"]
    lines.append(f"Improved/Changed\t-\t{'-' if ratio is None else f'{100 * ratio:.2f}'}")
    _write(os.path.join(args.out, "behavior.tsv"), "\n".join(lines) + "\n")

    if table is not None:
        sim = similarity_comparison_table(error_items, table)
        lines = ["category\tn\tpct_pred_closer_d_t\tpct_pred_closer_d_f"]
        for b in RerankBehavior:
            row = sim[b]
            dt = "-" if row["d_t"] is None else f"{100 * row['d_t']:.2f}"
            df = "-" if row["d_f"] is None else f"{100 * row['d_f']:.2f}"
            lines.append(f"{b.value}\t{row['count']}\t{dt}\t{df}")
        _write(os.path.join(args.out, "similarity.tsv"), "\n".join(lines) + "\n")

    rates = per_language_error_rates(reflex, rate_items)
    langs = [lang for lang in ds.languages if any(lang in g for g in rates.values())]
    lines = ["category\t" + "\t".join(langs)]
    for group in list(RerankBehavior) + ["overall"]:
        if group not in rates:
            continue
        name = group if group == "overall" else group.value
        lines.append(name + "\t" + "\t".join(
            f"{100 * rates[group][lang]:.2f}" if lang in rates[group] else "-" for lang in langs
        ))
    _write(os.path.join(args.out, "error_rates.tsv"), "\n".join(lines) + "\n")
    print(f"analysis written to {args.out}", file=sys.stderr)


def cmd_run(args):
    seeds = tuple(range(args.seeds)) if args.seed is None else (args.seed,)
    recon_kwargs, reflex_kwargs = {}, {}
    if args.preset:
        recon_kwargs = load_preset(args.preset)
    if args.reflex_preset:
        reflex_kwargs = load_preset(args.reflex_preset)
    config = ExperimentConfig(
        dataset_path=args.dataset,
        out_dir=args.out,
        recon_config=models.ReconModelConfig(**recon_kwargs),
        reflex_config=models.ReflexModelConfig(**reflex_kwargs),
        seeds=seeds,
        beam_size=args.beam_size,
        lam=args.lam,
        alpha=args.alpha,
        split_path=args.split,
        tokenize=args.tokenize,
        feature_table_path=args.feature_table,
        ablation_no_reranker=args.ablation == "no-reranker",
    )
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    results, failures = run_experiment(config, log=log)
    for seed in sorted(results):
        acc = results[seed]["ACC"]
        print(f"seed {seed}: ACC={acc:.4f}", file=sys.stderr)
    for seed, msg in failures.items():
        print(f"seed {seed} FAILED: {msg}", file=sys.stderr)


# --- parser wiring ---


def _add_common(p, dataset=True, tokenize=True, out_required=False):
    if dataset:
        p.add_argument("--dataset", required=True, help="cognate-set TSV")
    if tokenize:
        p.add_argument("--tokenize", choices=("whitespace", "codepoint"),
                       default="whitespace", help="token segmentation of cells")
    p.add_argument("--out", required=out_required, default=None, help="output path")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="protorecon",
        description="Protoform reconstruction with reflex-prediction reranking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, validate, and canonicalize a dataset")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="assign train/val/test tags")
    _add_common(p)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.7, 0.1, 0.2),
                   metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    for name, fn, help_text in (
        ("train-recon", cmd_train_recon, "train the reconstruction model"),
        ("train-reflex", cmd_train_reflex, "train the reflex-prediction model"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p, out_required=True)
        p.add_argument("--split", default=None, help="split-tag TSV (default: seeded 70/10/20)")
        p.add_argument("--split-seed", type=int, default=0)
        p.add_argument("--preset", default=None, help="bundled preset name or JSON path")
        p.add_argument("--seed", type=int, default=None, help="override the preset seed")
        p.add_argument("--verbose", action="store_true")
        p.set_defaults(func=fn)

    p = sub.add_parser("decode", help="beam-search protoform candidates")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--beam-size", type=int, default=10)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("rerank", help="beam search plus reflex-prediction reranking")
    _add_common(p)
    p.add_argument("--recon-checkpoint", required=True)
    p.add_argument("--reflex-checkpoint", required=True)
    p.add_argument("--beam-size", type=int, default=10)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--ablation", choices=("no-reranker",), default=None)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", help="score predictions against gold protoforms")
    _add_common(p)
    p.add_argument("--predictions", required=True, help="TSV of id, predicted tokens")
    p.add_argument("--feature-table", default=None,
                   help="feature TSV path, or 'bundled' (enables FER)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch", help="search beam size and lambda on the val split")
    _add_common(p)
    p.add_argument("--recon-checkpoint", required=True)
    p.add_argument("--reflex-checkpoint", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--k-range", type=_int_range, default=DEFAULT_K_RANGE,
                   help="comma-separated beam sizes")
    p.add_argument("--lambda-range", type=_float_range, default=DEFAULT_LAMBDA_RANGE,
                   help="comma-separated lambda values")
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("compare", help="rank-sum test plus bootstrap CI on two score files")
    p.add_argument("--a", required=True, help="scores of system A (one value per line)")
    p.add_argument("--b", required=True, help="scores of system B")
    p.add_argument("--alternative", choices=("greater", "less", "two-sided"),
                   default="greater")
    p.add_argument("--alpha-level", type=float, default=0.01)
    p.add_argument("--level", type=float, default=0.99, help="CI level")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("correlate", help="Pearson correlation between two score files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("analyze", help="categorize reranking behavior and error patterns")
    _add_common(p, out_required=True)
    p.add_argument("--recon-checkpoint", required=True)
    p.add_argument("--reflex-checkpoint", required=True)
    p.add_argument("--beam-size", type=int, default=10)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--feature-table", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="train, decode, rerank, evaluate across seeds")
    _add_common(p, out_required=True)
    p.add_argument("--preset", default=None, help="reconstruction-model preset")
    p.add_argument("--reflex-preset", default=None, help="reflex-model preset")
    p.add_argument("--split", default=None)
    p.add_argument("--seed", type=int, default=None, help="run one specific seed")
    p.add_argument("--seeds", type=int, default=1, help="run seeds 0..N-1")
    p.add_argument("--beam-size", type=int, default=10)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--feature-table", default=None)
    p.add_argument("--ablation", choices=("no-reranker",), default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ProtoreconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: grid search for (k, lambda) and seeded pipelines."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import decode as dec
from . import models
from .corpus import (
    Dataset,
    assemble_reconstruction_input,
    build_vocabulary,
    split_dataset,
)
from .errors import ConfigError, ProtoreconError
from .metrics import FeatureTable, evaluate
from .rerank import ReflexCache, RerankConfig, reflex_accuracy, rerank
from .analysis import (
    BehaviorRecord,
    ErrorItem,
    RerankBehavior,
    behavior_distribution,
    categorize,
    per_language_error_rates,
    similarity_comparison_table,
)

DEFAULT_K_RANGE = (2, 4, 6, 8, 10)
DEFAULT_LAMBDA_RANGE = tuple(round(0.3 * i, 10) for i in range(1, 15))  # 0.3 .. 4.2


@dataclass(frozen=True)
class GridResult:
    k: int
    lam: float
    grid: dict  # (k, lam) -> validation accuracy


def _beam_for_sets(recon_model, csets, k, alpha, max_len):
    out = []
    for cset in csets:
        ids = assemble_reconstruction_input(cset, recon_model.vocab)
        stepper = recon_model.decoder(ids)
        out.append(dec.beam_search(stepper, dec.BeamConfig(k=k, alpha=alpha, max_len=max_len)))
    return out


def grid_search(
    recon_model,
    reflex_model,
    val_dataset: Dataset,
    k_range=DEFAULT_K_RANGE,
    lambda_range=DEFAULT_LAMBDA_RANGE,
    alpha=None,
    max_len=None,
):
    """Reranked validation accuracy over the (k, lambda) grid.

    Beam search runs once per cognate set at max(k_range); smaller k reuse
    the truncated candidate list.  Ties prefer smaller k, then smaller
    lambda.
    """
    csets = [cs for cs in val_dataset.sets if cs.protoform is not None]
    if not csets:
        raise ProtoreconError("empty validation split")
    alpha = recon_model.config.alpha if alpha is None else alpha
    max_len = recon_model.max_decode_len if max_len is None else max_len
    k_max = max(k_range)
    beams = _beam_for_sets(recon_model, csets, k_max, alpha, max_len)
    cache = ReflexCache()
    r_values = []
    golds = []
    for cset, beam in zip(csets, beams):
        r_values.append(
            [reflex_accuracy(reflex_model, c.tokens, cset, cache=cache)[0] for c in beam]
        )
        golds.append(tuple(recon_model.vocab.encode(cset.protoform)))

    grid = {}
    best = None
    for k in sorted(k_range):
        for lam in sorted(lambda_range):
            correct = 0
            for beam, rv, gold in zip(beams, r_values, golds):
                reranked = rerank(beam[:k], rv[:k], lam)
                correct += reranked[0].tokens == gold
            acc = correct / len(csets)
            grid[(k, lam)] = acc
            if best is None or acc > best[0]:
                best = (acc, k, lam)
    return GridResult(k=best[1], lam=best[2], grid=grid)


def average_grid_results(results) -> tuple[int, float]:
    """Average (k, lambda) across model pairs; k rounds half-up to an integer."""
    ks = [r.k for r in results]
    lams = [r.lam for r in results]
    k_avg = int(np.floor(np.mean(ks) + 0.5))
    return k_avg, float(np.mean(lams))


@dataclass
class ExperimentConfig:
    dataset_path: str
    out_dir: str
    recon_config: models.ReconModelConfig = field(default_factory=models.ReconModelConfig)
    reflex_config: models.ReflexModelConfig = field(default_factory=models.ReflexModelConfig)
    seeds: tuple[int, ...] = (0,)
    beam_size: int = 5
    lam: float = 1.0
    alpha: float | None = None  # default: recon config's alpha
    split_seed: int = 0
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    split_path: str | None = None
    tokenize: str = "whitespace"
    feature_table_path: str | None = None
    ablation_no_reranker: bool = False

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")

    def config_hash(self) -> str:
        def enc(obj):
            if dataclasses.is_dataclass(obj):
                return dataclasses.asdict(obj)
            raise TypeError(str(type(obj)))

        fields = dataclasses.asdict(self)
        fields.pop("out_dir")  # where results land does not identify the run
        payload = json.dumps(fields, sort_keys=True, default=enc)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _write(path, header_line, body):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(header_line)
        f.write(body)


def run_seed(config: ExperimentConfig, dataset: Dataset, seed: int, table: FeatureTable | None,
             log=None):
    """Train, decode, rerank, and evaluate one seed; writes per-seed artifacts.

    Returns a dict of metric name -> value for aggregation.
    """
    vocab = build_vocabulary(dataset)
    stamp = f"# config={config.config_hash()} seed={seed}\n"
    seed_dir = os.path.join(config.out_dir, f"seed{seed}")
    os.makedirs(seed_dir, exist_ok=True)

    recon_cfg = dataclasses.replace(config.recon_config, seed=seed)
    reflex_cfg = dataclasses.replace(config.reflex_config, seed=seed)
    recon = models.train(models.ReconModel(recon_cfg, vocab), dataset, log=log)
    reflex = models.train(models.ReflexModel(reflex_cfg, vocab), dataset, log=log)
    recon.save(os.path.join(seed_dir, "recon.ckpt"))
    reflex.save(os.path.join(seed_dir, "reflex.ckpt"))

    alpha = recon_cfg.alpha if config.alpha is None else config.alpha
    lam = 0.0 if config.ablation_no_reranker else config.lam
    test = dataset.subset("test")
    csets = [cs for cs in test.sets if cs.protoform is not None]
    beams = _beam_for_sets(recon, csets, config.beam_size, alpha, recon.max_decode_len)
    cache = ReflexCache()

    rows = ["id\tgold\tbeam_top\treranked_top\tm\tr\ts\tbehavior"]
    beam_preds, rerank_preds, golds = [], [], []
    error_items, behavior_records, rate_items = [], [], []
    for cset, beam in zip(csets, beams):
        rv = [reflex_accuracy(reflex, c.tokens, cset, cache=cache)[0] for c in beam]
        reranked = rerank(beam, rv, lam)
        gold_ids = tuple(vocab.encode(cset.protoform))
        top = reranked[0]
        beam_preds.append(beam[0].tokens)
        rerank_preds.append(top.tokens)
        golds.append(gold_ids)
        record = categorize(beam, reranked, gold_ids)
        behavior_records.append(record)
        rate_items.append((cset, record.behavior))
        if top.tokens != gold_ids:
            error_items.append(
                ErrorItem(
                    cset=cset,
                    predicted=vocab.decode(top.tokens),
                    gold=cset.protoform,
                    behavior=record.behavior,
                )
            )
        rows.append(
            "\t".join(
                [
                    cset.id,
                    " ".join(cset.protoform),
                    " ".join(vocab.decode(beam[0].tokens)),
                    " ".join(vocab.decode(top.tokens)),
                    f"{top.m:.6f}",
                    f"{top.r:.4f}",
                    f"{top.s:.6f}",
                    record.behavior.value,
                ]
            )
        )
    _write(os.path.join(seed_dir, "predictions.tsv"), stamp, "\n".join(rows) + "\n")

    gold_strs = [tuple(cs.protoform) for cs in csets]
    rerank_strs = [vocab.decode(p) for p in rerank_preds]
    beam_strs = [vocab.decode(p) for p in beam_preds]
    report = evaluate(rerank_strs, gold_strs, table)
    beam_report = evaluate(beam_strs, gold_strs, table)
    _write(os.path.join(seed_dir, "metrics.tsv"), stamp, report.as_tsv_row())
    _write(os.path.join(seed_dir, "metrics_beam_only.tsv"), stamp, beam_report.as_tsv_row())

    dist = behavior_distribution(behavior_records)
    lines = ["category\tcount\tpercent"]
    for b in RerankBehavior:
        c = dist["counts"][b]
        lines.append(f"{b.value}\t{c}\t{100 * c / dist['total']:.2f}")
    ratio = dist["improved_over_changed"]
    lines.append(f"Improved/Changed\t-\t{'-' if ratio is None else f'{100 * ratio:.2f}'}")
    _write(os.path.join(seed_dir, "behavior.tsv"), stamp, "\n".join(lines) + "\n")

    if table is not None:
        sim = similarity_comparison_table(error_items, table)
        lines = ["category\tn\tpct_pred_closer_d_t\tpct_pred_closer_d_f"]
        for b in RerankBehavior:
            row = sim[b]
            dt = "-" if row["d_t"] is None else f"{100 * row['d_t']:.2f}"
            df = "-" if row["d_f"] is None else f"{100 * row['d_f']:.2f}"
            lines.append(f"{b.value}\t{row['count']}\t{dt}\t{df}")
        _write(os.path.join(seed_dir, "similarity.tsv"), stamp, "\n".join(lines) + "\n")

    rates = per_language_error_rates(reflex, rate_items)
    langs = [lang for lang in dataset.languages
             if any(lang in group for group in rates.values())]
    lines = ["category\t" + "\t".join(langs)]
    for group in list(RerankBehavior) + ["overall"]:
        if group not in rates:
            continue
        name = group if group == "overall" else group.value
        cells = [f"{100 * rates[group][lang]:.2f}" if lang in rates[group] else "-"
                 for lang in langs]
        lines.append(f"{name}\t" + "\t".join(cells))
    _write(os.path.join(seed_dir, "error_rates.tsv"), stamp, "\n".join(lines) + "\n")

    return {
        "ACC": report.acc,
        "TED": report.ted,
        "TER": report.ter,
        "FER": report.fer,
        "BCFS": report.bcfs,
        "beam_ACC": beam_report.acc,
    }


def run_experiment(config: ExperimentConfig, log=None):
    """Full pipeline over every seed plus a mean +- std aggregate report."""
    from .corpus import apply_split_tags, parse_dataset, parse_split_file

    with open(config.dataset_path, encoding="utf-8") as f:
        dataset = parse_dataset(f.read(), tokenize=config.tokenize)
    if config.split_path:
        with open(config.split_path, encoding="utf-8") as f:
            dataset = apply_split_tags(dataset, parse_split_file(f.read()))
    else:
        dataset = split_dataset(dataset, config.split_ratios, config.split_seed)
    table = None
    if config.feature_table_path:
        with open(config.feature_table_path, encoding="utf-8") as f:
            table = FeatureTable.from_tsv(f.read())
    os.makedirs(config.out_dir, exist_ok=True)
    stamp = f"# config={config.config_hash()} seeds={','.join(map(str, config.seeds))}\n"

    results = {}
    failures = {}
    for seed in config.seeds:
        try:
            results[seed] = run_seed(config, dataset, seed, table, log=log)
        except ProtoreconError as exc:  # other seeds proceed
            failures[seed] = str(exc)
            if log:
                log(f"seed {seed} failed: {exc}")
    if not results:
        raise ProtoreconError(f"all seeds failed: {failures}")

    metric_names = ["ACC", "TED", "TER", "FER", "BCFS", "beam_ACC"]
    lines = ["seed\t" + "\t".join(metric_names)]
    for seed in sorted(results):
        row = results[seed]
        lines.append(
            str(seed)
            + "\t"
            + "\t".join("-" if row[m] is None else f"{row[m]:.4f}" for m in metric_names)
        )
    for stat_name, fn in (("mean", np.mean), ("std", np.std)):
        cells = []
        for m in metric_names:
            vals = [results[s][m] for s in results if results[s][m] is not None]
            cells.append(f"{fn(vals):.4f}" if vals else "-")
        lines.append(stat_name + "\t" + "\t".join(cells))
    _write(os.path.join(config.out_dir, "aggregate.tsv"), stamp, "\n".join(lines) + "\n")
    return results, failures

"""Post hoc reranking error analysis: behavior categories, similarity, error rates."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import decode as dec
from .corpus import CognateSet, assemble_reflex_input
from .errors import ProtoreconError
from .metrics import FeatureTable, feature_edit_distance, token_edit_distance


class RerankBehavior(Enum):
    IMPROVED = "Improved"
    WORSENED = "Worsened"
    UNCHANGED = "Unchanged"
    NOT_IN = "Not-in"


@dataclass(frozen=True)
class BehaviorRecord:
    behavior: RerankBehavior
    beam_rank_of_gold: int | None
    rerank_rank_of_gold: int | None


@dataclass(frozen=True)
class SimilarityRecord:
    """Mean tone-stripped distances from one form to a set of reflexes."""

    d_t: float  # normalized token edit distance
    d_f: float  # normalized feature edit distance


def categorize(beam_candidates, reranked, gold_tokens) -> BehaviorRecord:
    """Locate the gold protoform in the beam list and compare its two ranks."""
    gold = tuple(gold_tokens)
    beam_rank = next(
        (i for i, c in enumerate(beam_candidates) if tuple(c.tokens) == gold), None
    )
    if beam_rank is None:
        return BehaviorRecord(RerankBehavior.NOT_IN, None, None)
    rerank_rank = next(
        rc.rerank_rank for rc in reranked if rc.beam_rank == beam_rank
    )
    if rerank_rank < beam_rank:
        behavior = RerankBehavior.IMPROVED
    elif rerank_rank > beam_rank:
        behavior = RerankBehavior.WORSENED
    else:
        behavior = RerankBehavior.UNCHANGED
    return BehaviorRecord(behavior, beam_rank, rerank_rank)


def _strip_tones(tokens, table: FeatureTable):
    return [t for t in tokens if not table.is_tone(t)]


def _pair_distance(a, b, dist_fn) -> float:
    """Distance normalized by max length; empty-vs-empty is 0, empty-vs-any is 1."""
    if not a and not b:
        return 0.0
    if not a or not b:
        return 1.0
    return dist_fn(a, b) / max(len(a), len(b))


def similarity_to_reflexes(form, cset: CognateSet, table: FeatureTable) -> SimilarityRecord:
    """Mean normalized token / feature edit distance to the present reflexes.

    Tone-flagged tokens are stripped from the form and every reflex first.
    """
    form_s = _strip_tones(form, table)
    missing = sorted(
        {t for t in form_s if t not in table}
        | {t for seq in cset.reflexes.values() for t in _strip_tones(seq, table) if t not in table}
    )
    if missing:
        raise ProtoreconError(f"tokens missing from feature table: {missing}")
    d_t = d_f = 0.0
    for reflex in cset.reflexes.values():
        reflex_s = _strip_tones(reflex, table)
        d_t += _pair_distance(form_s, reflex_s, token_edit_distance)
        d_f += _pair_distance(form_s, reflex_s, lambda a, b: feature_edit_distance(a, b, table))
    n = len(cset.reflexes)
    return SimilarityRecord(d_t=d_t / n, d_f=d_f / n)


@dataclass(frozen=True)
class ErrorItem:
    """One reranked reconstruction error with its behavior category."""

    cset: CognateSet
    predicted: tuple[str, ...]  # token strings
    gold: tuple[str, ...]
    behavior: RerankBehavior


def similarity_comparison_table(error_items, table: FeatureTable):
    """Per-category fraction of errors where the prediction is strictly closer
    to the reflexes than the gold protoform, by D_T and by D_F separately.

    Returns {behavior: {"d_t": fraction or None, "d_f": ..., "count": n}};
    empty categories report None fractions.
    """
    out = {}
    for behavior in RerankBehavior:
        items = [it for it in error_items if it.behavior == behavior]
        if not items:
            out[behavior] = {"d_t": None, "d_f": None, "count": 0}
            continue
        t_wins = f_wins = 0
        for it in items:
            pred_sim = similarity_to_reflexes(it.predicted, it.cset, table)
            gold_sim = similarity_to_reflexes(it.gold, it.cset, table)
            t_wins += pred_sim.d_t < gold_sim.d_t
            f_wins += pred_sim.d_f < gold_sim.d_f
        out[behavior] = {
            "d_t": t_wins / len(items),
            "d_f": f_wins / len(items),
            "count": len(items),
        }
    return out


def per_language_error_rates(reflex_model, items, max_len=None):
    """Reflex error rates per daughter language, per behavior group and overall.

    items: iterable of (CognateSet, RerankBehavior) with gold protoforms;
    reflexes are decoded from the gold protoform.  Languages absent from
    every item are omitted.
    """
    vocab = reflex_model.vocab
    max_len = reflex_model.max_decode_len if max_len is None else max_len
    counts = {}  # (group, language) -> [errors, total]
    for cset, behavior in items:
        if cset.protoform is None:
            continue
        for language, reflex in cset.reflexes.items():
            tagged = assemble_reflex_input(cset.protoform, language, vocab)
            pred = tuple(dec.greedy_decode(reflex_model.decoder(tagged, language), max_len))
            wrong = pred != tuple(vocab.encode(reflex))
            for group in (behavior, "overall"):
                c = counts.setdefault((group, language), [0, 0])
                c[0] += wrong
                c[1] += 1
    out = {}
    for (group, language), (errors, total) in counts.items():
        out.setdefault(group, {})[language] = errors / total
    return out


def behavior_distribution(records) -> dict:
    """Counts per category plus the Improved/(Improved+Worsened) ratio."""
    counts = {b: 0 for b in RerankBehavior}
    for rec in records:
        counts[rec.behavior] += 1
    changed = counts[RerankBehavior.IMPROVED] + counts[RerankBehavior.WORSENED]
    ratio = counts[RerankBehavior.IMPROVED] / changed if changed else None
    return {"counts": counts, "total": sum(counts.values()), "improved_over_changed": ratio}

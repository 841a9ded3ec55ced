"""Rerank beam candidates by reflex-prediction accuracy.

For each candidate protoform, the reflex model greedily derives the reflex
in every present daughter language; the fraction of exact matches is the
reranker score r, and candidates are reordered by s = m + lambda * r.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from . import decode as dec
from .corpus import CognateSet, assemble_reflex_input
from .errors import ConfigError, ProtoreconError


@dataclass(frozen=True)
class RerankConfig:
    lam: float  # score adjustment weight
    k: int = 10
    alpha: float = 1.0
    max_len: int = 64

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"score adjustment weight must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class RerankedCandidate:
    tokens: tuple[int, ...]
    m: float
    r: float
    s: float
    beam_rank: int
    rerank_rank: int


class ReflexCache:
    """Memo of greedy reflex decodes keyed by (candidate tokens, language).

    Beam lists for neighboring cognate sets often share candidates; one cache
    per worker keeps the reranker pure while avoiding repeated decodes.
    """

    def __init__(self):
        self._memo = {}

    def get(self, key):
        return self._memo.get(key)

    def put(self, key, value):
        self._memo[key] = value


def predict_reflex(reflex_model, candidate_tokens, language, max_len, cache=None):
    """Greedy reflex decode of a candidate protoform into one daughter language."""
    key = (tuple(candidate_tokens), language)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    vocab = reflex_model.vocab
    token_strings = vocab.decode(candidate_tokens)
    tagged = assemble_reflex_input(token_strings, language, vocab)
    pred = tuple(dec.greedy_decode(reflex_model.decoder(tagged, language), max_len))
    if cache is not None:
        cache.put(key, pred)
    return pred


def reflex_accuracy(reflex_model, candidate_tokens, cset: CognateSet, max_len=None, cache=None):
    """Fraction of present reflexes derived exactly from the candidate.

    Returns (r, predictions dict language -> predicted id tuple).  Candidate
    tokens unknown to the reflex model's vocabulary make every decode count
    as incorrect (with a warning) rather than raising.
    """
    if not candidate_tokens:
        raise ProtoreconError("empty candidate protoform")
    if not cset.reflexes:
        raise ProtoreconError(f"cognate set {cset.id!r} has no reflexes")
    vocab = reflex_model.vocab
    max_len = reflex_model.max_decode_len if max_len is None else max_len
    unknown = [t for t in candidate_tokens if not 0 <= t < vocab.size]
    predictions = {}
    if unknown:
        warnings.warn(
            f"candidate contains ids unknown to the reflex vocabulary: {unknown}; "
            "its reflex decodes count as incorrect",
            stacklevel=2,
        )
        correct = 0
        for language in cset.reflexes:
            predictions[language] = ()
    else:
        correct = 0
        for language in cset.reflexes:
            pred = predict_reflex(reflex_model, candidate_tokens, language, max_len, cache)
            predictions[language] = pred
            correct += pred == tuple(vocab.encode(cset.reflexes[language]))
    return correct / len(cset.reflexes), predictions


def rerank(candidates, r_values, lam: float) -> list[RerankedCandidate]:
    """Stable sort by adjusted score s = m + lambda * r, descending."""
    if len(candidates) != len(r_values):
        raise ProtoreconError("candidate / reranker-score count mismatch")
    scored = [
        (cand.m + lam * r, beam_rank, cand, r)
        for beam_rank, (cand, r) in enumerate(zip(candidates, r_values))
    ]
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][0], i))
    return [
        RerankedCandidate(
            tokens=tuple(scored[i][2].tokens),
            m=scored[i][2].m,
            r=scored[i][3],
            s=scored[i][0],
            beam_rank=i,
            rerank_rank=rank,
        )
        for rank, i in enumerate(order)
    ]


def reconstruct_reranked(recon_model, reflex_model, cset: CognateSet, config: RerankConfig,
                         cache=None):
    """Full composition: beam search, score reflexes, rerank.

    Returns (top RerankedCandidate, full reranked list, beam candidates,
    per-candidate reflex predictions keyed by beam rank).
    """
    from .corpus import assemble_reconstruction_input

    input_ids = assemble_reconstruction_input(cset, recon_model.vocab)
    beam = dec.beam_search(
        recon_model.decoder(input_ids),
        dec.BeamConfig(k=config.k, alpha=config.alpha, max_len=config.max_len),
    )
    r_values, all_predictions = [], {}
    for i, cand in enumerate(beam):
        r, preds = reflex_accuracy(reflex_model, cand.tokens, cset, cache=cache)
        r_values.append(r)
        all_predictions[i] = preds
    reranked = rerank(beam, r_values, config.lam)
    return reranked[0], reranked, beam, all_predictions


def format_rerank_tsv(cset: CognateSet, reranked, predictions, vocab) -> str:
    """Per-set TSV: beam rank, candidate, m, per-language reflexes, r, rerank rank, s."""
    langs = [lang for lang in vocab.languages if lang in cset.reflexes]
    header = ["beam_rank", "candidate", "m"] + langs + ["r", "rerank_rank", "s"]
    lines = ["\t".join(header)]
    for rc in sorted(reranked, key=lambda c: c.beam_rank):
        preds = predictions.get(rc.beam_rank, {})
        cells = [str(rc.beam_rank), " ".join(vocab.decode(rc.tokens)), f"{rc.m:.6f}"]
        cells += [" ".join(vocab.decode(preds.get(lang, ()))) for lang in langs]
        cells += [f"{rc.r:.4f}", str(rc.rerank_rank), f"{rc.s:.6f}"]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"

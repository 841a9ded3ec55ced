"""Evaluation metrics: ACC, TED, TER, FER, BCFS, and the articulatory feature table.

Conventions fixed here (the literature leaves them open):
- FER substitutes at cost HammingDistance(features)/F, indels cost 1, and
  normalizes by gold length; corpus TER/FER pool numerators over denominators.
- BCFS clusters the columns of a unit-cost global alignment (traceback
  preference: substitution, then deletion, then insertion); every gap column
  is its own singleton cluster.  Absolute values may carry constant offsets
  versus other BCFS implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProtoreconError, SchemaError


def token_edit_distance(a, b) -> int:
    """Levenshtein distance with unit costs."""
    a, b = list(a), list(b)
    prev = list(range(len(b) + 1))
    for i, ta in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tb in enumerate(b, start=1):
            cur[j] = min(cur[j - 1] + 1, prev[j] + 1, prev[j - 1] + (ta != tb))
        prev = cur
    return prev[-1]


def ter(pred, gold) -> float:
    """Token error rate: edit distance normalized by gold length."""
    if len(gold) == 0:
        raise ProtoreconError("TER undefined for empty gold sequence")
    return token_edit_distance(pred, gold) / len(gold)


def accuracy(preds, golds) -> float:
    """Fraction of exact token-sequence matches."""
    if len(preds) != len(golds):
        raise ProtoreconError("prediction/gold list length mismatch")
    if not preds:
        return 0.0
    return sum(tuple(p) == tuple(g) for p, g in zip(preds, golds)) / len(preds)


@dataclass(frozen=True)
class FeatureTable:
    """token -> articulatory feature vector in {-1, 0, +1}, plus a tone flag."""

    feature_names: tuple[str, ...]
    vectors: dict[str, np.ndarray]
    tone_flags: dict[str, bool]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def is_tone(self, token: str) -> bool:
        return self.tone_flags.get(token, False)

    def substitution_cost(self, a: str, b: str) -> float:
        """Hamming distance between feature vectors, divided by F."""
        missing = [t for t in (a, b) if t not in self.vectors]
        if missing:
            raise ProtoreconError(f"tokens missing from feature table: {missing}")
        return float(np.count_nonzero(self.vectors[a] != self.vectors[b])) / self.n_features

    @classmethod
    def from_tsv(cls, tsv_text: str) -> "FeatureTable":
        """Header: token, tone, then one column per feature name."""
        lines = [ln for ln in tsv_text.split("\n") if ln]
        if not lines:
            raise SchemaError("empty feature table")
        header = lines[0].split("\t")
        if len(header) < 3 or header[0] != "token" or header[1] != "tone":
            raise SchemaError("feature table header must be: token, tone, features...")
        names = tuple(header[2:])
        vectors, tones = {}, {}
        for lineno, line in enumerate(lines[1:], start=2):
            cells = line.split("\t")
            if len(cells) != len(header):
                raise SchemaError(f"feature table line {lineno}: column count mismatch")
            token = cells[0]
            if token in vectors:
                raise SchemaError(f"feature table line {lineno}: duplicate token {token!r}")
            try:
                vec = np.array([int(c) for c in cells[2:]], dtype=np.int64)
            except ValueError as exc:
                raise SchemaError(f"feature table line {lineno}: {exc}") from exc
            if not np.all(np.isin(vec, (-1, 0, 1))):
                raise SchemaError(f"feature table line {lineno}: values must be -1/0/+1")
            vectors[token] = vec
            tones[token] = cells[1] == "1"
        return cls(names, vectors, tones)


def bundled_feature_table() -> FeatureTable:
    """Small feature table shipped with the package (common IPA + tone marks)."""
    from importlib import resources

    text = resources.files("protorecon").joinpath("data/feature_table.tsv").read_text("utf-8")
    return FeatureTable.from_tsv(text)


def feature_edit_distance(a, b, table: FeatureTable) -> float:
    """Weighted Levenshtein: substitution = feature Hamming / F, indel = 1."""
    a, b = list(a), list(b)
    missing = sorted({t for t in a + b if t not in table})
    if missing:
        raise ProtoreconError(f"tokens missing from feature table: {missing}")
    prev = [float(j) for j in range(len(b) + 1)]
    for i, ta in enumerate(a, start=1):
        cur = [float(i)] + [0.0] * len(b)
        for j, tb in enumerate(b, start=1):
            cur[j] = min(
                cur[j - 1] + 1.0,
                prev[j] + 1.0,
                prev[j - 1] + table.substitution_cost(ta, tb),
            )
        prev = cur
    return prev[-1]


def fer(pred, gold, table: FeatureTable) -> float:
    """Feature error rate: feature edit distance normalized by gold length."""
    if len(gold) == 0:
        raise ProtoreconError("FER undefined for empty gold sequence")
    return feature_edit_distance(pred, gold, table) / len(gold)


GAP = object()  # alignment gap marker; never equal to any token


def align(pred, gold):
    """Unit-cost global alignment as a list of (pred_sym|GAP, gold_sym|GAP) columns.

    Traceback is deterministic: substitution preferred over deletion (pred
    symbol against a gap) preferred over insertion (gap against gold symbol).
    """
    pred, gold = list(pred), list(gold)
    n, m = len(pred), len(gold)
    dp = np.zeros((n + 1, m + 1), dtype=np.int64)
    dp[:, 0] = np.arange(n + 1)
    dp[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dp[i, j] = min(
                dp[i - 1, j - 1] + (pred[i - 1] != gold[j - 1]),
                dp[i - 1, j] + 1,
                dp[i, j - 1] + 1,
            )
    cols = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + (pred[i - 1] != gold[j - 1]):
            cols.append((pred[i - 1], gold[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
            cols.append((pred[i - 1], GAP))
            i -= 1
        else:
            cols.append((GAP, gold[j - 1]))
            j -= 1
    return cols[::-1]


def bcubed_f(pred, gold) -> float:
    """B-Cubed F score over alignment columns.

    Each column belongs to a pred-side cluster (columns sharing its pred
    symbol; gap columns are singletons) and a gold-side cluster defined
    analogously; per-column precision/recall is the normalized overlap of
    the two clusters, and the item score is the harmonic mean of the mean
    precision and mean recall.
    """
    cols = align(pred, gold)
    if not cols:
        return 1.0
    n = len(cols)
    pred_cluster = [
        frozenset([c]) if cols[c][0] is GAP
        else frozenset(d for d in range(n) if cols[d][0] == cols[c][0])
        for c in range(n)
    ]
    gold_cluster = [
        frozenset([c]) if cols[c][1] is GAP
        else frozenset(d for d in range(n) if cols[d][1] == cols[c][1])
        for c in range(n)
    ]
    precision = np.mean(
        [len(pred_cluster[c] & gold_cluster[c]) / len(pred_cluster[c]) for c in range(n)]
    )
    recall = np.mean(
        [len(pred_cluster[c] & gold_cluster[c]) / len(gold_cluster[c]) for c in range(n)]
    )
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate metrics over a prediction set (pooled TER/FER by default)."""

    acc: float
    ted: float
    ter: float
    fer: float | None
    bcfs: float
    n_items: int
    per_item: tuple = ()
    ter_item_mean: float = 0.0
    fer_item_mean: float | None = None

    def as_tsv_row(self) -> str:
        """Single-row TSV: ACC%, TED, TER, FER, BCFS at 4 decimals."""
        fer_cell = f"{self.fer:.4f}" if self.fer is not None else "-"
        return (
            "ACC%\tTED\tTER\tFER\tBCFS\n"
            f"{100 * self.acc:.4f}\t{self.ted:.4f}\t{self.ter:.4f}\t{fer_cell}\t{self.bcfs:.4f}\n"
        )


def evaluate(preds, golds, table: FeatureTable | None = None) -> MetricsReport:
    """All metrics over parallel prediction/gold token-sequence lists."""
    if len(preds) != len(golds):
        raise ProtoreconError("prediction/gold list length mismatch")
    if not preds:
        raise ProtoreconError("cannot evaluate an empty prediction set")
    per_item = []
    ted_sum = gold_len_sum = fed_sum = 0.0
    for p, g in zip(preds, golds):
        d = token_edit_distance(p, g)
        fd = feature_edit_distance(p, g, table) if table is not None else None
        per_item.append(
            {
                "ted": d,
                "ter": d / len(g) if len(g) else None,
                "fer": (fd / len(g) if len(g) else None) if fd is not None else None,
                "bcfs": bcubed_f(p, g),
                "exact": tuple(p) == tuple(g),
            }
        )
        ted_sum += d
        gold_len_sum += len(g)
        if fd is not None:
            fed_sum += fd
    if gold_len_sum == 0:
        raise ProtoreconError("TER undefined: all gold sequences empty")
    item_ters = [r["ter"] for r in per_item if r["ter"] is not None]
    item_fers = [r["fer"] for r in per_item if r["fer"] is not None]
    return MetricsReport(
        acc=sum(r["exact"] for r in per_item) / len(per_item),
        ted=ted_sum / len(per_item),
        ter=ted_sum / gold_len_sum,
        fer=(fed_sum / gold_len_sum) if table is not None else None,
        bcfs=float(np.mean([r["bcfs"] for r in per_item])),
        n_items=len(per_item),
        per_item=tuple(per_item),
        ter_item_mean=float(np.mean(item_ters)) if item_ters else 0.0,
        fer_item_mean=float(np.mean(item_fers)) if item_fers else None,
    )

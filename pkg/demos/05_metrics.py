"""The evaluation metrics on hand-picked prediction/gold pairs.

TED/TER count token edits; FER weighs substitutions by articulatory feature
disagreement, so near-misses (p vs b) cost less than unrelated segments;
BCFS scores the structural similarity of the aligned sequences.
"""

from protorecon.metrics import (
    bcubed_f,
    bundled_feature_table,
    evaluate,
    feature_edit_distance,
    token_edit_distance,
)

table = bundled_feature_table()

pairs = [
    (("p", "a", "t"), ("p", "a", "t")),   # exact
    (("b", "a", "t"), ("p", "a", "t")),   # voicing slip: cheap under FER
    (("k", "a", "t"), ("p", "a", "t")),   # place change: costlier features
    (("p", "a"), ("p", "a", "t")),        # deletion: full cost either way
    (("t", "a", "p"), ("p", "a", "t")),   # metathesis: two substitutions
    (("a", "a", "t"), ("a", "t", "t")),   # repeated segments: BCFS < 1 here
]

# BCFS compares the *structure* of the two sequences (which positions share
# a segment), so sequences of all-distinct tokens always align to BCFS 1.0;
# only repetition patterns can disagree.

print(f"{'pred':>8} {'gold':>8} {'TED':>4} {'FED':>7} {'BCFS':>6}")
for pred, gold in pairs:
    ted = token_edit_distance(pred, gold)
    fed = feature_edit_distance(pred, gold, table)
    print(f"{' '.join(pred):>8} {' '.join(gold):>8} {ted:>4} {fed:>7.3f} "
          f"{bcubed_f(pred, gold):>6.3f}")

report = evaluate([p for p, _ in pairs], [g for _, g in pairs], table)
print("\naggregate over all pairs (TER/FER pooled over gold tokens):")
print(report.as_tsv_row())

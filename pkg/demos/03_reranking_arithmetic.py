"""The reranking score s = m + lambda * r on a worked five-candidate example.

m is the length-normalized beam score of each candidate protoform; r is the
fraction of daughter reflexes a reflex-prediction model derives exactly from
it.  A candidate that explains the daughters well can overtake a candidate
the reconstruction model preferred.
"""

from protorecon.decode import Candidate
from protorecon.rerank import rerank

# five beam candidates with their model scores and reflex accuracies
m_values = [-0.1114, -0.2711, -0.5030, -1.5533, -1.6329]
r_values = [0.25, 0.25, 0.875, 0.25, 0.125]
labels = ["pjit", "pit", "pit (alt)", "bjit", "bit"]
lam = 1.26

candidates = [
    Candidate(tokens=(i,), m=m, raw_logp=m, length=2) for i, m in enumerate(m_values)
]
reranked = rerank(candidates, r_values, lam)

print(f"lambda = {lam}\n")
print(f"{'beam':>4} {'label':>10} {'m':>9} {'r':>6} {'s':>9} {'rerank':>7}")
for rc in sorted(reranked, key=lambda c: c.beam_rank):
    print(f"{rc.beam_rank:>4} {labels[rc.tokens[0]]:>10} {rc.m:>9.4f} "
          f"{rc.r:>6.3f} {rc.s:>9.4f} {rc.rerank_rank:>7}")

top = reranked[0]
print(f"\ntop after reranking: beam rank {top.beam_rank} ({labels[top.tokens[0]]})")
print("the high-r candidate at beam rank 2 overtakes both higher-m candidates")

print("\nat lambda = 0 the reranker is inert and beam order is preserved:")
for rc in rerank(candidates, r_values, 0.0):
    print(f"  rerank {rc.rerank_rank} = beam {rc.beam_rank}")

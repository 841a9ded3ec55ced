"""Beam search over a hand-built toy decoder, compared with brute force.

The decoders in decode.py drive any object exposing the stepper protocol,
so a ten-line toy model is enough to watch length normalization at work:
m = log P / length**alpha, with length counting the terminating EOS.
"""

import numpy as np

from protorecon import BeamConfig, beam_search, greedy_decode
from protorecon.autodiff import log_softmax_rows


class ToyStepper:
    """A fixed table of logits keyed by the last emitted token."""

    vocab_size = 4  # 0=BOS, 1=EOS, 2='a', 3='b'
    bos_id, eos_id = 0, 1
    banned_ids = (0,)

    LOGITS = {
        0: [-9.0, 1.0, 2.0, 0.5],  # after BOS: 'a' likely, EOS possible
        2: [-9.0, 2.0, 0.0, 1.0],  # after 'a': EOS likely
        3: [-9.0, 0.0, 0.5, 0.5],
    }

    def init_state(self, batch):
        return [0] * batch

    def step(self, state, tokens):
        new_state = [int(t) for t in tokens]
        rows = np.array([self.LOGITS[s] for s in new_state], dtype=float)
        return log_softmax_rows(rows), new_state

    def select(self, state, idx):
        return [state[i] for i in idx]


NAMES = {1: "<eos>", 2: "a", 3: "b"}
stepper = ToyStepper()

greedy = greedy_decode(stepper, max_len=5)
print("greedy decode:", [NAMES[t] for t in greedy])

for alpha in (0.0, 1.0):
    print(f"\nbeam search, k=4, alpha={alpha}")
    for rank, cand in enumerate(beam_search(stepper, BeamConfig(k=4, alpha=alpha, max_len=5))):
        toks = " ".join(NAMES[t] for t in cand.tokens) or "(empty)"
        print(f"  #{rank}: {toks:12s} m={cand.m:8.4f} raw={cand.raw_logp:8.4f}")

print("\nwith alpha=1 longer hypotheses divide their log probability by a")
print("larger length, so short outputs are penalized less than at alpha=0")

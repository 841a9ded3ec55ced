"""Synthetic language family with deterministic, invertible sound changes.

Protoforms are CV(C) syllable strings over a small IPA inventory; each
daughter language applies a seeded composition of 3-5 rewrite rules, every
rule being a permutation of part of the inventory applied either everywhere
or only at a fixed position (word-initial / word-final).  Compositions of
bijections are bijective, so reflexes determine protoforms exactly and the
family is fully learnable.
"""

from __future__ import annotations

import numpy as np

from .corpus import CognateSet, Dataset

CONSONANTS = ["p", "t", "k", "b", "d", "g", "m", "n", "s", "l"]
VOWELS = ["a", "e", "i", "o", "u"]


class RewriteRule:
    """Bijective token substitution, optionally restricted to one position."""

    def __init__(self, mapping: dict, position: str = "all"):
        assert len(set(mapping.values())) == len(mapping), "mapping must be injective"
        self.mapping = mapping
        self.position = position  # all | initial | final

    def apply(self, tokens):
        out = list(tokens)
        if self.position == "initial":
            idx = [0]
        elif self.position == "final":
            idx = [len(out) - 1]
        else:
            idx = range(len(out))
        for i in idx:
            out[i] = self.mapping.get(out[i], out[i])
        return out

    def describe(self) -> str:
        pairs = ", ".join(f"{a}>{b}" for a, b in sorted(self.mapping.items()))
        return f"[{self.position}] {pairs}"


def _random_rule(rng: np.random.Generator) -> RewriteRule:
    pool = CONSONANTS if rng.random() < 0.6 else VOWELS
    cycle_len = int(rng.integers(2, 4))
    chosen = list(rng.choice(len(pool), size=cycle_len, replace=False))
    mapping = {
        pool[chosen[i]]: pool[chosen[(i + 1) % cycle_len]] for i in range(cycle_len)
    }
    position = ["all", "all", "initial", "final"][int(rng.integers(0, 4))]
    return RewriteRule(mapping, position)


def make_daughter_rules(rng: np.random.Generator, n_rules: int) -> list[RewriteRule]:
    return [_random_rule(rng) for _ in range(n_rules)]


def derive(protoform, rules) -> tuple[str, ...]:
    tokens = list(protoform)
    for rule in rules:
        tokens = rule.apply(tokens)
    return tuple(tokens)


def random_protoform(rng: np.random.Generator) -> tuple[str, ...]:
    """1-3 CV syllables, with an optional coda consonant."""
    n_syllables = int(rng.integers(1, 4))
    tokens = []
    for _ in range(n_syllables):
        tokens.append(CONSONANTS[int(rng.integers(len(CONSONANTS)))])
        tokens.append(VOWELS[int(rng.integers(len(VOWELS)))])
    if rng.random() < 0.4:
        tokens.append(CONSONANTS[int(rng.integers(len(CONSONANTS)))])
    return tuple(tokens)


def generate_family(
    n_sets: int = 2000,
    n_daughters: int = 4,
    seed: int = 0,
    missing_rate: float = 0.05,
) -> tuple[Dataset, dict]:
    """Generate a cognate-set dataset plus the ground-truth rule book.

    The first daughter never has missing reflexes, so every cognate set has
    at least one reflex and the protoform stays recoverable.
    """
    rng = np.random.default_rng(seed)
    languages = tuple(f"D{i + 1}" for i in range(n_daughters))
    rules = {
        lang: make_daughter_rules(rng, int(rng.integers(3, 6))) for lang in languages
    }
    sets = []
    for i in range(n_sets):
        proto = random_protoform(rng)
        reflexes = {}
        for j, lang in enumerate(languages):
            if j > 0 and rng.random() < missing_rate:
                continue
            reflexes[lang] = derive(proto, rules[lang])
        sets.append(CognateSet(f"syn{i + 1}", proto, reflexes))
    return Dataset(languages, tuple(sets)), rules

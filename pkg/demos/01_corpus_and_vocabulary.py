"""Parse a cognate table, build a vocabulary, and assemble model inputs.

A cognate set pairs a protoform (the ancestral word) with its reflexes (the
descendant words) across daughter languages.  The reconstruction model reads
all reflexes concatenated into one tagged sequence; the reflex model reads a
language-tagged protoform.
"""

from protorecon import (
    assemble_reconstruction_input,
    assemble_reflex_input,
    build_vocabulary,
    parse_dataset,
    split_dataset,
)

TSV = """id\tprotoform\tLangA\tLangB\tLangC
w1\tp a\tp o\tb a\tp a
w2\tt a k\tt o k\td a k\tt a x
w3\tk i\tk i\tg i\t
w4\tp a t\tp o t\tb a t\tp a t
"""

dataset = parse_dataset(TSV)
print(f"{len(dataset.sets)} cognate sets over languages {dataset.languages}")

vocab = build_vocabulary(dataset)
print(f"vocabulary of {vocab.size} tokens; first ten: {vocab.id_to_token[:10]}")

w1 = dataset.sets[0]
ids = assemble_reconstruction_input(w1, vocab)
print("\nreconstruction input for", w1.id)
print("  tokens:", " ".join(vocab.decode(ids)))

# w3 is missing its LangC reflex; the assembled input simply skips it
w3 = dataset.sets[2]
print("reconstruction input for", w3.id, "(LangC missing)")
print("  tokens:", " ".join(vocab.decode(assemble_reconstruction_input(w3, vocab))))

tagged = assemble_reflex_input(w1.protoform, "LangB", vocab)
print("\nreflex input (protoform -> LangB):", " ".join(vocab.decode(tagged)))

split = split_dataset(dataset, (0.5, 0.25, 0.25), seed=0)
print("\nsplit tags:", split.split_tags)

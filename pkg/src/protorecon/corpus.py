"""Cognate-set datasets: TSV ingestion, vocabularies, and model-input assembly.

A dataset is a UTF-8 TSV whose header row names the protoform column first
and one daughter language per remaining column.  An optional leading ``id``
column supplies explicit ids; otherwise rows are numbered ``w1``, ``w2``, ...
Cells hold token strings (space-separated by default); an empty cell means
the reflex is missing in that language.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, SchemaError, VocabularyError

# Structural tokens.  Their ids are fixed so that every vocabulary built
# from any dataset agrees on them.
PAD, BOS, EOS, SEP, DELIM, UNK = "<pad>", "<bos>", "<eos>", "*", ":", "<unk>"
STRUCTURAL_TOKENS = (PAD, BOS, EOS, SEP, DELIM, UNK)

SPLIT_TAGS = ("train", "val", "test")


@dataclass(frozen=True)
class CognateSet:
    """One protoform (optional) plus per-language reflex token sequences."""

    id: str
    protoform: tuple[str, ...] | None
    reflexes: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if not self.reflexes:
            raise SchemaError(f"cognate set {self.id!r} has no reflexes")
        for seq in list(self.reflexes.values()) + (
            [self.protoform] if self.protoform is not None else []
        ):
            for tok in seq:
                if not tok:
                    raise SchemaError(f"empty token in cognate set {self.id!r}")
                if tok in (SEP, DELIM):
                    raise SchemaError(
                        f"structural character {tok!r} inside cognate set {self.id!r}"
                    )


@dataclass(frozen=True)
class Dataset:
    """An ordered language inventory, cognate sets, and optional split tags."""

    languages: tuple[str, ...]
    sets: tuple[CognateSet, ...]
    split_tags: dict[str, str] | None = None

    def __post_init__(self):
        ids = [cs.id for cs in self.sets]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate cognate-set ids")
        inventory = set(self.languages)
        for cs in self.sets:
            extra = set(cs.reflexes) - inventory
            if extra:
                raise SchemaError(
                    f"cognate set {cs.id!r} has reflexes outside the language "
                    f"inventory: {sorted(extra)}"
                )

    def subset(self, tag: str) -> "Dataset":
        if self.split_tags is None:
            raise ConfigError("dataset has no split tags")
        keep = tuple(cs for cs in self.sets if self.split_tags[cs.id] == tag)
        tags = {cs.id: tag for cs in keep}
        return Dataset(self.languages, keep, tags)


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token<->id map over structural, language-tag, and phoneme tokens."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(compare=False)
    languages: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def bos_id(self) -> int:
        return self.token_to_id[BOS]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP]

    @property
    def delim_id(self) -> int:
        return self.token_to_id[DELIM]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    @property
    def structural_ids(self) -> tuple[int, ...]:
        return tuple(range(len(STRUCTURAL_TOKENS)))

    def language_tag(self, language: str) -> str:
        return f"<{language}>"

    def language_tag_id(self, language: str) -> int:
        tag = self.language_tag(language)
        if tag not in self.token_to_id:
            raise VocabularyError(f"unknown language {language!r}")
        return self.token_to_id[tag]

    @property
    def language_tag_ids(self) -> dict[str, int]:
        return {lang: self.language_tag_id(lang) for lang in self.languages}

    def encode(self, tokens, allow_unk: bool = False) -> list[int]:
        out = []
        for tok in tokens:
            if tok in self.token_to_id:
                out.append(self.token_to_id[tok])
            elif allow_unk:
                out.append(self.unk_id)
            else:
                raise VocabularyError(f"unknown token {tok!r}")
        return out

    def decode(self, ids) -> tuple[str, ...]:
        return tuple(self.id_to_token[i] for i in ids)

    def content_hash(self) -> str:
        import hashlib

        payload = "\x00".join(self.id_to_token).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def _tokenize(cell: str, mode: str) -> tuple[str, ...]:
    if mode == "whitespace":
        return tuple(cell.split(" "))
    if mode == "codepoint":
        return tuple(cell)
    raise ConfigError(f"unknown tokenization mode {mode!r}")


def parse_dataset(tsv_text: str, tokenize: str = "whitespace") -> Dataset:
    """Parse a cognate-table TSV into a Dataset.

    The header's first column names the protoform column (or is literally
    ``id``, in which case the second column is the protoform column); the
    remaining columns name the daughter languages.
    """
    lines = tsv_text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise SchemaError("empty dataset file")
    header = lines[0].split("\t")
    if len(header) < 2:
        raise SchemaError("header must name a protoform column and >= 1 language")
    has_id = header[0] == "id"
    first_data = 2 if has_id else 1
    languages = tuple(header[first_data:])
    if len(set(languages)) != len(languages):
        raise SchemaError("duplicate language columns")

    sets = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(header):
            raise SchemaError(
                f"line {lineno}: expected {len(header)} columns, got {len(cells)}"
            )
        set_id = cells[0] if has_id else f"w{lineno - 1}"
        proto_cell = cells[1] if has_id else cells[0]
        protoform = _tokenize(proto_cell, tokenize) if proto_cell else None
        reflexes = {}
        for lang, cell in zip(languages, cells[first_data:]):
            if cell:
                reflexes[lang] = _tokenize(cell, tokenize)
        sets.append(CognateSet(set_id, protoform, reflexes))
    return Dataset(languages, tuple(sets))


def serialize_dataset(dataset: Dataset, tokenize: str = "whitespace") -> str:
    """Inverse of parse_dataset (always writes an explicit id column)."""
    joiner = " " if tokenize == "whitespace" else ""

    def cell(seq):
        return joiner.join(seq) if seq is not None else ""

    rows = ["\t".join(["id", "protoform", *dataset.languages])]
    for cs in dataset.sets:
        cells = [cs.id, cell(cs.protoform)]
        cells += [cell(cs.reflexes.get(lang)) for lang in dataset.languages]
        rows.append("\t".join(cells))
    return "\n".join(rows) + "\n"


def build_vocabulary(dataset: Dataset) -> Vocabulary:
    """Deterministic vocabulary: structural ids, language tags, sorted phonemes."""
    phonemes = set()
    for cs in dataset.sets:
        if cs.protoform is not None:
            phonemes.update(cs.protoform)
        for seq in cs.reflexes.values():
            phonemes.update(seq)
    tags = tuple(f"<{lang}>" for lang in dataset.languages)
    tokens = STRUCTURAL_TOKENS + tags + tuple(sorted(phonemes))
    return Vocabulary(
        id_to_token=tokens,
        token_to_id={tok: i for i, tok in enumerate(tokens)},
        languages=dataset.languages,
    )


def assemble_reconstruction_input(
    cset: CognateSet,
    vocab: Vocabulary,
    language_order: tuple[str, ...] | None = None,
    allow_unk: bool = False,
) -> list[int]:
    """Concatenate present reflexes into one id sequence.

    Layout: SEP tag(D1) DELIM d1... SEP tag(D2) DELIM d2... SEP, with
    languages in canonical order and missing reflexes skipped entirely.
    """
    order = language_order if language_order is not None else vocab.languages
    out = [vocab.sep_id]
    for lang in order:
        if lang not in cset.reflexes:
            continue
        out.append(vocab.language_tag_id(lang))
        out.append(vocab.delim_id)
        out.extend(vocab.encode(cset.reflexes[lang], allow_unk=allow_unk))
        out.append(vocab.sep_id)
    if len(out) == 1:
        raise SchemaError(f"cognate set {cset.id!r} has no present reflexes")
    return out


def assemble_reflex_input(
    protoform,
    target_language: str,
    vocab: Vocabulary,
    allow_unk: bool = False,
) -> list[int]:
    """Prepend the target daughter's language tag to the protoform ids."""
    return [vocab.language_tag_id(target_language)] + vocab.encode(
        protoform, allow_unk=allow_unk
    )


def split_dataset(
    dataset: Dataset,
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> Dataset:
    """Deterministically shuffle by seed and partition into train/val/test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")
    n = len(dataset.sets)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(np.floor(ratios[0] * n))
    n_val = int(np.floor(ratios[1] * n))
    tags = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            tag = "train"
        elif pos < n_train + n_val:
            tag = "val"
        else:
            tag = "test"
        tags[dataset.sets[idx].id] = tag
    return replace(dataset, split_tags=tags)


def parse_split_file(tsv_text: str) -> dict[str, str]:
    """Two-column TSV (id, split tag) supplied externally."""
    tags = {}
    for lineno, line in enumerate(tsv_text.split("\n"), start=1):
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise SchemaError(f"split file line {lineno}: expected 2 columns")
        set_id, tag = cells
        if tag not in SPLIT_TAGS:
            raise SchemaError(f"split file line {lineno}: unknown tag {tag!r}")
        if set_id in tags:
            raise SchemaError(f"split file line {lineno}: duplicate id {set_id!r}")
        tags[set_id] = tag
    return tags


def apply_split_tags(dataset: Dataset, tags: dict[str, str]) -> Dataset:
    missing = {cs.id for cs in dataset.sets} - set(tags)
    if missing:
        raise SchemaError(f"split file misses ids: {sorted(missing)[:5]} ...")
    return replace(dataset, split_tags={cs.id: tags[cs.id] for cs in dataset.sets})


def serialize_split_tags(tags: dict[str, str]) -> str:
    return "".join(f"{k}\t{v}\n" for k, v in tags.items())

"""GRU encoder-decoder models: reconstruction and reflex prediction.

The reconstruction model consumes a concatenated cognate-set sequence and
emits a protoform; the reflex model consumes a language-tagged protoform
and emits the reflex in that daughter language.  Training paths build
autodiff graphs; decoding paths run on raw arrays through the stepper
interface in decode.py.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from . import decode as dec
from .autodiff import Tensor
from .corpus import Dataset, Vocabulary, build_vocabulary
from .errors import CheckpointError, ConfigError, ProtoreconError, TrainingError
from .metrics import token_edit_distance

NEG = -1e30  # additive logit mask for ids the decoder must never emit


@dataclass(frozen=True)
class ReconModelConfig:
    embedding_size: int = 32
    hidden_size: int = 64
    feedforward_size: int = 64
    dropout: float = 0.1
    batch_size: int = 32
    lr: float = 1e-3
    max_epochs: int = 60
    warmup_epochs: int = 0
    alpha: float = 1.0  # beam length-normalization constant
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    validate_every: int = 3
    patience: int = 5

    def __post_init__(self):
        for name in ("embedding_size", "hidden_size", "feedforward_size", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")


@dataclass(frozen=True)
class ReflexModelConfig(ReconModelConfig):
    bidirectional_encoder: bool = True
    num_encoder_layers: int = 1
    one_hot_target_encoding: bool = True
    target_gated_classifier: bool = False
    decode_with_language_embedding: bool = False

    def __post_init__(self):
        super().__post_init__()
        if self.num_encoder_layers < 1:
            raise ConfigError("num_encoder_layers must be >= 1")
        if not (
            self.one_hot_target_encoding
            or self.target_gated_classifier
            or self.decode_with_language_embedding
        ):
            raise ConfigError(
                "reflex model needs at least one target-conditioning mechanism"
            )


@dataclass
class TrainingHistory:
    epoch_losses: list = field(default_factory=list)  # (epoch, mean train loss)
    validations: list = field(default_factory=list)  # (epoch, mean val edit distance)
    best_epoch: int = -1


def _glorot(rng, n_in, n_out):
    s = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-s, s, size=(n_in, n_out))


def _gru_params(rng, n_in, n_hid, prefix):
    params = {}
    for gate in ("z", "r", "h"):
        params[f"{prefix}.W_{gate}"] = ad.parameter(_glorot(rng, n_in, n_hid), f"{prefix}.W_{gate}")
        params[f"{prefix}.U_{gate}"] = ad.parameter(_glorot(rng, n_hid, n_hid), f"{prefix}.U_{gate}")
        params[f"{prefix}.b_{gate}"] = ad.parameter(np.zeros(n_hid), f"{prefix}.b_{gate}")
    return params


def _gate_view(params, prefix):
    return {k.split(".")[-1]: params[f"{prefix}.{k.split('.')[-1]}"] for k in
            [f"{prefix}.W_z", f"{prefix}.U_z", f"{prefix}.b_z",
             f"{prefix}.W_r", f"{prefix}.U_r", f"{prefix}.b_r",
             f"{prefix}.W_h", f"{prefix}.U_h", f"{prefix}.b_h"]}


def segment_language_indices(ids, vocab: Vocabulary) -> list[int]:
    """Per-position language index (0 = structural) for a concatenated input."""
    tag_to_index = {vocab.language_tag_id(lang): i + 1 for i, lang in enumerate(vocab.languages)}
    out, cur = [], 0
    for i in ids:
        if i == vocab.sep_id or i == vocab.delim_id:
            cur = 0 if i == vocab.sep_id else cur
            out.append(0)
        elif i in tag_to_index:
            cur = tag_to_index[i]
            out.append(cur)
        else:
            out.append(cur)
    return out


def _masked_step(h_prev: Tensor, h_new: Tensor, mask_col: np.ndarray) -> Tensor:
    """Keep h_prev on rows whose sequence already ended (mask 0)."""
    m = Tensor(mask_col[:, None])
    inv = Tensor(1.0 - mask_col[:, None])
    return ad.add(ad.mul(h_new, m), ad.mul(h_prev, inv))


class _GruStepper:
    """decode.py stepper over raw-array GRU decoding with a classifier closure."""

    def __init__(self, h0, dec_params, step_input_fn, classify_fn, vocab_size, bos_id, eos_id, banned_ids):
        self._h0 = h0  # (1, H)
        self._dec = dec_params
        self._step_input = step_input_fn  # token ids -> (B, dec input dim)
        self._classify = classify_fn  # hidden (B, H) -> logits (B, V)
        self.vocab_size = vocab_size
        self.bos_id = bos_id
        self.eos_id = eos_id
        self.banned_ids = banned_ids

    def init_state(self, batch):
        return np.repeat(self._h0, batch, axis=0)

    def step(self, state, tokens):
        x = self._step_input(np.asarray(tokens))
        h = ad.gru_cell_np(x, state, self._dec)
        logits = self._classify(h)
        return ad.log_softmax_rows(logits), h

    def select(self, state, idx):
        return state[idx]


def _pad_batch(seqs, pad_id):
    """Right-pad id lists; returns (ids matrix, mask matrix, lengths)."""
    lengths = np.array([len(s) for s in seqs])
    T = int(lengths.max())
    ids = np.full((len(seqs), T), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return ids, mask, lengths


class _ModelBase:
    kind = ""

    def __init__(self, config, vocab: Vocabulary):
        self.config = config
        self.vocab = vocab
        self.params: dict[str, Tensor] = {}
        self.history = TrainingHistory()
        self.max_decode_len = 40

    # -- parameter bookkeeping ------------------------------------------------

    def parameters(self):
        return list(self.params.values())

    def param_arrays(self):
        return {k: v.data for k, v in self.params.items()}

    def load_param_arrays(self, arrays):
        for k, p in self.params.items():
            if k not in arrays or arrays[k].shape != p.data.shape:
                raise CheckpointError(f"missing or misshapen array {k!r}")
            p.data = np.array(arrays[k], dtype=np.float64)

    def snapshot(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def banned_output_ids(self):
        v = self.vocab
        banned = [v.pad_id, v.bos_id, v.sep_id, v.delim_id, v.unk_id]
        banned += [v.language_tag_id(lang) for lang in v.languages]
        return tuple(banned)

    def _output_mask_row(self):
        row = np.zeros(self.vocab.size)
        row[list(self.banned_output_ids())] = NEG
        return row

    def _classifier_t(self, h: Tensor, w1, b1, w2, b2) -> Tensor:
        hidden = ad.tanh(ad.add(ad.matmul(h, w1), b1))
        logits = ad.add(ad.matmul(hidden, w2), b2)
        return ad.add(logits, Tensor(self._output_mask_row()))

    def _classifier_np(self, h, w1, b1, w2, b2):
        hidden = np.tanh(h @ w1.data + b1.data)
        return hidden @ w2.data + b2.data + self._output_mask_row()

    # -- checkpointing --------------------------------------------------------

    def save(self, path):
        header = {
            "kind": self.kind,
            "config": asdict(self.config),
            "vocab_tokens": list(self.vocab.id_to_token),
            "languages": list(self.vocab.languages),
            "max_decode_len": self.max_decode_len,
        }
        ckpt.write_checkpoint(
            path, self.param_arrays(), header, self.vocab.content_hash(), self.config.seed
        )


def load_checkpoint(path, vocab: Vocabulary | None = None):
    """Rebuild a trained model from a checkpoint container."""
    arrays, header, vocab_hash, _seed = ckpt.read_checkpoint(path)
    tokens = tuple(header["vocab_tokens"])
    stored_vocab = Vocabulary(
        id_to_token=tokens,
        token_to_id={t: i for i, t in enumerate(tokens)},
        languages=tuple(header["languages"]),
    )
    if vocab is not None and vocab.content_hash() != vocab_hash:
        raise CheckpointError("vocabulary hash mismatch between checkpoint and dataset")
    use_vocab = vocab if vocab is not None else stored_vocab
    kind = header["kind"]
    if kind == "recon":
        model = ReconModel(ReconModelConfig(**header["config"]), use_vocab)
    elif kind == "reflex":
        model = ReflexModel(ReflexModelConfig(**header["config"]), use_vocab)
    else:
        raise CheckpointError(f"unknown model kind {kind!r}")
    model.load_param_arrays(arrays)
    model.max_decode_len = int(header["max_decode_len"])
    return model


class ReconModel(_ModelBase):
    """Single-layer unidirectional GRU encoder-decoder over concatenated reflexes.

    Encoder input at each position is the token embedding concatenated with
    the embedding of the position's segment language (a reserved index for
    structural tokens).  The decoder starts from the encoder's final hidden
    state and feeds back the previous token's embedding; an MLP classifier
    with one tanh hidden layer maps hidden states to vocabulary logits.
    """

    kind = "recon"

    def __init__(self, config: ReconModelConfig, vocab: Vocabulary):
        super().__init__(config, vocab)
        rng = np.random.default_rng(config.seed)
        E, H, F = config.embedding_size, config.hidden_size, config.feedforward_size
        V, L = vocab.size, len(vocab.languages)
        p = self.params
        p["tok_emb"] = ad.parameter(rng.uniform(-0.1, 0.1, (V, E)), "tok_emb")
        p["lang_emb"] = ad.parameter(rng.uniform(-0.1, 0.1, (L + 1, E)), "lang_emb")
        p.update(_gru_params(rng, 2 * E, H, "enc"))
        p.update(_gru_params(rng, E, H, "dec"))
        p["clf.W1"] = ad.parameter(_glorot(rng, H, F), "clf.W1")
        p["clf.b1"] = ad.parameter(np.zeros(F), "clf.b1")
        p["clf.W2"] = ad.parameter(_glorot(rng, F, V), "clf.W2")
        p["clf.b2"] = ad.parameter(np.zeros(V), "clf.b2")

    def _check_framing(self, input_ids):
        sep = self.vocab.sep_id
        if len(input_ids) < 3 or input_ids[0] != sep or input_ids[-1] != sep:
            raise ProtoreconError("reconstruction input must be SEP-framed")

    # -- training forward -----------------------------------------------------

    def batch_loss(self, inputs, targets, dropout_rng=None, collect_logits=False):
        """Teacher-forced mean token loss over a batch of (input, protoform).

        targets are protoform id lists without EOS; EOS is appended here.
        Returns (loss Tensor, per-step logits list or None).
        """
        for seq in inputs:
            self._check_framing(seq)
        p = self.params
        rate = self.config.dropout if dropout_rng is not None else 0.0
        eos = self.vocab.eos_id
        in_ids, in_mask, _ = _pad_batch(inputs, self.vocab.pad_id)
        lidx = [segment_language_indices(seq, self.vocab) for seq in inputs]
        li_ids, _, _ = _pad_batch(lidx, 0)
        B = len(inputs)
        h = Tensor(np.zeros((B, self.config.hidden_size)))
        enc = _gate_view(p, "enc")
        for t in range(in_ids.shape[1]):
            x = ad.concat([ad.embedding(p["tok_emb"], in_ids[:, t]),
                           ad.embedding(p["lang_emb"], li_ids[:, t])])
            if rate:
                x = ad.dropout(x, rate, dropout_rng)
            h = _masked_step(h, ad.gru_cell(x, h, enc), in_mask[:, t])

        tgt = [list(t) + [eos] for t in targets]
        tgt_ids, tgt_mask, _ = _pad_batch(tgt, self.vocab.pad_id)
        prev_ids = np.concatenate(
            [np.full((B, 1), self.vocab.bos_id, dtype=np.int64), tgt_ids[:, :-1]], axis=1
        )
        dec_p = _gate_view(p, "dec")
        total_tokens = tgt_mask.sum()
        step_losses, logits_steps = [], []
        for t in range(tgt_ids.shape[1]):
            x = ad.embedding(p["tok_emb"], prev_ids[:, t])
            if rate:
                x = ad.dropout(x, rate, dropout_rng)
            h = _masked_step(h, ad.gru_cell(x, h, dec_p), tgt_mask[:, t])
            h_in = ad.dropout(h, rate, dropout_rng) if rate else h
            logits = self._classifier_t(h_in, p["clf.W1"], p["clf.b1"], p["clf.W2"], p["clf.b2"])
            if collect_logits:
                logits_steps.append(logits)
            step_losses.append(
                ad.softmax_cross_entropy(logits, tgt_ids[:, t], tgt_mask[:, t], normalizer=total_tokens)
            )
        return ad.add_scalars(step_losses), (logits_steps if collect_logits else None)

    # -- inference ------------------------------------------------------------

    def encode_np(self, input_ids):
        self._check_framing(input_ids)
        p = self.params
        lidx = segment_language_indices(input_ids, self.vocab)
        x = np.concatenate(
            [p["tok_emb"].data[np.asarray(input_ids)], p["lang_emb"].data[np.asarray(lidx)]], axis=1
        )
        h = np.zeros((1, self.config.hidden_size))
        enc = _gate_view(self.params, "enc")
        for t in range(len(input_ids)):
            h = ad.gru_cell_np(x[t : t + 1], h, enc)
        return h

    def decoder(self, input_ids) -> _GruStepper:
        p = self.params
        return _GruStepper(
            h0=self.encode_np(input_ids),
            dec_params=_gate_view(p, "dec"),
            step_input_fn=lambda toks: p["tok_emb"].data[toks],
            classify_fn=lambda h: self._classifier_np(
                h, p["clf.W1"], p["clf.b1"], p["clf.W2"], p["clf.b2"]
            ),
            vocab_size=self.vocab.size,
            bos_id=self.vocab.bos_id,
            eos_id=self.vocab.eos_id,
            banned_ids=self.banned_output_ids(),
        )


class ReflexModel(_ModelBase):
    """GRU reflex predictor with configurable target-conditioning mechanisms.

    Encoder: stacked, optionally bidirectional GRU over the tagged protoform.
    Decoder: unidirectional GRU seeded from a learned bridge over the final
    encoder states.  Conditioning flags: a one-hot language vector on the
    classifier input, a per-language classifier output block, and a language
    embedding concatenated to each decoder input.
    """

    kind = "reflex"

    def __init__(self, config: ReflexModelConfig, vocab: Vocabulary):
        super().__init__(config, vocab)
        rng = np.random.default_rng(config.seed)
        E, H, F = config.embedding_size, config.hidden_size, config.feedforward_size
        V, L = vocab.size, len(vocab.languages)
        p = self.params
        p["tok_emb"] = ad.parameter(rng.uniform(-0.1, 0.1, (V, E)), "tok_emb")
        dirs = ("f", "b") if config.bidirectional_encoder else ("f",)
        out_dim = H * len(dirs)
        for layer in range(config.num_encoder_layers):
            in_dim = E if layer == 0 else out_dim
            for d in dirs:
                p.update(_gru_params(rng, in_dim, H, f"enc{layer}{d}"))
        p["bridge.W"] = ad.parameter(_glorot(rng, out_dim, H), "bridge.W")
        p["bridge.b"] = ad.parameter(np.zeros(H), "bridge.b")
        dec_in = E + (E if config.decode_with_language_embedding else 0)
        if config.decode_with_language_embedding:
            p["lang_emb"] = ad.parameter(rng.uniform(-0.1, 0.1, (L + 1, E)), "lang_emb")
        p.update(_gru_params(rng, dec_in, H, "dec"))
        clf_in = H + (L if config.one_hot_target_encoding else 0)
        p["clf.W1"] = ad.parameter(_glorot(rng, clf_in, F), "clf.W1")
        p["clf.b1"] = ad.parameter(np.zeros(F), "clf.b1")
        if config.target_gated_classifier:
            for i, lang in enumerate(vocab.languages):
                p[f"clf.W2.{i}"] = ad.parameter(_glorot(rng, F, V), f"clf.W2.{lang}")
                p[f"clf.b2.{i}"] = ad.parameter(np.zeros(V), f"clf.b2.{lang}")
        else:
            p["clf.W2"] = ad.parameter(_glorot(rng, F, V), "clf.W2")
            p["clf.b2"] = ad.parameter(np.zeros(V), "clf.b2")

    def language_index(self, language: str) -> int:
        try:
            return self.vocab.languages.index(language)
        except ValueError:
            raise ProtoreconError(f"language {language!r} outside inventory") from None

    def _clf_weights(self, lang_index: int):
        p = self.params
        if self.config.target_gated_classifier:
            return p[f"clf.W2.{lang_index}"], p[f"clf.b2.{lang_index}"]
        return p["clf.W2"], p["clf.b2"]

    def _one_hot(self, lang_index: int, rows: int) -> np.ndarray:
        out = np.zeros((rows, len(self.vocab.languages)))
        out[:, lang_index] = 1.0
        return out

    # -- encoder (uniform-length batch, so no masking needed) ----------------

    def _encode_t(self, in_ids: np.ndarray, rate, dropout_rng):
        """in_ids: (B, T) with equal true lengths.  Returns final state bridge (B, H)."""
        p = self.params
        cfg = self.config
        B, T = in_ids.shape
        seq = []
        for t in range(T):
            x = ad.embedding(p["tok_emb"], in_ids[:, t])
            if rate:
                x = ad.dropout(x, rate, dropout_rng)
            seq.append(x)
        dirs = ("f", "b") if cfg.bidirectional_encoder else ("f",)
        for layer in range(cfg.num_encoder_layers):
            outs = {}
            for d in dirs:
                gates = _gate_view(p, f"enc{layer}{d}")
                h = Tensor(np.zeros((B, cfg.hidden_size)))
                states = []
                order = range(T) if d == "f" else range(T - 1, -1, -1)
                for t in order:
                    h = ad.gru_cell(seq[t], h, gates)
                    states.append(h)
                outs[d] = states if d == "f" else states[::-1]
            if cfg.bidirectional_encoder:
                new_seq = [ad.concat([outs["f"][t], outs["b"][t]]) for t in range(T)]
                final = ad.concat([outs["f"][-1], outs["b"][0]])
            else:
                new_seq = outs["f"]
                final = outs["f"][-1]
            if layer < cfg.num_encoder_layers - 1 and rate:
                new_seq = [ad.dropout(s, rate, dropout_rng) for s in new_seq]
            seq = new_seq
        return ad.tanh(ad.add(ad.matmul(final, p["bridge.W"]), p["bridge.b"]))

    # -- training forward -----------------------------------------------------

    def group_loss(self, inputs, targets, lang_index, normalizer, dropout_rng=None,
                   collect_logits=False):
        """Loss contribution of a same-language, same-input-length group.

        inputs: tagged protoform id lists of equal length; targets: reflex id
        lists (EOS appended here); normalizer: token count the final mean
        divides by (supplied by the caller so groups combine into one mean).
        """
        p = self.params
        cfg = self.config
        rate = cfg.dropout if dropout_rng is not None else 0.0
        eos = self.vocab.eos_id
        B = len(inputs)
        in_ids = np.asarray(inputs, dtype=np.int64)
        h = self._encode_t(in_ids, rate, dropout_rng)

        tgt = [list(t) + [eos] for t in targets]
        tgt_ids, tgt_mask, _ = _pad_batch(tgt, self.vocab.pad_id)
        prev_ids = np.concatenate(
            [np.full((B, 1), self.vocab.bos_id, dtype=np.int64), tgt_ids[:, :-1]], axis=1
        )
        dec_p = _gate_view(p, "dec")
        w2, b2 = self._clf_weights(lang_index)
        one_hot = Tensor(self._one_hot(lang_index, B)) if cfg.one_hot_target_encoding else None
        lang_rows = (
            ad.embedding(p["lang_emb"], np.full(B, lang_index + 1, dtype=np.int64))
            if cfg.decode_with_language_embedding
            else None
        )
        step_losses, logits_steps = [], []
        for t in range(tgt_ids.shape[1]):
            x = ad.embedding(p["tok_emb"], prev_ids[:, t])
            if rate:
                x = ad.dropout(x, rate, dropout_rng)
            if lang_rows is not None:
                x = ad.concat([x, lang_rows])
            h = _masked_step(h, ad.gru_cell(x, h, dec_p), tgt_mask[:, t])
            h_in = ad.dropout(h, rate, dropout_rng) if rate else h
            clf_in = ad.concat([h_in, one_hot]) if one_hot is not None else h_in
            logits = self._classifier_t(clf_in, p["clf.W1"], p["clf.b1"], w2, b2)
            if collect_logits:
                logits_steps.append(logits)
            step_losses.append(
                ad.softmax_cross_entropy(logits, tgt_ids[:, t], tgt_mask[:, t], normalizer=normalizer)
            )
        return ad.add_scalars(step_losses), (logits_steps if collect_logits else None)

    def batch_loss(self, examples, dropout_rng=None):
        """Mean token loss over (input_ids, target_ids, language) examples."""
        groups: dict[tuple, list] = {}
        for ex in examples:
            groups.setdefault((ex[2], len(ex[0])), []).append(ex)
        total_tokens = float(sum(len(ex[1]) + 1 for ex in examples))
        losses = []
        for (lang, _), exs in sorted(groups.items()):
            loss, _ = self.group_loss(
                [ex[0] for ex in exs],
                [ex[1] for ex in exs],
                self.language_index(lang),
                normalizer=total_tokens,
                dropout_rng=dropout_rng,
            )
            losses.append(loss)
        return ad.add_scalars(losses)

    # -- inference ------------------------------------------------------------

    def encode_np(self, input_ids):
        p = self.params
        cfg = self.config
        x_all = p["tok_emb"].data[np.asarray(input_ids)][None, :, :]  # (1, T, E)
        seq = x_all
        dirs = ("f", "b") if cfg.bidirectional_encoder else ("f",)
        T = seq.shape[1]
        for layer in range(cfg.num_encoder_layers):
            outs = {}
            for d in dirs:
                gates = _gate_view(p, f"enc{layer}{d}")
                h = np.zeros((1, cfg.hidden_size))
                states = []
                order = range(T) if d == "f" else range(T - 1, -1, -1)
                for t in order:
                    h = ad.gru_cell_np(seq[:, t, :], h, gates)
                    states.append(h)
                outs[d] = states if d == "f" else states[::-1]
            if cfg.bidirectional_encoder:
                seq = np.stack(
                    [np.concatenate([outs["f"][t], outs["b"][t]], axis=1) for t in range(T)], axis=1
                )
                final = np.concatenate([outs["f"][-1], outs["b"][0]], axis=1)
            else:
                seq = np.stack(outs["f"], axis=1)
                final = outs["f"][-1]
        return np.tanh(final @ p["bridge.W"].data + p["bridge.b"].data)

    def decoder(self, tagged_input_ids, language: str) -> _GruStepper:
        p = self.params
        cfg = self.config
        li = self.language_index(language)
        w2, b2 = self._clf_weights(li)

        def step_input(toks):
            x = p["tok_emb"].data[toks]
            if cfg.decode_with_language_embedding:
                x = np.concatenate([x, p["lang_emb"].data[np.full(len(toks), li + 1)]], axis=1)
            return x

        def classify(h):
            if cfg.one_hot_target_encoding:
                h = np.concatenate([h, self._one_hot(li, h.shape[0])], axis=1)
            return self._classifier_np(h, p["clf.W1"], p["clf.b1"], w2, b2)

        return _GruStepper(
            h0=self.encode_np(tagged_input_ids),
            dec_params=_gate_view(p, "dec"),
            step_input_fn=step_input,
            classify_fn=classify,
            vocab_size=self.vocab.size,
            bos_id=self.vocab.bos_id,
            eos_id=self.vocab.eos_id,
            banned_ids=self.banned_output_ids(),
        )


# -- training loop ------------------------------------------------------------


def _recon_examples(dataset: Dataset, vocab: Vocabulary):
    from .corpus import assemble_reconstruction_input

    out = []
    for cs in dataset.sets:
        if cs.protoform is None:
            continue
        out.append(
            (assemble_reconstruction_input(cs, vocab, dataset.languages), vocab.encode(cs.protoform))
        )
    return out


def _reflex_examples(dataset: Dataset, vocab: Vocabulary):
    from .corpus import assemble_reflex_input

    out = []
    for cs in dataset.sets:
        if cs.protoform is None:
            continue
        for lang in dataset.languages:
            if lang in cs.reflexes:
                out.append(
                    (
                        assemble_reflex_input(cs.protoform, lang, vocab),
                        vocab.encode(cs.reflexes[lang]),
                        lang,
                    )
                )
    return out


def _greedy_val_ted(model, examples):
    """Mean token edit distance of greedy decodes against gold targets."""
    if not examples:
        return 0.0
    total = 0
    for ex in examples:
        if model.kind == "recon":
            stepper = model.decoder(ex[0])
        else:
            stepper = model.decoder(ex[0], ex[2])
        pred = dec.greedy_decode(stepper, model.max_decode_len)
        total += token_edit_distance(pred, ex[1])
    return total / len(examples)


def train(model, dataset: Dataset, log=None):
    """Mini-batch Adam training with periodic greedy validation and early stop.

    The dataset must be split-tagged.  Batches count cognate sets; for the
    reflex model each set contributes one example per present reflex.
    Returns the model (trained in place, best-validation parameters kept).
    """
    if dataset.split_tags is None:
        raise ConfigError("dataset must be split-tagged before training")
    cfg = model.config
    train_split = dataset.subset("train")
    val_split = dataset.subset("val")
    if not train_split.sets:
        raise TrainingError("empty train split")
    if model.kind == "recon":
        make = _recon_examples
    else:
        make = _reflex_examples
    train_sets = list(train_split.sets)
    val_examples = make(val_split, model.vocab)

    longest_target = max(
        (len(ex[1]) for ex in make(train_split, model.vocab)), default=10
    )
    model.max_decode_len = 2 * longest_target + 5

    if cfg.max_epochs == 0:
        return model

    opt = ad.Adam(
        model.parameters(),
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )
    best_val, best_params, bad_validations = np.inf, None, 0
    for epoch in range(cfg.max_epochs):
        rng = np.random.default_rng([cfg.seed, epoch])
        order = rng.permutation(len(train_sets))
        scale = ad.warmup_scale(epoch, cfg.warmup_epochs)
        epoch_loss, n_batches = 0.0, 0
        for b_start in range(0, len(order), cfg.batch_size):
            batch_sets = [train_sets[i] for i in order[b_start : b_start + cfg.batch_size]]
            batch = make(
                Dataset(dataset.languages, tuple(batch_sets)), model.vocab
            )
            if not batch:
                continue
            drop_rng = np.random.default_rng([cfg.seed, epoch, n_batches, 7919])
            if model.kind == "recon":
                loss, _ = model.batch_loss(
                    [ex[0] for ex in batch], [ex[1] for ex in batch], dropout_rng=drop_rng
                )
            else:
                loss = model.batch_loss(batch, dropout_rng=drop_rng)
            if not np.isfinite(float(loss.data)):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step(lr_scale=scale)
            epoch_loss += float(loss.data)
            n_batches += 1
        model.history.epoch_losses.append((epoch, epoch_loss / max(n_batches, 1)))
        if log:
            log(f"epoch {epoch}: loss {epoch_loss / max(n_batches, 1):.4f}")

        if (epoch + 1) % cfg.validate_every == 0 and val_examples:
            val_ted = _greedy_val_ted(model, val_examples)
            model.history.validations.append((epoch, val_ted))
            if log:
                log(f"epoch {epoch}: val TED {val_ted:.4f}")
            if val_ted < best_val:
                best_val, best_params = val_ted, model.snapshot()
                model.history.best_epoch = epoch
                bad_validations = 0
            else:
                bad_validations += 1
                if bad_validations >= cfg.patience:
                    break
    if best_params is not None:
        model.load_param_arrays(best_params)
    return model


def new_model(kind: str, config, vocab: Vocabulary):
    if kind == "recon":
        return ReconModel(config, vocab)
    if kind == "reflex":
        return ReflexModel(config, vocab)
    raise ConfigError(f"unknown model kind {kind!r}")

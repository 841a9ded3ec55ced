"""Minimal reverse-mode autodiff over numpy arrays, plus Adam and a gradient checker.

Just enough machinery for GRU encoder-decoder models: 64-bit values, a tape
recorded per forward pass, and backward rules for the handful of primitives
the models need.  No general broadcasting beyond bias rows and column masks.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, TrainingError


class Tensor:
    """A numpy array with an optional gradient accumulator and backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_rule", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward_rule=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.parents = parents
        self.backward_rule = backward_rule
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def has_nonfinite(self) -> bool:
        return not np.all(np.isfinite(self.data))

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self):
        """Reverse-mode sweep seeding d(self)/d(self) = 1."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar loss")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t.parents:
                visit(p)
            topo.append(t)

        visit(self)
        grads = {id(self): np.ones_like(self.data)}
        for t in reversed(topo):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t.grad is not None:
                t.grad += g
            if t.backward_rule is None:
                continue
            for parent, pg in t.backward_rule(g):
                if not (parent.requires_grad or parent.parents):
                    continue
                if id(parent) in grads:
                    grads[id(parent)] += pg
                else:
                    grads[id(parent)] = np.array(pg)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad}, name={self.name})"


def _tracked(*tensors) -> bool:
    return any(t.requires_grad or t.parents for t in tensors)


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may be a 1-D bias broadcast over rows of a."""
    out = a.data + b.data
    if out.shape != a.data.shape:
        raise DimensionError(f"add: incompatible shapes {a.shape} vs {b.shape}")

    def rule(g):
        gb = g.sum(axis=0) if b.data.ndim < g.ndim else g
        return ((a, g), (b, gb))

    return Tensor(out, parents=(a, b), backward_rule=rule) if _tracked(a, b) else Tensor(out)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting (e.g. column masks)."""
    out = a.data * b.data

    def unbroadcast(g, shape):
        while g.ndim > len(shape):
            g = g.sum(axis=0)
        for ax, n in enumerate(shape):
            if n == 1 and g.shape[ax] != 1:
                g = g.sum(axis=ax, keepdims=True)
        return g

    def rule(g):
        return (
            (a, unbroadcast(g * b.data, a.data.shape)),
            (b, unbroadcast(g * a.data, b.data.shape)),
        )

    return Tensor(out, parents=(a, b), backward_rule=rule) if _tracked(a, b) else Tensor(out)


def affine(x: Tensor, scale: float, shift: float) -> Tensor:
    """scale * x + shift with scalar constants (covers negation and 1 - x)."""
    out = scale * x.data + shift

    def rule(g):
        return ((x, scale * g),)

    return Tensor(out, parents=(x,), backward_rule=rule) if _tracked(x) else Tensor(out)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    out = a.data @ b.data

    def rule(g):
        return ((a, g @ b.data.T), (b, a.data.T @ g))

    return Tensor(out, parents=(a, b), backward_rule=rule) if _tracked(a, b) else Tensor(out)


def concat(tensors, axis=1) -> Tensor:
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def rule(g):
        parts = np.split(g, splits, axis=axis)
        return tuple(zip(tensors, parts))

    if _tracked(*tensors):
        return Tensor(out, parents=tuple(tensors), backward_rule=rule)
    return Tensor(out)


def narrow(x: Tensor, start: int, size: int, axis: int = 1) -> Tensor:
    """Contiguous slice along an axis."""
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, start + size)
    index = tuple(index)
    out = x.data[index]

    def rule(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return ((x, full),)

    return Tensor(out, parents=(x,), backward_rule=rule) if _tracked(x) else Tensor(out)


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def rule(g):
        return ((x, g * out * (1.0 - out)),)

    return Tensor(out, parents=(x,), backward_rule=rule) if _tracked(x) else Tensor(out)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def rule(g):
        return ((x, g * (1.0 - out * out)),)

    return Tensor(out, parents=(x,), backward_rule=rule) if _tracked(x) else Tensor(out)


def embedding(table: Tensor, ids) -> Tensor:
    """Gather rows of an embedding table."""
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]

    def rule(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return ((table, full),)

    return Tensor(out, parents=(table,), backward_rule=rule) if _tracked(table) else Tensor(out)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a mask drawn from the supplied generator."""
    if rate <= 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = x.data * mask

    def rule(g):
        return ((x, g * mask),)

    return Tensor(out, parents=(x,), backward_rule=rule) if _tracked(x) else Tensor(out)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax, log-sum-exp stabilized (plain numpy helper)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, targets, weights=None, normalizer=None) -> Tensor:
    """Weighted-mean cross-entropy over rows of logits.

    targets: int array of row labels; weights: per-row nonnegative floats
    (default all ones).  Reduction is sum(w_i * nll_i) / normalizer, with
    normalizer defaulting to sum(w_i) -- the mean-over-tokens convention
    once pad rows get weight 0.  Callers accumulating the loss over several
    decode steps pass the full token count as the normalizer.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != (logits.data.shape[0],):
        raise DimensionError("softmax_cross_entropy expects 2-D logits and row labels")
    w = np.ones(len(targets)) if weights is None else np.asarray(weights, dtype=np.float64)
    total = w.sum() if normalizer is None else float(normalizer)
    if total <= 0:
        raise DimensionError("softmax_cross_entropy: no weighted rows")
    logp = log_softmax_rows(logits.data)
    rows = np.arange(len(targets))
    out = -(w * logp[rows, targets]).sum() / total

    def rule(g):
        probs = np.exp(logp)
        grad = probs * (w / total)[:, None]
        grad[rows, targets] -= w / total
        return ((logits, g.reshape(()) * grad),)

    if _tracked(logits):
        return Tensor(out, parents=(logits,), backward_rule=rule)
    return Tensor(out)


def add_scalars(tensors) -> Tensor:
    out = np.array(sum(float(t.data) for t in tensors))

    def rule(g):
        return tuple((t, g.reshape(t.data.shape)) for t in tensors)

    if _tracked(*tensors):
        return Tensor(out, parents=tuple(tensors), backward_rule=rule)
    return Tensor(out)


def gru_cell(x: Tensor, h_prev: Tensor, params: dict) -> Tensor:
    """One GRU step: h_next = (1 - z) * h_prev + z * h_tilde.

    params holds W_z/U_z/b_z, W_r/U_r/b_r, W_h/U_h/b_h with W_* of shape
    (input, hidden) and U_* of shape (hidden, hidden).
    """
    z = sigmoid(add(add(matmul(x, params["W_z"]), matmul(h_prev, params["U_z"])), params["b_z"]))
    r = sigmoid(add(add(matmul(x, params["W_r"]), matmul(h_prev, params["U_r"])), params["b_r"]))
    h_tilde = tanh(
        add(add(matmul(x, params["W_h"]), matmul(mul(r, h_prev), params["U_h"])), params["b_h"])
    )
    return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, h_tilde))


def gru_cell_np(x: np.ndarray, h_prev: np.ndarray, params: dict) -> np.ndarray:
    """Inference-path twin of gru_cell on raw arrays (no tape)."""
    p = {k: (v.data if isinstance(v, Tensor) else v) for k, v in params.items()}
    z = 1.0 / (1.0 + np.exp(-(x @ p["W_z"] + h_prev @ p["U_z"] + p["b_z"])))
    r = 1.0 / (1.0 + np.exp(-(x @ p["W_r"] + h_prev @ p["U_r"] + p["b_r"])))
    h_tilde = np.tanh(x @ p["W_h"] + (r * h_prev) @ p["U_h"] + p["b_h"])
    return (1.0 - z) * h_prev + z * h_tilde


class Adam:
    """Bias-corrected Adam with optional decoupled weight decay and lr warmup."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr_scale: float = 1.0):
        self.t += 1
        lr = self.lr * lr_scale
        for i, p in enumerate(self.params):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1**self.t)
            v_hat = self.v[i] / (1.0 - self.beta2**self.t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data

    def state_arrays(self):
        return {"m": self.m, "v": self.v, "t": self.t}


def warmup_scale(epoch: int, warmup_epochs: int) -> float:
    """Linear warmup from 0 over warmup_epochs, then constant 1."""
    if warmup_epochs <= 0 or epoch >= warmup_epochs:
        return 1.0
    return (epoch + 1) / warmup_epochs


def gradient_check(loss_fn, params, eps=1e-5, rng=None, samples_per_param=5):
    """Max relative error between reverse-mode and central-difference grads.

    loss_fn() rebuilds the forward graph from the current parameter values
    and returns a scalar Tensor; it must be deterministic (fix any dropout
    seed) so that the +/- eps evaluations are comparable.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    for p in params:
        p.zero_grad()
    loss_fn().backward()
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        n = min(samples_per_param, flat.size)
        for idx in rng.choice(flat.size, size=n, replace=False):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = float(loss_fn().data.reshape(()))
            flat[idx] = orig - eps
            f_minus = float(loss_fn().data.reshape(()))
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            analytic = gflat[idx]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst

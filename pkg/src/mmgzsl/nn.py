"""Feed-forward network substrate: init, forward/backward, Adam, loss primitives.

Everything here works in float64. A layer computes ``act(x @ W.T + b)`` with
``W`` of shape ``(out, in)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeError

LEAKY_SLOPE = 0.01


class Activation(NamedTuple):
    kind: str  # "leaky_relu" | "relu" | "identity"
    slope: float = 0.0

    def __str__(self) -> str:
        if self.kind == "leaky_relu":
            return f"leaky_relu({self.slope!r})"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Activation":
        text = text.strip()
        if text in ("relu", "identity"):
            return cls(text)
        if text.startswith("leaky_relu(") and text.endswith(")"):
            return cls("leaky_relu", float(text[len("leaky_relu("):-1]))
        if text == "leaky_relu":
            return cls("leaky_relu", LEAKY_SLOPE)
        raise ConfigError(f"unknown activation {text!r}")


LEAKY = Activation("leaky_relu", LEAKY_SLOPE)
RELU = Activation("relu")
IDENTITY = Activation("identity")


@dataclass
class Mlp:
    """Stack of dense layers.

    Optional fixed (non-trainable) standardization: the first layer sees
    ``(x - input_shift) / input_scale`` and the last pre-activation is
    ``output_shift + output_scale * (W a + b)``, so the final activation acts
    on raw output units while the weights work in standardized ones.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[Activation]
    input_shift: np.ndarray | None = None
    input_scale: np.ndarray | None = None
    output_shift: np.ndarray | None = None
    output_scale: np.ndarray | None = None

    def __post_init__(self):
        for name, size in (("input_shift", self.layer_dims[0]), ("input_scale", self.layer_dims[0]),
                           ("output_shift", self.layer_dims[-1]),
                           ("output_scale", self.layer_dims[-1])):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=np.float64).reshape(-1)
                if value.shape != (size,):
                    raise ShapeError(f"{name} must have length {size}")
                setattr(self, name, value)
        n = len(self.layer_dims) - 1
        if len(self.weights) != n or len(self.biases) != n or len(self.activations) != n:
            raise ShapeError("weights/biases/activations must have one entry per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i + 1], self.layer_dims[i]):
                raise ShapeError(f"layer {i} weight shape {w.shape} does not match dims")
            if b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(f"layer {i} bias shape {b.shape} does not match dims")

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in the canonical order ``[W0, b0, W1, b1, ...]``.

        The arrays are the model's own buffers, so in-place updates apply.
        """
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def normalization(self) -> dict[str, np.ndarray | None]:
        return {k: getattr(self, k) for k in
                ("input_shift", "input_scale", "output_shift", "output_scale")}

    def copy(self) -> "Mlp":
        norm = {k: (None if v is None else v.copy()) for k, v in self.normalization().items()}
        return Mlp(list(self.layer_dims), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], list(self.activations), **norm)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)


def truncated_normal(rng: np.random.Generator, size, stddev: float = 0.01,
                     bound: float = 2.0) -> np.ndarray:
    """Normal(0, stddev) samples restricted to ``[-bound*stddev, bound*stddev]`` by rejection."""
    n = int(np.prod(size))
    out = np.empty(n)
    filled = 0
    while filled < n:
        draw = rng.standard_normal(max(2 * (n - filled), 16))
        draw = draw[np.abs(draw) <= bound][: n - filled]
        out[filled:filled + draw.size] = draw
        filled += draw.size
    return (out * stddev).reshape(size)


def init_mlp(layer_dims: Sequence[int], activations: Sequence[Activation | str],
             seed: int | np.random.Generator, stddev: float = 0.01, **normalization) -> Mlp:
    """Truncated-normal weights (mean 0, ``stddev``, cut at 2 stddev) and zero biases.

    Keyword arguments set the fixed input/output standardization of :class:`Mlp`.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ConfigError(f"layer_dims must have >= 2 positive entries, got {list(layer_dims)}")
    acts = [a if isinstance(a, Activation) else Activation.parse(a) for a in activations]
    if len(acts) != len(dims) - 1:
        raise ConfigError("need exactly one activation per weight layer")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = [truncated_normal(rng, (dims[i + 1], dims[i]), stddev) for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return Mlp(dims, weights, biases, acts, **normalization)


def _apply(act: Activation, h: np.ndarray) -> np.ndarray:
    if act.kind == "identity":
        return h
    if act.kind == "relu":
        return np.maximum(h, 0.0)
    return np.where(h > 0, h, act.slope * h)


def _derivative(act: Activation, h: np.ndarray) -> np.ndarray:
    # at exactly 0 the negative-side value is used
    if act.kind == "identity":
        return np.ones_like(h)
    if act.kind == "relu":
        return (h > 0).astype(h.dtype)
    return np.where(h > 0, 1.0, act.slope)


def _check_input(model: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ShapeError(f"expected batch of shape (n, {model.in_dim}), got {x.shape}")
    return x


def forward_cached(model: Mlp, x: np.ndarray):
    """Forward pass that also returns the per-layer (input, pre-activation) cache."""
    a = _check_input(model, x)
    if model.input_shift is not None:
        a = a - model.input_shift
    if model.input_scale is not None:
        a = a / model.input_scale
    cache = []
    last = len(model.weights) - 1
    for i, (w, b, act) in enumerate(zip(model.weights, model.biases, model.activations)):
        h = a @ w.T + b
        if i == last:
            if model.output_scale is not None:
                h = h * model.output_scale
            if model.output_shift is not None:
                h = h + model.output_shift
        cache.append((a, h))
        a = _apply(act, h)
    return a, cache


def forward(model: Mlp, x: np.ndarray) -> np.ndarray:
    return forward_cached(model, x)[0]


def backward(model: Mlp, x: np.ndarray, upstream: np.ndarray, cache=None):
    """Gradients of ``sum(upstream * forward(model, x))``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` follows
    ``model.params()`` ordering.
    """
    if cache is None:
        out, cache = forward_cached(model, x)
    else:
        out = None
    upstream = np.asarray(upstream, dtype=np.float64)
    n = cache[0][0].shape[0]
    if upstream.shape != (n, model.out_dim):
        raise ShapeError(f"upstream gradient shape {upstream.shape} != {(n, model.out_dim)}")
    grads: list[np.ndarray] = [None] * (2 * len(model.weights))  # type: ignore[list-item]
    g = upstream
    last = len(model.weights) - 1
    for i in range(last, -1, -1):
        a, h = cache[i]
        g = g * _derivative(model.activations[i], h)
        if i == last and model.output_scale is not None:
            g = g * model.output_scale
        grads[2 * i] = g.T @ a
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ model.weights[i]
    if model.input_scale is not None:
        g = g / model.input_scale
    return grads, g


@dataclass
class AdamState:
    step: int
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    learning_rate: float = 1e-4

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.epsilon <= 0 or self.learning_rate <= 0:
            raise ConfigError("Adam epsilon and learning_rate must be positive")


def adam_init(params: Sequence[np.ndarray], learning_rate: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                     beta1, beta2, epsilon, learning_rate)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """Bias-corrected Adam descent step. ``params`` are updated in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params, grads and optimizer state differ in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch in adam_step: {p.shape} vs {g.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    return params, state


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_nll(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood of integer ``labels`` and its logits gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError("labels must be a vector with one entry per row")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise DataError(f"labels must lie in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / n


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(log_sigmoid(x))


def gaussian_kl(mu, log_var) -> float:
    """KL(N(mu, diag(exp(log_var))) || N(0, I)).

    For 2-D input the per-row divergences are averaged over the batch.
    """
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise ShapeError("mu and log_var must have the same shape")
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(log_var))):
        raise NumericError("gaussian_kl received non-finite input")
    terms = 0.5 * (np.exp(log_var) + mu * mu - 1.0 - log_var)
    if mu.ndim == 1:
        return float(terms.sum())
    return float(terms.sum(axis=-1).mean())


def gaussian_kl_grad(mu: np.ndarray, log_var: np.ndarray):
    """Batch-mean KL with gradients w.r.t. ``mu`` and ``log_var`` (2-D inputs)."""
    value = gaussian_kl(mu, log_var)
    n = mu.shape[0]
    return value, mu / n, 0.5 * (np.exp(log_var) - 1.0) / n


@dataclass
class GradCheckReport:
    max_relative_error: float
    parameter_count_checked: int
    perturbation: float
    worst: tuple = field(default=(), repr=False)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_relative_error < tol


def check_gradients(loss_fn: Callable[[], float], params: Sequence[np.ndarray],
                    grads: Sequence[np.ndarray], n_probes: int = 100, h: float = 1e-5,
                    seed: int = 0, floor: float = 1e-7) -> GradCheckReport:
    """Compare analytic ``grads`` against central differences of ``loss_fn``.

    ``loss_fn`` re-evaluates the loss from the current contents of ``params``,
    which are perturbed in place and restored. Probes are drawn uniformly over
    all scalar parameters. Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    rng = np.random.default_rng(seed)
    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat_ids = rng.choice(total, size=min(n_probes, total), replace=False)
    worst_err, worst = 0.0, ()
    for fid in flat_ids:
        k = int(np.searchsorted(offsets, fid, side="right") - 1)
        idx = np.unravel_index(int(fid - offsets[k]), params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + h
        up = loss_fn()
        params[k][idx] = old - h
        down = loss_fn()
        params[k][idx] = old
        numeric = (up - down) / (2 * h)
        analytic = float(grads[k][idx])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        if err > worst_err:
            worst_err, worst = err, (k, idx, analytic, numeric)
    return GradCheckReport(worst_err, len(flat_ids), h, worst)

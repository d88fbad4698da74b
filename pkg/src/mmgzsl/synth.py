"""Conditional-VAE feature synthesis guided by a class-value regressor and an InfoNCE term.

Three networks: encoder ``x -> (mu, log_var)``, generator ``(z, c) -> x`` and
regressor ``x -> c``. The scalar class value is min-max normalized over the
declared class range before it is appended to ``z``; the regressor predicts the
raw ordinal value. Every loss below is a deterministic function of the model
and a :class:`SynthBatch` holding all random draws, so gradients can be
checked with the draws frozen.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .errors import ConfigError, DataError, NumericError, ShapeError, TrainingError
from .transform import standardization

NETS = ("encoder", "generator", "regressor")
HISTORY_COLUMNS = ("epoch", "L_CVAE", "L_c", "L_reg", "L_E", "L_CPC", "L_R_sup", "L_R_unsup")


@dataclass
class CvaeModel:
    encoder: nn.Mlp
    generator: nn.Mlp
    regressor: nn.Mlp
    latent_dim: int
    class_range: tuple[int, int]

    def __post_init__(self):
        L = self.latent_dim
        if self.encoder.out_dim != 2 * L:
            raise ShapeError("encoder must output 2 * latent_dim values")
        if self.generator.in_dim != L + 1:
            raise ShapeError("generator input must be latent_dim + 1")
        if self.generator.out_dim != self.encoder.in_dim or self.regressor.in_dim != self.encoder.in_dim:
            raise ShapeError("generator output, encoder input and regressor input must agree")
        if self.regressor.out_dim != 1:
            raise ShapeError("regressor must output a single value")
        lo, hi = self.class_range
        if hi <= lo:
            raise ConfigError("class_range must span at least two values")
        self.class_range = (int(lo), int(hi))

    @property
    def feature_dim(self) -> int:
        return self.generator.out_dim

    def nets(self) -> dict[str, nn.Mlp]:
        return {name: getattr(self, name) for name in NETS}

    def copy(self) -> "CvaeModel":
        return CvaeModel(self.encoder.copy(), self.generator.copy(), self.regressor.copy(),
                         self.latent_dim, self.class_range)

    def condition(self, c) -> np.ndarray:
        lo, hi = self.class_range
        return (np.asarray(c, dtype=np.float64) - lo) / (hi - lo)


@dataclass
class CpcConfig:
    temperature: float = 1.0
    augment_noise_stddev: float = 0.1
    augment_dropout_prob: float = 0.1
    negatives_per_anchor: int = 8

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError("cpc temperature must be positive")
        if not 0 <= self.augment_dropout_prob < 1:
            raise ConfigError("augment_dropout_prob must lie in [0, 1)")
        if self.augment_noise_stddev < 0 or self.negatives_per_anchor < 1:
            raise ConfigError("invalid augmentation noise or negatives_per_anchor")


@dataclass
class SynthTrainConfig:
    lambda_c: float = 0.1
    lambda_reg: float = 0.1
    lambda_E: float = 0.1
    lambda_cpc: float = 0.2
    lambda_R: float = 0.1
    pretrain_epochs: int = 25
    joint_epochs: int = 25
    batch_size: int = 64
    learning_rate: float = 1e-4
    seed: int = 0
    cpc: CpcConfig = field(default_factory=CpcConfig)
    class_prior: list[int] | None = None  # None: the seen classes of the training data
    latent_dim: int = 16
    encoder_hidden: tuple[int, ...] = (2000, 1000)
    generator_hidden: tuple[int, ...] = (1000,)
    regressor_hidden: tuple[int, ...] = (800,)
    init_stddev: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if isinstance(self.cpc, dict):
            self.cpc = CpcConfig(**self.cpc)
        for name in ("lambda_c", "lambda_reg", "lambda_E", "lambda_cpc", "lambda_R"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.pretrain_epochs < 0 or self.joint_epochs < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.batch_size <= 0 or self.learning_rate <= 0 or self.latent_dim <= 0:
            raise ConfigError("batch_size, learning_rate and latent_dim must be positive")
        self.encoder_hidden = tuple(self.encoder_hidden)
        self.generator_hidden = tuple(self.generator_hidden)
        self.regressor_hidden = tuple(self.regressor_hidden)

    def to_dict(self) -> dict:
        return asdict(self)


def init_cvae(feature_dim: int, class_range: tuple[int, int],
              config: SynthTrainConfig | None = None, features=None) -> CvaeModel:
    """Fresh model; ``features`` (training data) fix the input/output standardization."""
    config = config or SynthTrainConfig()
    rng = np.random.default_rng([config.seed, 7])
    L, D, sd = config.latent_dim, feature_dim, config.init_stddev
    norm_in, norm_out = {}, {}
    if features is not None:
        mean, scale = standardization(features)
        norm_in = dict(input_shift=mean, input_scale=scale)
        norm_out = dict(output_shift=mean, output_scale=scale)

    def acts(n_hidden):
        return [nn.LEAKY] * n_hidden + [nn.IDENTITY]

    enc = nn.init_mlp([D, *config.encoder_hidden, 2 * L], acts(len(config.encoder_hidden)),
                      rng, sd, **norm_in)
    gen = nn.init_mlp([L + 1, *config.generator_hidden, D], acts(len(config.generator_hidden)),
                      rng, sd, **norm_out)
    reg = nn.init_mlp([D, *config.regressor_hidden, 1], acts(len(config.regressor_hidden)),
                      rng, sd, **norm_in)
    return CvaeModel(enc, gen, reg, L, tuple(class_range))


def _zero_grads(model: CvaeModel) -> dict[str, list[np.ndarray]]:
    return {name: [np.zeros_like(p) for p in net.params()] for name, net in model.nets().items()}


def _add(total: list[np.ndarray], part: list[np.ndarray], weight: float = 1.0):
    for t, p in zip(total, part):
        t += weight * p


def _encode(model: CvaeModel, x: np.ndarray):
    out, cache = nn.forward_cached(model.encoder, x)
    L = model.latent_dim
    return out[:, :L], out[:, L:], cache


def _encoder_backward(model, x, cache, d_mu, d_log_var):
    return nn.backward(model.encoder, x, np.concatenate([d_mu, d_log_var], axis=1), cache)


def _generate(model: CvaeModel, z: np.ndarray, c: np.ndarray):
    inp = np.concatenate([z, model.condition(c)[:, None]], axis=1)
    out, cache = nn.forward_cached(model.generator, inp)
    return out, inp, cache


def _generator_backward(model, inp, cache, d_out):
    grads, d_inp = nn.backward(model.generator, inp, d_out, cache)
    return grads, d_inp[:, :model.latent_dim]


@dataclass
class LossResult:
    value: float
    grads: dict[str, list[np.ndarray]] = field(repr=False)
    parts: dict[str, float] = field(default_factory=dict)


def cvae_loss(model: CvaeModel, x, c, eps) -> LossResult:
    """Reconstruction ``mean_n |x - G(z, c)|^2`` with ``z = mu + exp(log_var / 2) * eps`` plus batch-mean KL."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise DataError("cvae_loss needs a non-empty batch")
    mu, log_var, enc_cache = _encode(model, x)
    std = np.exp(0.5 * log_var)
    z = mu + std * eps
    x_hat, g_inp, g_cache = _generate(model, z, c)
    diff = x_hat - x
    recon = float((diff ** 2).sum(axis=1).mean())
    kl, d_mu_kl, d_lv_kl = nn.gaussian_kl_grad(mu, log_var)
    if not np.isfinite(recon + kl):
        raise NumericError("non-finite CVAE loss")

    grads = _zero_grads(model)
    g_gen, d_z = _generator_backward(model, g_inp, g_cache, 2.0 * diff / len(x))
    _add(grads["generator"], g_gen)
    d_mu = d_z + d_mu_kl
    d_lv = d_z * eps * 0.5 * std + d_lv_kl
    g_enc, _ = _encoder_backward(model, x, enc_cache, d_mu, d_lv)
    _add(grads["encoder"], g_enc)
    return LossResult(recon + kl, grads, {"recon": recon, "kl": kl})


def regressor_loss(model: CvaeModel, x_lab, c_lab, x_syn=None, c_syn=None,
                   lambda_R: float = 0.1) -> LossResult:
    """``L_Sup + lambda_R * L_Unsup``, both mean squared class-value errors.

    Synthesized features are inputs only: no gradient reaches the generator.
    """
    x_lab = np.asarray(x_lab, dtype=np.float64)
    if len(x_lab) == 0:
        raise DataError("regressor_loss needs labeled samples")
    grads = _zero_grads(model)
    pred, cache = nn.forward_cached(model.regressor, x_lab)
    err = pred[:, 0] - np.asarray(c_lab, dtype=np.float64)
    sup = float((err ** 2).mean())
    g, _ = nn.backward(model.regressor, x_lab, (2.0 * err / len(err))[:, None], cache)
    _add(grads["regressor"], g)
    unsup = 0.0
    if x_syn is not None and len(x_syn):
        x_syn = np.asarray(x_syn, dtype=np.float64)
        pred, cache = nn.forward_cached(model.regressor, x_syn)
        err = pred[:, 0] - np.asarray(c_syn, dtype=np.float64)
        unsup = float((err ** 2).mean())
        g, _ = nn.backward(model.regressor, x_syn, (2.0 * lambda_R * err / len(err))[:, None], cache)
        _add(grads["regressor"], g)
    return LossResult(sup + lambda_R * unsup, grads, {"sup": sup, "unsup": unsup})


def lc_loss(model: CvaeModel, z, c) -> LossResult:
    """``mean (R(G(z, c)) - c)^2``; the regressor is frozen (its gradients stay zero)."""
    c = np.asarray(c, dtype=np.float64)
    x_hat, g_inp, g_cache = _generate(model, z, c)
    pred, r_cache = nn.forward_cached(model.regressor, x_hat)
    err = pred[:, 0] - c
    value = float((err ** 2).mean())
    _, d_x = nn.backward(model.regressor, x_hat, (2.0 * err / len(err))[:, None], r_cache)
    grads = _zero_grads(model)
    g_gen, _ = _generator_backward(model, g_inp, g_cache, d_x)
    _add(grads["generator"], g_gen)
    return LossResult(value, grads)


def nearest_class_targets(x_hat: np.ndarray, c: np.ndarray,
                          reference: dict[int, np.ndarray]) -> np.ndarray:
    """For each row: the L2-nearest reference feature of the class closest in value to ``c``.

    Ties in class value go to the lower class.
    """
    if not reference:
        raise DataError("lreg_loss needs reference training features")
    classes = np.array(sorted(reference))
    out = np.empty_like(x_hat)
    for i, (row, cv) in enumerate(zip(x_hat, c)):
        k = int(classes[np.argmin(np.abs(classes - cv))])
        pool = reference[k]
        if len(pool) == 0:
            raise DataError(f"no training samples for class {k}")
        out[i] = pool[np.argmin(((pool - row) ** 2).sum(axis=1))]
    return out


def lreg_loss(model: CvaeModel, z, c, reference: dict[int, np.ndarray]) -> LossResult:
    """``mean |G(z, c) - t|^2`` with ``t`` the nearest training feature of the closest class."""
    c = np.asarray(c, dtype=np.float64)
    x_hat, g_inp, g_cache = _generate(model, z, c)
    target = nearest_class_targets(x_hat, c, reference)
    diff = x_hat - target
    value = float((diff ** 2).sum(axis=1).mean())
    grads = _zero_grads(model)
    g_gen, _ = _generator_backward(model, g_inp, g_cache, 2.0 * diff / len(diff))
    _add(grads["generator"], g_gen)
    return LossResult(value, grads)


def le_loss(model: CvaeModel, z, c) -> LossResult:
    """Batch-mean KL of the encoder posterior on ``G(z, c)`` from N(0, I); trains both networks."""
    x_hat, g_inp, g_cache = _generate(model, z, c)
    mu, log_var, e_cache = _encode(model, x_hat)
    value, d_mu, d_lv = nn.gaussian_kl_grad(mu, log_var)
    grads = _zero_grads(model)
    g_enc, d_x = _encoder_backward(model, x_hat, e_cache, d_mu, d_lv)
    _add(grads["encoder"], g_enc)
    g_gen, _ = _generator_backward(model, g_inp, g_cache, d_x)
    _add(grads["generator"], g_gen)
    return LossResult(value, grads)


@dataclass
class ContrastiveSet:
    anchor: np.ndarray
    positive: np.ndarray
    negatives: np.ndarray  # (n_neg, D)
    target_class: int


def augment(x: np.ndarray, rng: np.random.Generator, noise_stddev: float,
            dropout_prob: float) -> np.ndarray:
    """Additive Gaussian noise followed by random coordinate dropout."""
    out = x + rng.standard_normal(x.shape) * noise_stddev if noise_stddev > 0 else x.copy()
    if dropout_prob > 0:
        out = out * (rng.random(x.shape) >= dropout_prob)
    return out


def make_contrastive_sets(x_in, c_in, x_out, c_out, config: CpcConfig,
                          rng: np.random.Generator) -> list[ContrastiveSet]:
    """Anchor/positive: two augmentations of ``x_out``; negatives: augmented batch
    features (inputs and outputs) whose class differs from ``c_out``."""
    x_in, x_out = np.asarray(x_in, float), np.asarray(x_out, float)
    c_in, c_out = np.asarray(c_in), np.asarray(c_out)
    pool = np.concatenate([x_out, x_in])
    pool_c = np.concatenate([c_out, c_in])
    if len(np.unique(pool_c)) < 2:
        raise DataError("contrastive sets need at least two classes in the batch; "
                        "use a larger batch")
    sets = []
    k = config.negatives_per_anchor
    sd, p = config.augment_noise_stddev, config.augment_dropout_prob
    for target, cls in zip(x_out, c_out):
        cand = np.flatnonzero(pool_c != cls)
        if len(cand) == 0:
            raise DataError(f"no negatives of a class other than {cls} in the batch; "
                            "use a larger batch")
        pick = rng.choice(cand, size=k, replace=len(cand) < k)
        sets.append(ContrastiveSet(
            anchor=augment(target, rng, sd, p),
            positive=augment(target, rng, sd, p),
            negatives=augment(pool[pick], rng, sd, p),
            target_class=int(cls)))
    return sets


def _unit(v: np.ndarray):
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise NumericError("zero-norm vector in cosine similarity")
    return v / norm, norm


def info_nce(pred: np.ndarray, candidates: np.ndarray, temperature: float = 1.0):
    """Mean InfoNCE with candidate 0 as the positive, and its gradient w.r.t. ``pred``.

    ``pred``: (k, D); ``candidates``: (k, m, D). Similarity is the cosine.
    """
    p_hat, p_norm = _unit(pred)
    q_hat, _ = _unit(candidates)
    cos = np.einsum("kd,kmd->km", p_hat, q_hat)
    logits = cos / temperature
    top = logits.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(logits - top).sum(axis=1))
    value = float((lse - logits[:, 0]).mean())
    k = len(pred)
    d_logits = np.exp(logits - lse[:, None])
    d_logits[:, 0] -= 1.0
    d_cos = d_logits / (temperature * k)
    # d cos(p, q) / dp = (q_hat - cos * p_hat) / |p|
    d_phat = np.einsum("km,kmd->kd", d_cos, q_hat)
    d_pred = (d_phat - (d_cos * cos).sum(axis=1, keepdims=True) * p_hat) / p_norm
    return value, d_pred


def stack_sets(sets: list[ContrastiveSet]) -> np.ndarray:
    """Candidates array (k, 1 + n_neg, D) with the positive first."""
    return np.stack([np.concatenate([s.positive[None], s.negatives]) for s in sets])


def cpc_loss(model: CvaeModel, x_in, c_out, eps, candidates,
             temperature: float = 1.0) -> LossResult:
    """InfoNCE of the prediction ``G(z(x_in), c_out)`` against positive + negatives.

    Prediction and candidates are compared in the generator's standardized
    output space when it has one, so a shared feature offset does not swamp
    the cosine.
    """
    x_in = np.asarray(x_in, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim != 3 or candidates.shape[1] < 2:
        raise DataError("each contrastive set needs a positive and at least one negative")
    mu, log_var, e_cache = _encode(model, x_in)
    std = np.exp(0.5 * log_var)
    z = mu + std * eps
    pred, g_inp, g_cache = _generate(model, z, np.asarray(c_out, dtype=np.float64))
    shift = model.generator.output_shift
    scale = model.generator.output_scale
    shift = 0.0 if shift is None else shift
    scale = 1.0 if scale is None else scale
    value, d_pred = info_nce((pred - shift) / scale, (candidates - shift) / scale, temperature)
    grads = _zero_grads(model)
    g_gen, d_z = _generator_backward(model, g_inp, g_cache, d_pred / scale)
    _add(grads["generator"], g_gen)
    g_enc, _ = _encoder_backward(model, x_in, e_cache, d_z, d_z * eps * 0.5 * std)
    _add(grads["encoder"], g_enc)
    return LossResult(value, grads)


@dataclass
class SynthBatch:
    """Every random draw behind one encoder/generator step."""

    x: np.ndarray
    c: np.ndarray
    eps: np.ndarray
    prior_z: np.ndarray
    prior_c: np.ndarray
    cpc_x_in: np.ndarray
    cpc_c_in: np.ndarray
    cpc_c_out: np.ndarray
    cpc_eps: np.ndarray
    cpc_candidates: np.ndarray
    reference: dict[int, np.ndarray] = field(repr=False)


def sample_prior(model: CvaeModel, n: int, class_values, rng: np.random.Generator):
    z = rng.standard_normal((n, model.latent_dim))
    c = rng.choice(np.asarray(class_values), size=n).astype(np.float64)
    return z, c


def cpc_pairs(features: np.ndarray, classes: np.ndarray, n: int, rng: np.random.Generator):
    """``n`` (x_in, c_in, x_out, c_out) tuples over uniformly drawn ordered pairs of distinct classes."""
    values = np.unique(classes)
    if len(values) < 2:
        raise DataError("contrastive pairs need at least two seen classes")
    by_class = {int(v): np.flatnonzero(classes == v) for v in values}
    c_in = rng.choice(values, size=n)
    offset = rng.integers(1, len(values), size=n)
    c_out = values[(np.searchsorted(values, c_in) + offset) % len(values)]
    i_in = np.array([rng.choice(by_class[int(v)]) for v in c_in])
    i_out = np.array([rng.choice(by_class[int(v)]) for v in c_out])
    return features[i_in], c_in, features[i_out], c_out


def draw_batch(model: CvaeModel, x, c, features, classes, reference, config: SynthTrainConfig,
               class_prior, rng: np.random.Generator) -> SynthBatch:
    n = len(x)
    eps = rng.standard_normal((n, model.latent_dim))
    prior_z, prior_c = sample_prior(model, n, class_prior, rng)
    x_in, c_in, x_out, c_out = cpc_pairs(features, classes, n, rng)
    sets = make_contrastive_sets(x_in, c_in, x_out, c_out, config.cpc, rng)
    cpc_eps = rng.standard_normal((n, model.latent_dim))
    return SynthBatch(x, c.astype(np.float64), eps, prior_z, prior_c, x_in, c_in,
                      c_out.astype(np.float64), cpc_eps, stack_sets(sets), reference)


def total_loss(model: CvaeModel, batch: SynthBatch, config: SynthTrainConfig) -> LossResult:
    """``L_CVAE + lambda_c L_c + lambda_reg L_reg + lambda_E L_E + lambda_cpc L_CPC``.

    Regressor gradients are always zero here; the regressor has its own step.
    """
    parts = {
        "L_CVAE": cvae_loss(model, batch.x, batch.c, batch.eps),
        "L_c": lc_loss(model, batch.prior_z, batch.prior_c),
        "L_reg": lreg_loss(model, batch.prior_z, batch.prior_c, batch.reference),
        "L_E": le_loss(model, batch.prior_z, batch.prior_c),
        "L_CPC": cpc_loss(model, batch.cpc_x_in, batch.cpc_c_out, batch.cpc_eps,
                          batch.cpc_candidates, config.cpc.temperature),
    }
    weights = {"L_CVAE": 1.0, "L_c": config.lambda_c, "L_reg": config.lambda_reg,
               "L_E": config.lambda_E, "L_CPC": config.lambda_cpc}
    grads = _zero_grads(model)
    value = 0.0
    for name, res in parts.items():
        value += weights[name] * res.value
        for net in ("encoder", "generator"):
            _add(grads[net], res.grads[net], weights[name])
    return LossResult(value, grads, {k: v.value for k, v in parts.items()})


@dataclass
class SynthHistory:
    rows: list[tuple] = field(default_factory=list)

    columns = HISTORY_COLUMNS

    def column(self, name: str) -> list[float]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _reference(features: np.ndarray, classes: np.ndarray) -> dict[int, np.ndarray]:
    return {int(v): features[classes == v] for v in np.unique(classes)}


def train_synth(model: CvaeModel, features, classes, config: SynthTrainConfig,
                log=None) -> tuple[CvaeModel, SynthHistory]:
    """CVAE pre-training, then alternating regressor / encoder-generator steps.

    Only the given (seen-class) features are consumed. Returns a trained copy.
    """
    x_all = np.asarray(features, dtype=np.float64)
    c_all = np.asarray(classes)
    if len(x_all) == 0:
        raise DataError("train_synth needs training features")
    if len(np.unique(c_all)) < 2:
        raise DataError("train_synth needs features from at least two seen classes")
    if x_all.shape[1] != model.feature_dim:
        raise ShapeError(f"features have dim {x_all.shape[1]}, model expects {model.feature_dim}")
    model = model.copy()
    rng = np.random.default_rng([config.seed, 11])
    prior = np.asarray(config.class_prior if config.class_prior is not None
                       else np.unique(c_all), dtype=np.float64)
    lo, hi = model.class_range
    if prior.min() < lo or prior.max() > hi:
        raise ConfigError(f"class_prior {prior.tolist()} outside class range {model.class_range}")
    reference = _reference(x_all, c_all)
    opt_kw = dict(learning_rate=config.learning_rate, beta1=config.beta1, beta2=config.beta2)
    eg_params = model.encoder.params() + model.generator.params()
    eg_opt = nn.adam_init(eg_params, **opt_kw)
    r_params = model.regressor.params()
    r_opt = nn.adam_init(r_params, **opt_kw)
    history = SynthHistory()
    n = len(x_all)

    for epoch in range(config.pretrain_epochs + config.joint_epochs):
        joint = epoch >= config.pretrain_epochs
        sums = np.zeros(len(HISTORY_COLUMNS) - 1)
        count = 0
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            x, c = x_all[idx], c_all[idx].astype(np.float64)
            if not joint:
                eps = rng.standard_normal((len(x), model.latent_dim))
                res = cvae_loss(model, x, c, eps)
                nn.adam_step(eg_params, res.grads["encoder"] + res.grads["generator"], eg_opt)
                sums[0] += res.value
                count += 1
                continue
            z, pc = sample_prior(model, len(x), prior, rng)
            x_syn, _, _ = _generate(model, z, pc)
            reg = regressor_loss(model, x, c, x_syn, pc, config.lambda_R)
            nn.adam_step(r_params, reg.grads["regressor"], r_opt)

            batch = draw_batch(model, x, c, x_all, c_all, reference, config, prior, rng)
            res = total_loss(model, batch, config)
            nn.adam_step(eg_params, res.grads["encoder"] + res.grads["generator"], eg_opt)
            p = res.parts
            sums += (p["L_CVAE"], p["L_c"], p["L_reg"], p["L_E"], p["L_CPC"],
                     reg.parts["sup"], reg.parts["unsup"])
            count += 1
        means = sums / max(count, 1)
        if not np.all(np.isfinite(means)):
            raise TrainingError("non-finite synthesis loss", epoch)
        history.rows.append((epoch, *map(float, means)))
        if log is not None:
            log("synth epoch {}: ".format(epoch) + " ".join(
                f"{k}={v:.4f}" for k, v in zip(HISTORY_COLUMNS[1:], means)))
    return model, history


def generate_features(model: CvaeModel, class_value: float, count: int, seed,
                      decoder_stddev: float = 1.0) -> np.ndarray:
    """``count`` draws from the decoder ``N(G(z, c), decoder_stddev^2 I)`` with ``z ~ N(0, I)``.

    The default unit variance is the one implied by the squared-error
    reconstruction term; ``decoder_stddev=0`` returns the decoder means.
    """
    if decoder_stddev < 0:
        raise ConfigError("decoder_stddev must be non-negative")
    lo, hi = model.class_range
    if not lo <= class_value <= hi:
        raise ConfigError(f"class value {class_value} outside declared range {model.class_range}")
    if count == 0:
        return np.zeros((0, model.feature_dim))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, model.latent_dim))
    out, _, _ = _generate(model, z, np.full(count, float(class_value)))
    if decoder_stddev > 0:
        out = out + decoder_stddev * rng.standard_normal(out.shape)
    return out


def reconstruction_mse(model: CvaeModel, features, classes) -> float:
    """Mean squared reconstruction error using the posterior mean (no sampling)."""
    x = np.asarray(features, dtype=np.float64)
    mu, _, _ = _encode(model, x)
    x_hat, _, _ = _generate(model, mu, np.asarray(classes, dtype=np.float64))
    return float(((x_hat - x) ** 2).sum(axis=1).mean())

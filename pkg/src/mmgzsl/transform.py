"""Cycle-consistent translation between the MRI (X) and DP (Y) feature spaces.

``G: X -> Y`` and ``F: Y -> X`` are one-hidden-layer MLPs; ``D_X``/``D_Y`` emit a
raw logit and the adversarial terms are evaluated through a stable log-sigmoid.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import nn
from .errors import ConfigError, DataError, ShapeError, TrainingError

NETS = ("G", "F", "D_X", "D_Y")


@dataclass
class CycleModel:
    """The two generators and two discriminators."""

    G: nn.Mlp
    F: nn.Mlp
    D_X: nn.Mlp
    D_Y: nn.Mlp

    def __post_init__(self):
        dx, dy = self.G.in_dim, self.G.out_dim
        if self.F.in_dim != dy or self.F.out_dim != dx:
            raise ShapeError("F must map dim(Y) -> dim(X)")
        if self.D_X.in_dim != dx or self.D_Y.in_dim != dy:
            raise ShapeError("discriminator input dims must match their domains")
        if self.D_X.out_dim != 1 or self.D_Y.out_dim != 1:
            raise ShapeError("discriminators must output a single logit")

    @property
    def dim_x(self) -> int:
        return self.G.in_dim

    @property
    def dim_y(self) -> int:
        return self.G.out_dim

    def nets(self) -> dict[str, nn.Mlp]:
        return {name: getattr(self, name) for name in NETS}

    def copy(self) -> "CycleModel":
        return CycleModel(*(getattr(self, n).copy() for n in NETS))


def standardization(features) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and stddev (zero stddev replaced by 1)."""
    features = np.asarray(features, dtype=np.float64)
    scale = features.std(axis=0)
    return features.mean(axis=0), np.where(scale > 1e-12, scale, 1.0)


@dataclass
class CycleTrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-4
    cycle_weight: float = 10.0
    seed: int = 0
    generator_hidden: int = 4096
    discriminator_hidden: int = 2048
    beta1: float = 0.9
    beta2: float = 0.999
    # "minimax" descends log(1 - D(G(x))); "non_saturating" ascends log D(G(x))
    generator_objective: str = "minimax"
    init_stddev: float = 0.01
    discriminator_learning_rate: float | None = None  # None: use learning_rate
    restarts: int = 1

    def __post_init__(self):
        for name in ("batch_size", "learning_rate", "generator_hidden", "discriminator_hidden",
                     "init_stddev", "restarts"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0 or self.cycle_weight < 0:
            raise ConfigError("epochs and cycle_weight must be non-negative")
        if self.generator_objective not in ("minimax", "non_saturating"):
            raise ConfigError("generator_objective must be 'minimax' or 'non_saturating'")

    def to_dict(self) -> dict:
        return asdict(self)


def init_cycle(dim_x: int, dim_y: int, config: CycleTrainConfig | None = None,
               seed: int | None = None, mri=None, dp=None) -> CycleModel:
    """Fresh model.

    When training features ``mri``/``dp`` are given, every network standardizes
    its input with that domain's statistics and the generators emit their
    pre-activation in standardized target units, so at initialization each
    generator outputs roughly the target mean and no ReLU output starts dead.
    """
    config = config or CycleTrainConfig()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    gh, dh = config.generator_hidden, config.discriminator_hidden
    sd = config.init_stddev
    x_in = y_in = x_out = y_out = {}
    if mri is not None:
        m, s = standardization(mri)
        x_in, x_out = dict(input_shift=m, input_scale=s), dict(output_shift=m, output_scale=s)
    if dp is not None:
        m, s = standardization(dp)
        y_in, y_out = dict(input_shift=m, input_scale=s), dict(output_shift=m, output_scale=s)
    gen_acts = [nn.LEAKY, nn.RELU]
    disc_acts = [nn.LEAKY, nn.IDENTITY]
    return CycleModel(
        G=nn.init_mlp([dim_x, gh, dim_y], gen_acts, rng, sd, **x_in, **y_out),
        F=nn.init_mlp([dim_y, gh, dim_x], gen_acts, rng, sd, **y_in, **x_out),
        D_X=nn.init_mlp([dim_x, dh, 1], disc_acts, rng, sd, **x_in),
        D_Y=nn.init_mlp([dim_y, dh, 1], disc_acts, rng, sd, **y_in),
    )


@dataclass
class AdversarialResult:
    L_adv_GDY: float
    L_adv_FDX: float
    grads: dict[str, list[np.ndarray]] = field(repr=False)


def _check_batches(model: CycleModel, batch_x, batch_y):
    bx = np.asarray(batch_x, dtype=np.float64)
    by = np.asarray(batch_y, dtype=np.float64)
    if len(bx) == 0 or len(by) == 0:
        raise DataError("adversarial/cycle losses need non-empty batches")
    if bx.shape[1:] != (model.dim_x,) or by.shape[1:] != (model.dim_y,):
        raise ShapeError(f"batch dims {bx.shape}, {by.shape} do not match model "
                         f"({model.dim_x}, {model.dim_y})")
    return bx, by


def _zero_grads(model: CycleModel) -> dict[str, list[np.ndarray]]:
    return {name: [np.zeros_like(p) for p in net.params()] for name, net in model.nets().items()}


def _accumulate(total: list[np.ndarray], part: list[np.ndarray]):
    for t, p in zip(total, part):
        t += p


def _adv_term(gen: nn.Mlp, disc: nn.Mlp, real: np.ndarray, source: np.ndarray,
              gen_grads, disc_grads, objective: str = "minimax") -> float:
    """``E[log s(D(real))] + E[log(1 - s(D(gen(source))))]`` with gradients.

    Discriminator gradients always belong to that value. Generator gradients
    belong to it too under "minimax"; under "non_saturating" they are the
    gradient of ``-E[log s(D(gen(source)))]`` instead (same descent sign).
    """
    fake, gen_cache = nn.forward_cached(gen, source)
    real_logit, real_cache = nn.forward_cached(disc, real)
    fake_logit, fake_cache = nn.forward_cached(disc, fake)
    value = nn.log_sigmoid(real_logit).mean() + nn.log_sigmoid(-fake_logit).mean()

    d_real = nn.sigmoid(-real_logit) / len(real)
    d_fake = -nn.sigmoid(fake_logit) / len(source)
    g_real, _ = nn.backward(disc, real, d_real, real_cache)
    g_fake, d_input = nn.backward(disc, fake, d_fake, fake_cache)
    _accumulate(disc_grads, g_real)
    _accumulate(disc_grads, g_fake)
    if objective == "non_saturating":
        _, d_input = nn.backward(disc, fake, -nn.sigmoid(-fake_logit) / len(source), fake_cache)
    g_gen, _ = nn.backward(gen, source, d_input, gen_cache)
    _accumulate(gen_grads, g_gen)
    return float(value)


def adversarial_losses(model: CycleModel, batch_x, batch_y,
                       objective: str = "minimax") -> AdversarialResult:
    """Both adversarial terms and the gradient of their sum w.r.t. every network.

    Gradients are of the plain value: the discriminator step ascends them, the
    generator step descends them.
    """
    bx, by = _check_batches(model, batch_x, batch_y)
    grads = _zero_grads(model)
    l_gdy = _adv_term(model.G, model.D_Y, by, bx, grads["G"], grads["D_Y"], objective)
    l_fdx = _adv_term(model.F, model.D_X, bx, by, grads["F"], grads["D_X"], objective)
    return AdversarialResult(l_gdy, l_fdx, grads)


def _cycle_term(first: nn.Mlp, second: nn.Mlp, x: np.ndarray, first_grads, second_grads) -> float:
    mid, c1 = nn.forward_cached(first, x)
    back, c2 = nn.forward_cached(second, mid)
    diff = back - x
    value = np.abs(diff).sum(axis=1).mean()
    g2, d_mid = nn.backward(second, mid, np.sign(diff) / len(x), c2)
    g1, _ = nn.backward(first, x, d_mid, c1)
    _accumulate(second_grads, g2)
    _accumulate(first_grads, g1)
    return float(value)


def cycle_loss(model: CycleModel, batch_x, batch_y):
    """``E_x |F(G(x)) - x|_1 + E_y |G(F(y)) - y|_1`` and gradients for G and F."""
    bx, by = _check_batches(model, batch_x, batch_y)
    grads = _zero_grads(model)
    value = _cycle_term(model.G, model.F, bx, grads["G"], grads["F"])
    value += _cycle_term(model.F, model.G, by, grads["F"], grads["G"])
    return value, grads


def translate(model: CycleModel, mri_features) -> np.ndarray:
    x = np.asarray(mri_features, dtype=np.float64)
    if x.ndim == 2 and x.shape[0] == 0 and x.shape[1] in (0, model.dim_x):
        return np.zeros((0, model.dim_y))
    if x.ndim != 2 or x.shape[1] != model.dim_x:
        raise ShapeError(f"expected features of dim {model.dim_x}, got shape {x.shape}")
    return nn.forward(model.G, x)


def translate_back(model: CycleModel, dp_features) -> np.ndarray:
    y = np.asarray(dp_features, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != model.dim_y:
        raise ShapeError(f"expected features of dim {model.dim_y}, got shape {y.shape}")
    return nn.forward(model.F, y)


@dataclass
class CycleHistory:
    epoch: list[int] = field(default_factory=list)
    L_adv_GDY: list[float] = field(default_factory=list)
    L_adv_FDX: list[float] = field(default_factory=list)
    L_cyc: list[float] = field(default_factory=list)
    # energy distance of every restart; empty for a single run
    restart_scores: list[float] = field(default_factory=list)
    selected_restart: int = 0

    columns = ("epoch", "L_adv_GDY", "L_adv_FDX", "L_cyc")

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.columns)))


def _batches(n_x: int, n_y: int, batch_size: int, rng: np.random.Generator):
    """Index batches; one shared permutation when both sides have equal size."""
    px = rng.permutation(n_x)
    py = px.copy() if n_x == n_y else rng.permutation(n_y)
    n = max(n_x, n_y)
    for start in range(0, n, batch_size):
        pos = np.arange(start, min(start + batch_size, n))
        yield px[pos % n_x], py[pos % n_y]


def discriminator_step_grads(model: CycleModel, batch_x, batch_y) -> list[np.ndarray]:
    """Descent direction for ``D_X`` then ``D_Y`` parameters (they maximize the adversarial terms)."""
    adv = adversarial_losses(model, batch_x, batch_y)
    return [-g for g in adv.grads["D_X"] + adv.grads["D_Y"]]


def energy_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample energy distance ``2E|a-b| - E|a-a'| - E|b-b'|`` (V-statistic)."""
    return float(2 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean())


def translation_score(model: CycleModel, x: np.ndarray, y: np.ndarray,
                      max_samples: int = 800, seed: int = 0) -> float:
    """Marginal mismatch of G(x) vs y plus F(y) vs x; uses no pairing."""
    rng = np.random.default_rng(seed)
    sx = rng.permutation(len(x))[:max_samples]
    sy = rng.permutation(len(y))[:max_samples]
    return (energy_distance(translate(model, x[sx]), y[sy])
            + energy_distance(translate_back(model, y[sy]), x[sx]))


def _reinitialized(model: CycleModel, rng: np.random.Generator, stddev: float) -> CycleModel:
    nets = {}
    for name, net in model.nets().items():
        fresh = nn.init_mlp(net.layer_dims, net.activations, rng, stddev)
        nets[name] = nn.Mlp(fresh.layer_dims, fresh.weights, fresh.biases, fresh.activations,
                            **{k: None if v is None else v.copy()
                               for k, v in net.normalization().items()})
    return CycleModel(**nets)


def train_cycle(model: CycleModel, mri, dp, config: CycleTrainConfig,
                log=None) -> tuple[CycleModel, CycleHistory]:
    """Alternating discriminator ascent / generator descent; returns a trained copy.

    With ``config.restarts > 1`` the first run starts from ``model`` and each
    further run from a fresh seeded initialization (same standardization); the
    run whose translations best match the opposite marginal is kept. Unpaired
    losses cannot tell a map from its composition with a symmetry of the data,
    and restarts let a distribution-level criterion choose between basins.
    """
    x = np.asarray(mri, dtype=np.float64)
    y = np.asarray(dp, dtype=np.float64)
    if len(x) == 0 or len(y) == 0:
        raise DataError("train_cycle needs non-empty MRI and DP feature sets")
    _check_batches(model, x[:1], y[:1])
    if config.restarts == 1:
        return _train_once(model.copy(), x, y, config, np.random.default_rng([config.seed, 1]), log)

    best = None
    scores = []
    for r in range(config.restarts):
        start = model.copy() if r == 0 else _reinitialized(
            model, np.random.default_rng([config.seed, 2, r]), config.init_stddev)
        trained, history = _train_once(start, x, y, config,
                                       np.random.default_rng([config.seed, 1, r]), log)
        scores.append(translation_score(trained, x, y, seed=config.seed))
        if log is not None:
            log(f"cycle restart {r}: translation score {scores[-1]:.5f}")
        if best is None or scores[-1] < scores[best[0]]:
            best = (r, trained, history)
    r, trained, history = best
    history.restart_scores = scores
    history.selected_restart = r
    return trained, history


def _train_once(model: CycleModel, x, y, config: CycleTrainConfig, rng, log):
    gen_params = model.G.params() + model.F.params()
    disc_params = model.D_X.params() + model.D_Y.params()
    opt_kw = dict(learning_rate=config.learning_rate, beta1=config.beta1, beta2=config.beta2)
    gen_opt = nn.adam_init(gen_params, **opt_kw)
    disc_opt = nn.adam_init(disc_params, **{
        **opt_kw, "learning_rate": config.discriminator_learning_rate or config.learning_rate})
    history = CycleHistory()

    for epoch in range(config.epochs):
        sums = np.zeros(3)
        count = 0
        for ix, iy in _batches(len(x), len(y), config.batch_size, rng):
            bx, by = x[ix], y[iy]
            nn.adam_step(disc_params, discriminator_step_grads(model, bx, by), disc_opt)

            adv = adversarial_losses(model, bx, by, config.generator_objective)
            cyc, cyc_grads = cycle_loss(model, bx, by)
            gen_grads = [a + config.cycle_weight * c for a, c in
                         zip(adv.grads["G"] + adv.grads["F"], cyc_grads["G"] + cyc_grads["F"])]
            nn.adam_step(gen_params, gen_grads, gen_opt)
            sums += (adv.L_adv_GDY, adv.L_adv_FDX, cyc)
            count += 1
        means = sums / max(count, 1)
        if not np.all(np.isfinite(means)):
            raise TrainingError("non-finite cycle-translation loss", epoch)
        history.epoch.append(epoch)
        history.L_adv_GDY.append(float(means[0]))
        history.L_adv_FDX.append(float(means[1]))
        history.L_cyc.append(float(means[2]))
        if log is not None:
            log(f"cycle epoch {epoch}: L_adv_GDY={means[0]:.4f} "
                f"L_adv_FDX={means[1]:.4f} L_cyc={means[2]:.4f}")
    return model, history

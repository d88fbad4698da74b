import math

import numpy as np
import pytest

from mmgzsl import nn
from mmgzsl.errors import ConfigError, DataError, ShapeError
from mmgzsl.transform import (CycleModel, CycleTrainConfig, adversarial_losses, cycle_loss,
                              discriminator_step_grads, energy_distance, init_cycle,
                              train_cycle, translate, translate_back)


def _identity_model(dim=3):
    eye = [np.eye(dim), np.eye(dim)]
    lin = [nn.IDENTITY, nn.IDENTITY]

    def gen():
        return nn.Mlp([dim, dim, dim], [w.copy() for w in eye], [np.zeros(dim)] * 2, lin)

    def disc():
        return nn.init_mlp([dim, 4, 1], [nn.LEAKY, nn.IDENTITY], 0, 0.5)

    return CycleModel(G=gen(), F=gen(), D_X=disc(), D_Y=disc())


def _batches(model, seed=0, n=9):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, model.dim_x)), rng.normal(size=(n, model.dim_y)) + 0.5


def test_init_cycle_shapes(tiny_cycle):
    assert tiny_cycle.G.layer_dims == [6, 7, 6]
    assert tiny_cycle.D_X.layer_dims == [6, 5, 1]
    assert translate(tiny_cycle, np.zeros((4, 6))).shape == (4, 6)
    assert translate_back(tiny_cycle, np.zeros((2, 6))).shape == (2, 6)


def test_init_cycle_supports_unequal_dims():
    m = init_cycle(5, 3, CycleTrainConfig(generator_hidden=4, discriminator_hidden=4))
    assert (m.dim_x, m.dim_y) == (5, 3)
    assert translate(m, np.ones((2, 5))).shape == (2, 3)
    assert translate_back(m, np.ones((2, 3))).shape == (2, 5)


def test_translate_rejects_wrong_width(tiny_cycle):
    with pytest.raises(ShapeError):
        translate(tiny_cycle, np.zeros((2, 5)))


def test_translate_of_empty_batch_is_empty(tiny_cycle):
    assert translate(tiny_cycle, np.zeros((0, 6))).shape == (0, 6)


def test_cycle_loss_is_zero_for_identity_maps():
    m = _identity_model()
    bx, by = _batches(m)
    value, grads = cycle_loss(m, bx, by)
    assert value == 0.0


def test_cycle_loss_matches_direct_computation(tiny_cycle):
    bx, by = _batches(tiny_cycle, seed=1)
    expected = (np.abs(translate_back(tiny_cycle, translate(tiny_cycle, bx)) - bx).sum(1).mean()
                + np.abs(translate(tiny_cycle, translate_back(tiny_cycle, by)) - by).sum(1).mean())
    value, _ = cycle_loss(tiny_cycle, bx, by)
    assert value == pytest.approx(expected, rel=1e-12)


def test_zero_logit_discriminators_give_minus_two_ln_two():
    m = _identity_model()
    for d in (m.D_X, m.D_Y):
        d.weights[-1][:] = 0.0
        d.biases[-1][:] = 0.0
    bx, by = _batches(m)
    adv = adversarial_losses(m, bx, by)
    assert adv.L_adv_GDY == pytest.approx(-2 * math.log(2), abs=1e-12)
    assert adv.L_adv_FDX == pytest.approx(-2 * math.log(2), abs=1e-12)


def test_adversarial_terms_are_non_positive(tiny_cycle):
    adv = adversarial_losses(tiny_cycle, *_batches(tiny_cycle, seed=2))
    assert adv.L_adv_GDY <= 0 and adv.L_adv_FDX <= 0


def test_empty_batches_are_rejected(tiny_cycle):
    with pytest.raises(DataError):
        adversarial_losses(tiny_cycle, np.zeros((0, 6)), np.zeros((3, 6)))
    with pytest.raises(DataError):
        cycle_loss(tiny_cycle, np.zeros((3, 6)), np.zeros((0, 6)))


def _all_params(model):
    return [p for net in model.nets().values() for p in net.params()]


def _flat(grads, model):
    return [g for name in model.nets() for g in grads[name]]


def test_adversarial_gradients_match_finite_differences(tiny_cycle):
    bx, by = _batches(tiny_cycle, seed=3)
    adv = adversarial_losses(tiny_cycle, bx, by)

    def loss():
        a = adversarial_losses(tiny_cycle, bx, by)
        return a.L_adv_GDY + a.L_adv_FDX

    report = nn.check_gradients(loss, _all_params(tiny_cycle), _flat(adv.grads, tiny_cycle),
                                n_probes=120, seed=1)
    assert report.parameter_count_checked == 120
    assert report.max_relative_error < 1e-4, report


def test_non_saturating_generator_gradient(tiny_cycle):
    bx, by = _batches(tiny_cycle, seed=4)
    adv = adversarial_losses(tiny_cycle, bx, by, objective="non_saturating")

    def gen_loss():
        fy = nn.forward(tiny_cycle.D_Y, translate(tiny_cycle, bx))
        fx = nn.forward(tiny_cycle.D_X, translate_back(tiny_cycle, by))
        return float(-nn.log_sigmoid(fy).mean() - nn.log_sigmoid(fx).mean())

    params = tiny_cycle.G.params() + tiny_cycle.F.params()
    report = nn.check_gradients(gen_loss, params, adv.grads["G"] + adv.grads["F"], n_probes=100)
    assert report.max_relative_error < 1e-4, report


def test_cycle_gradients_match_finite_differences(tiny_cycle):
    bx, by = _batches(tiny_cycle, seed=5)
    _, grads = cycle_loss(tiny_cycle, bx, by)
    params = tiny_cycle.G.params() + tiny_cycle.F.params()
    report = nn.check_gradients(lambda: cycle_loss(tiny_cycle, bx, by)[0], params,
                                grads["G"] + grads["F"], n_probes=100, seed=2)
    assert report.max_relative_error < 1e-4, report


def test_discriminator_step_is_ascent(tiny_cycle):
    bx, by = _batches(tiny_cycle, seed=6)
    adv = adversarial_losses(tiny_cycle, bx, by)
    step = discriminator_step_grads(tiny_cycle, bx, by)
    for s, g in zip(step, adv.grads["D_X"] + adv.grads["D_Y"]):
        np.testing.assert_array_equal(s, -g)


def test_energy_distance_is_zero_for_identical_samples_and_positive_otherwise():
    a = np.random.default_rng(0).normal(size=(50, 3))
    assert energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert energy_distance(a, a + 2.0) > 1.0


def test_config_validation():
    with pytest.raises(ConfigError):
        CycleTrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        CycleTrainConfig(generator_objective="wasserstein")


def _train(small_data, epochs=6, **kw):
    cfg = CycleTrainConfig(epochs=epochs, generator_hidden=8, discriminator_hidden=8,
                           learning_rate=1e-2, batch_size=16, **kw)
    model = init_cycle(6, 6, cfg, mri=small_data.mri.features, dp=small_data.dp.features)
    return train_cycle(model, small_data.mri.features, small_data.dp.features, cfg)


def test_training_reduces_cycle_loss(small_data):
    _, history = _train(small_data, epochs=20)
    assert len(history.rows()) == 20
    assert history.L_cyc[-1] < 0.75 * history.L_cyc[0]


def test_training_is_deterministic(small_data):
    a, ha = _train(small_data)
    b, hb = _train(small_data)
    assert ha.rows() == hb.rows()
    for pa, pb in zip(_all_params(a), _all_params(b)):
        np.testing.assert_array_equal(pa, pb)


def test_training_returns_a_copy(small_data):
    cfg = CycleTrainConfig(epochs=1, generator_hidden=4, discriminator_hidden=4)
    model = init_cycle(6, 6, cfg, mri=small_data.mri.features, dp=small_data.dp.features)
    before = [p.copy() for p in _all_params(model)]
    train_cycle(model, small_data.mri.features, small_data.dp.features, cfg)
    for p, q in zip(_all_params(model), before):
        np.testing.assert_array_equal(p, q)


def test_restarts_keep_the_best_scoring_run(small_data):
    _, history = _train(small_data, restarts=3)
    assert len(history.restart_scores) == 3
    assert history.selected_restart == int(np.argmin(history.restart_scores))

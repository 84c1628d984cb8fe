"""Projected-gradient attack: constraint satisfaction, determinism, and the
hand-iterated toy oracle."""

import numpy as np
import pytest

from reachsafe.attack import AttackConfig, attack_effectiveness, pgd_attack
from reachsafe.nets import Layer, MlpModel

from test_nets import random_model


def identity_1d():
    return MlpModel((Layer(np.eye(1), np.zeros(1), "identity"),))


def test_zero_iterations_gives_zero_perturbation():
    cfg = AttackConfig(eps=0.5, n_iters=0)
    delta = pgd_attack(identity_1d(), np.array([0.3]), np.array([5.0]), cfg)
    np.testing.assert_array_equal(delta, [0.0])


def test_zero_eps_gives_zero_perturbation():
    cfg = AttackConfig(eps=0.0, step_alpha=0.1, n_iters=50)
    delta = pgd_attack(identity_1d(), np.array([0.3]), np.array([5.0]), cfg)
    np.testing.assert_array_equal(delta, [0.0])


def test_hand_iterated_scalar_case():
    # Identity 1-D net, obs 0, target 10: the squared-error gradient keeps a
    # constant negative sign, so iterates climb by alpha until they hit the
    # ball face at +0.5 and stay there.
    cfg = AttackConfig(eps=0.5, step_alpha=0.1, n_iters=20)
    delta = pgd_attack(identity_1d(), np.array([0.0]), np.array([10.0]), cfg)
    np.testing.assert_allclose(delta, [0.5])
    # the hand iteration: 5 steps of +0.1 then clamped
    d = 0.0
    for _ in range(20):
        grad_sign = np.sign(2.0 * (d - 10.0))
        d = float(np.clip(d - 0.1 * grad_sign, -0.5, 0.5))
    assert d == 0.5


def test_constraint_satisfied_exactly():
    rng = np.random.default_rng(0)
    for _ in range(50):
        model = random_model(rng)
        obs = rng.normal(size=model.input_dim)
        target = rng.normal(size=model.output_dim)
        eps = float(rng.uniform(0.01, 0.5))
        cfg = AttackConfig(eps=eps, n_iters=int(rng.integers(1, 30)))
        delta = pgd_attack(model, obs, target, cfg)
        assert np.max(np.abs(delta)) <= eps  # clamping makes this exact


def test_determinism():
    rng = np.random.default_rng(1)
    model = random_model(rng)
    obs = rng.normal(size=model.input_dim)
    target = rng.normal(size=model.output_dim)
    cfg = AttackConfig(eps=0.3, n_iters=15)
    d1 = pgd_attack(model, obs, target, cfg)
    d2 = pgd_attack(model, obs, target, cfg)
    np.testing.assert_array_equal(d1, d2)


def test_zero_gradient_is_fixed_point():
    # constant network: gradient identically zero, iterates stay at zero
    model = MlpModel(
        (
            Layer(np.zeros((1, 2)), np.array([3.0]), "identity"),
        )
    )
    cfg = AttackConfig(eps=0.4, step_alpha=0.1, n_iters=25)
    delta = pgd_attack(model, np.array([0.1, -0.2]), np.array([9.0]), cfg)
    np.testing.assert_array_equal(delta, [0.0, 0.0])


def test_effectiveness_zero_eps_distances_equal():
    rng = np.random.default_rng(2)
    model = random_model(rng)
    obs = rng.normal(size=model.input_dim)
    target = rng.normal(size=model.output_dim)
    rep = attack_effectiveness(model, obs, target, AttackConfig(eps=0.0))
    assert rep.pre_distance == rep.post_distance


def test_effectiveness_usually_improves_on_random_nets():
    # PGD is not guaranteed monotone, so check a success rate
    rng = np.random.default_rng(3)
    wins = 0
    trials = 100
    for _ in range(trials):
        model = random_model(rng, dims=[4, 8, 2], activations=["tanh", "identity"])
        obs = rng.normal(size=4)
        target = rng.normal(size=2) * 2.0
        rep = attack_effectiveness(model, obs, target, AttackConfig(eps=0.2, n_iters=25))
        wins += rep.improved
    assert wins >= 0.9 * trials


def test_bad_dims_rejected():
    model = identity_1d()
    with pytest.raises(Exception):
        pgd_attack(model, np.array([0.0, 1.0]), np.array([1.0]), AttackConfig(eps=0.1))
    with pytest.raises(Exception):
        pgd_attack(model, np.array([0.0]), np.array([1.0, 2.0]), AttackConfig(eps=0.1))

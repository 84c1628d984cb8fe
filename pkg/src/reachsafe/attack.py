"""Targeted projected-gradient perturbations against an estimator.

The attacker nudges an observation inside an sup-norm ball so the network
output lands near a chosen target.  Iterates follow the signed gradient of
the squared error to the target, re-projected onto the ball by per-coordinate
clamping, starting from the zero perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from reachsafe.nets import DimensionError, MlpModel, forward, grad_input

TargetFn = Callable[[np.ndarray, float], np.ndarray]  # (true state, time) -> target


@dataclass(frozen=True)
class AttackConfig:
    eps: float
    step_alpha: float | None = None  # defaults to eps / 4
    n_iters: int = 20
    target_fn: TargetFn | None = None

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.n_iters < 0:
            raise ValueError("n_iters must be nonnegative")
        if self.step_alpha is not None and self.step_alpha <= 0:
            raise ValueError("step_alpha must be positive")

    @property
    def alpha(self) -> float:
        return self.step_alpha if self.step_alpha is not None else self.eps / 4.0


def pgd_attack(
    model: MlpModel, nominal_obs: np.ndarray, target: np.ndarray, cfg: AttackConfig
) -> np.ndarray:
    """Perturbation delta with ||delta||_inf <= eps steering the output toward
    ``target``.  Deterministic; sign(0) is 0, so a flat objective is a fixed
    point."""
    obs = np.asarray(nominal_obs, dtype=float)
    target = np.asarray(target, dtype=float)
    if obs.shape[-1] != model.input_dim:
        raise DimensionError(
            f"observation dim {obs.shape[-1]} does not match model input "
            f"{model.input_dim}"
        )
    if target.shape[-1] != model.output_dim:
        raise DimensionError(
            f"target dim {target.shape[-1]} does not match model output "
            f"{model.output_dim}"
        )
    delta = np.zeros_like(obs)
    if cfg.eps == 0.0 or cfg.n_iters == 0:
        return delta
    for _ in range(cfg.n_iters):
        g = grad_input(model, obs + delta, target)
        delta = np.clip(delta - cfg.alpha * np.sign(g), -cfg.eps, cfg.eps)
    return delta


@dataclass(frozen=True)
class AttackReport:
    pre_distance: float
    post_distance: float
    delta_norm: float

    @property
    def improved(self) -> bool:
        return self.post_distance < self.pre_distance


def attack_effectiveness(
    model: MlpModel, obs: np.ndarray, target: np.ndarray, cfg: AttackConfig
) -> AttackReport:
    """Distance of the network output to the target before and after the
    attack."""
    obs = np.asarray(obs, dtype=float)
    target = np.asarray(target, dtype=float)
    delta = pgd_attack(model, obs, target, cfg)
    pre = float(np.linalg.norm(forward(model, obs) - target))
    post = float(np.linalg.norm(forward(model, obs + delta) - target))
    return AttackReport(pre, post, float(np.max(np.abs(delta))))

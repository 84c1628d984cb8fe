"""Uncertainty-aware reachability safety filtering for control loops whose
state estimate comes from a neural network applied to possibly adversarially
perturbed observations.

Subpackages by capability:

- :mod:`reachsafe.nets` -- tiny fully connected networks (evaluate, train,
  differentiate, serialize).
- :mod:`reachsafe.bounds` -- sound linear output bounds over input boxes and
  the runtime state-uncertainty set built from them.
- :mod:`reachsafe.attack` -- targeted projected-gradient observation attacks.
- :mod:`reachsafe.systems` -- the benchmark plants (runway taxiing, landmark
  navigation, scalar tracking).
- :mod:`reachsafe.hjgrid` -- grid value iteration for the safety game, value
  interpolation, and the nominal switching filter.
- :mod:`reachsafe.robust` -- the set-valued worst-case filter and its
  offline/runtime assumption checkers.
- :mod:`reachsafe.cbf` -- measurement-robust barrier-function baselines.
- :mod:`reachsafe.sensitivity` -- state-dependent vulnerability fields.
- :mod:`reachsafe.harness` -- scenario configs, closed-loop rollouts,
  Monte-Carlo validation, CSV logs.
"""

from reachsafe.bounds import Box, LinearBounds, crown_bounds, concretize, state_uncertainty_set
from reachsafe.nets import (
    Dataset,
    Layer,
    MlpModel,
    TrainConfig,
    forward,
    grad_input,
    init_model,
    load_model,
    save_model,
    train,
)

__all__ = [
    "Box",
    "LinearBounds",
    "crown_bounds",
    "concretize",
    "state_uncertainty_set",
    "Dataset",
    "Layer",
    "MlpModel",
    "TrainConfig",
    "forward",
    "grad_input",
    "init_model",
    "load_model",
    "save_model",
    "train",
]

"""Verified output bounds for a small network, step by step.

Builds a toy two-layer network, bounds its output over an input box, and
cross-checks the bounds by sampling.  Shows the three bound flavors: the
affine envelopes, their concretized interval, and the runtime state
uncertainty set that inflates the interval by an estimator error bound.
"""

import numpy as np

from reachsafe.bounds import Box, concretize, crown_bounds, state_uncertainty_set
from reachsafe.nets import Layer, MlpModel, forward

rng = np.random.default_rng(0)

# a 2 -> 3 -> 2 tanh network with random weights
model = MlpModel(
    (
        Layer(rng.normal(size=(3, 2)), rng.normal(size=3), "tanh"),
        Layer(rng.normal(size=(2, 3)), rng.normal(size=2), "identity"),
    )
)

domain = Box(np.array([-0.5, 0.2]), np.array([0.5, 1.0]))
lb = crown_bounds(model, domain)
print("affine envelopes over the box:")
print("  lower:  psi @ z +", lb.alpha_vec)
print("  upper:  xi  @ z +", lb.beta_vec)

box = concretize(lb)
print("concretized interval:", box.lower, "..", box.upper)

# sample the box densely: the network image never escapes the bounds
zs = domain.sample(rng, 20_000)
out = forward(model, zs)
print("sampled image:       ", out.min(axis=0), "..", out.max(axis=0))
assert np.all(out >= box.lower - 1e-9) and np.all(out <= box.upper + 1e-9)

# the runtime uncertainty set: observation ball + estimator error inflation
obs = np.array([0.1, 0.6])
xbar = state_uncertainty_set(model, obs, eps=0.05, est_err=np.array([0.02, 0.02]))
print("state uncertainty set around the estimate:", xbar.lower, "..", xbar.upper)
print("estimate itself:", forward(model, obs))

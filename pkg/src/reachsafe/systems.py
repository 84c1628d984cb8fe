"""Benchmark plants behind one interface: discrete control-affine dynamics,
an observation map, a safety margin function, and a nominal controller.

Three plants:

- runway taxiing: kinematic aircraft (down-track, cross-track, heading) with
  a synthetic 16-feature observation generated from (cross-track, heading)
  through a fixed random tanh mixing network that saturates toward the runway
  edges; the control coordinate is the turn rate, a bijective tangent map of
  the rudder angle, so the dynamics are exactly affine in the input;
- landmark navigation: planar double integrator measuring ranges to four
  landmarks, decomposed into two scalar-input axes for filtering;
- scalar tracking: 1-D integrator with a logistic observation map whose exact
  inverse serves as the estimator.

All step/observe/constraint functions broadcast over a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from reachsafe.bounds import Box
from reachsafe.nets import Layer, MlpModel, forward


class ControlBoundsError(ValueError):
    """A control input outside the declared bounds was passed to step()."""


class ObservationDomainError(ValueError):
    """The state lies outside the observation map's domain."""


@dataclass(frozen=True)
class System:
    """A discrete-time plant.  ``step_fn`` must be affine in the control for
    fixed state and disturbance (checked by the test suite via three-point
    collinearity)."""

    name: str
    state_dim: int
    control_dim: int
    control_lo: np.ndarray  # (control_dim,)
    control_hi: np.ndarray
    disturbance_box: Box
    obs_noise_box: Box | None
    dt: float
    step_fn: Callable
    observe_fn: Callable | None
    constraint_fn: Callable
    nominal_control_fn: Callable | None
    state_names: tuple[str, ...] = ()

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.control_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.control_hi, dtype=float))
        if np.any(lo >= hi):
            raise ValueError("control bounds must satisfy lo < hi")
        if not self.disturbance_box.contains(np.zeros(self.disturbance_box.dim)):
            raise ValueError("disturbance box must contain 0")
        if self.obs_noise_box is not None and not self.obs_noise_box.contains(
            np.zeros(self.obs_noise_box.dim)
        ):
            raise ValueError("observation noise box must contain 0")
        object.__setattr__(self, "control_lo", lo)
        object.__setattr__(self, "control_hi", hi)

    @property
    def control_bounds(self) -> tuple[float, float]:
        if self.control_dim != 1:
            raise ValueError("scalar control bounds requested on a vector system")
        return float(self.control_lo[0]), float(self.control_hi[0])

    def step(self, x, u, d):
        u_arr = np.asarray(u, dtype=float)
        tol = 1e-9
        if np.any(u_arr < self.control_lo - tol) or np.any(
            u_arr > self.control_hi + tol
        ):
            raise ControlBoundsError(
                f"{self.name}: control {u_arr} outside "
                f"[{self.control_lo}, {self.control_hi}]; callers clamp explicitly"
            )
        return self.step_fn(np.asarray(x, dtype=float), u_arr, np.asarray(d, dtype=float))

    def observe(self, x, d_y):
        if self.observe_fn is None:
            raise ValueError(f"{self.name} has no observation map")
        return self.observe_fn(np.asarray(x, dtype=float), np.asarray(d_y, dtype=float))

    def constraint(self, x):
        return self.constraint_fn(np.asarray(x, dtype=float))

    def nominal_control(self, x_hat, t: float):
        if self.nominal_control_fn is None:
            raise ValueError(f"{self.name} has no nominal controller")
        return self.nominal_control_fn(np.asarray(x_hat, dtype=float), float(t))

    def clamp_control(self, u):
        return np.clip(u, self.control_lo, self.control_hi)

    def control_column(self, x):
        """g(x) such that step(x, u, d) = step(x, 0, d) + g(x) * u.

        Exact for control-affine dynamics (computed as a one-unit difference).
        Only defined for scalar-control systems.
        """
        if self.control_dim != 1:
            raise ValueError("control_column needs a scalar-control system")
        x = np.asarray(x, dtype=float)
        d0 = np.zeros(self.disturbance_box.dim)
        one = np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0
        hi = min(1.0, float(self.control_hi[0]))
        base = self.step_fn(x, 0.0 * one, d0)
        return (self.step_fn(x, hi * one, d0) - base) / hi

    def disturbance_vertices(self, include_center: bool = True) -> np.ndarray:
        """Corners of the disturbance box (plus the center by default)."""
        box = self.disturbance_box
        dims = box.dim
        corners = np.array(
            [
                [box.lower[i] if (k >> i) & 1 == 0 else box.upper[i] for i in range(dims)]
                for k in range(2**dims)
            ]
        )
        corners = np.unique(corners, axis=0)
        if include_center:
            corners = np.vstack([corners, box.center])
        return corners


# ---------------------------------------------------------------------------
# Scalar tracking plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarParams:
    dt: float = 0.1
    u_bound: float = 2.0
    d_max: float = 0.02
    ref_low: float = -0.95
    ref_high: float = 0.95
    ref_switch_time: float = 6.0


def scalar_reference(t: float, p: ScalarParams = ScalarParams()) -> float:
    return p.ref_low if t < p.ref_switch_time else p.ref_high


def scalar_system(p: ScalarParams = ScalarParams()) -> System:
    def step(x, u, d):
        return x + p.dt * (np.asarray(u)[..., None] + d)

    def observe(x, d_y):
        xv = x[..., 0]
        if np.any(xv <= -3.0) or np.any(xv >= 1.0):
            raise ObservationDomainError(
                f"scalar observation needs x in (-3, 1), got {xv}"
            )
        y = 0.25 * np.log(4.0 / (xv + 3.0) - 1.0)
        return y[..., None] + d_y

    def constraint(x):
        return 1.0 - np.abs(x[..., 0])

    def controller(x_hat, t):
        return np.array([scalar_reference(t, p) - x_hat[..., 0]])

    return System(
        name="scalar",
        state_dim=1,
        control_dim=1,
        control_lo=np.array([-p.u_bound]),
        control_hi=np.array([p.u_bound]),
        disturbance_box=Box(np.array([-p.d_max]), np.array([p.d_max])),
        obs_noise_box=Box(np.zeros(1), np.zeros(1)),
        dt=p.dt,
        step_fn=step,
        observe_fn=observe,
        constraint_fn=constraint,
        nominal_control_fn=controller,
        state_names=("x",),
    )


def scalar_estimator() -> MlpModel:
    """Exact inverse of the scalar observation map as a two-layer network:
    x = 4*sigmoid(-4y) - 3.  With no noise, estimator(observe(x)) == x."""
    return MlpModel(
        (
            Layer(np.array([[-4.0]]), np.zeros(1), "sigmoid"),
            Layer(np.array([[4.0]]), np.array([-3.0]), "identity"),
        )
    )


# ---------------------------------------------------------------------------
# Runway taxiing plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaxiParams:
    dt: float = 0.1
    speed: float = 5.0  # m/s, constant ground speed
    wheelbase: float = 5.0  # m
    rudder_limit_deg: float = 12.0
    d_downtrack: float = 0.02
    d_crosstrack: float = 0.02
    d_heading: float = 0.01
    cte_limit: float = 10.0  # runway half-width, m
    gain_cte: float = -0.74
    gain_he: float = -0.44
    obs_dim: int = 16
    obs_noise: float = 0.002
    obs_seed: int = 7
    # normalization scales feeding the mixing network
    cte_scale: float = 10.0
    he_scale: float = 0.6


def taxi_rudder_to_turn_rate(phi_deg, p: TaxiParams = TaxiParams()):
    """Turn rate (rad/s) produced by a rudder angle in degrees."""
    return (p.speed / p.wheelbase) * np.tan(np.deg2rad(phi_deg))


def taxi_turn_rate_to_rudder(u, p: TaxiParams = TaxiParams()):
    return np.rad2deg(np.arctan(np.asarray(u) * p.wheelbase / p.speed))


def taxi_turn_rate_limit(p: TaxiParams = TaxiParams()) -> float:
    return float(taxi_rudder_to_turn_rate(p.rudder_limit_deg, p))


def taxi_observation_net(p: TaxiParams = TaxiParams()) -> MlpModel:
    """Fixed random tanh mixing network (cross-track, heading) -> features.

    The input normalization is folded into the first layer, and the tanh
    saturates toward the runway edges, so feature sensitivity to the state
    drops there and the trained inverse grows correspondingly steeper.
    Feature gains were sized so the verified estimate boxes stay a small
    fraction of the runway width mid-runway while observation attacks bias
    the estimate by a few meters near the edges.
    """
    rng = np.random.default_rng(p.obs_seed)
    hidden = 8
    a1 = rng.normal(size=(hidden, 2))
    a1 = np.column_stack(
        [a1[:, 0] * 2.5 / p.cte_scale, a1[:, 1] * 1.0 / p.he_scale]
    )
    b1 = rng.normal(size=hidden) * 0.2
    a2 = rng.normal(size=(p.obs_dim, hidden)) * 0.7 / np.sqrt(hidden)
    b2 = rng.normal(size=p.obs_dim) * 0.1
    return MlpModel((Layer(a1, b1, "tanh"), Layer(a2, b2, "identity")))


TAXI_STATE_NAMES = ("dtp", "cte", "he")
TAXI_GRID_DIMS = (1, 2)  # the value grid lives over (cross-track, heading)


def taxi_system(p: TaxiParams = TaxiParams()) -> System:
    obs_net = taxi_observation_net(p)
    u_max = taxi_turn_rate_limit(p)

    def step(x, u, d):
        dtp, cte, he = x[..., 0], x[..., 1], x[..., 2]
        u = np.asarray(u)
        return np.stack(
            [
                dtp + p.dt * (p.speed * np.cos(he) + d[..., 0]),
                cte + p.dt * (p.speed * np.sin(he) + d[..., 1]),
                he + p.dt * (u + d[..., 2]),
            ],
            axis=-1,
        )

    def observe(x, d_y):
        return forward(obs_net, x[..., 1:3]) + d_y

    def constraint(x):
        return p.cte_limit - np.abs(x[..., 1])

    def controller(x_hat, t):
        phi = np.clip(
            p.gain_cte * x_hat[..., 0] + p.gain_he * x_hat[..., 1],
            -p.rudder_limit_deg,
            p.rudder_limit_deg,
        )
        return np.atleast_1d(taxi_rudder_to_turn_rate(phi, p))

    return System(
        name="taxi",
        state_dim=3,
        control_dim=1,
        control_lo=np.array([-u_max]),
        control_hi=np.array([u_max]),
        disturbance_box=Box(
            -np.array([p.d_downtrack, p.d_crosstrack, p.d_heading]),
            np.array([p.d_downtrack, p.d_crosstrack, p.d_heading]),
        ),
        obs_noise_box=Box(
            -p.obs_noise * np.ones(p.obs_dim), p.obs_noise * np.ones(p.obs_dim)
        ),
        dt=p.dt,
        step_fn=step,
        observe_fn=observe,
        constraint_fn=constraint,
        nominal_control_fn=controller,
        state_names=TAXI_STATE_NAMES,
    )


def taxi_safety_system(p: TaxiParams = TaxiParams()) -> System:
    """The (cross-track, heading) subsystem the value grid is solved on.
    Down-track position does not enter these dynamics or the constraint."""
    u_max = taxi_turn_rate_limit(p)

    def step(x, u, d):
        cte, he = x[..., 0], x[..., 1]
        u = np.asarray(u)
        return np.stack(
            [
                cte + p.dt * (p.speed * np.sin(he) + d[..., 0]),
                he + p.dt * (u + d[..., 1]),
            ],
            axis=-1,
        )

    def constraint(x):
        return p.cte_limit - np.abs(x[..., 0])

    def controller(x_hat, t):
        phi = np.clip(
            p.gain_cte * x_hat[..., 0] + p.gain_he * x_hat[..., 1],
            -p.rudder_limit_deg,
            p.rudder_limit_deg,
        )
        return np.atleast_1d(taxi_rudder_to_turn_rate(phi, p))

    return System(
        name="taxi-safety",
        state_dim=2,
        control_dim=1,
        control_lo=np.array([-u_max]),
        control_hi=np.array([u_max]),
        disturbance_box=Box(
            -np.array([p.d_crosstrack, p.d_heading]),
            np.array([p.d_crosstrack, p.d_heading]),
        ),
        obs_noise_box=None,
        dt=p.dt,
        step_fn=step,
        observe_fn=None,
        constraint_fn=constraint,
        nominal_control_fn=controller,
        state_names=("cte", "he"),
    )


# ---------------------------------------------------------------------------
# Landmark navigation plant (planar double integrator)
# ---------------------------------------------------------------------------

SQUARE_LANDMARKS = np.array([[-5.0, -5.0], [5.0, -5.0], [5.0, 5.0], [-5.0, 5.0]])
TRIANGULAR_LANDMARKS = np.array(
    [[-4.5, -4.5], [-1.5, -1.5], [1.5, 1.5], [4.5, -4.5]]
)

LANDMARK_LAYOUTS = {"square": SQUARE_LANDMARKS, "triangular": TRIANGULAR_LANDMARKS}


@dataclass(frozen=True)
class DoubleIntParams:
    dt: float = 0.1
    u_max: float = 5.0
    d_pos: float = 1e-5
    d_vel: float = 1e-5
    pos_limit: float = 5.0  # workspace is [-pos_limit, pos_limit]^2
    landmarks: np.ndarray = field(
        default_factory=lambda: SQUARE_LANDMARKS.copy()
    )
    history_len: int = 3
    # circle-like reference, inset within the workspace; the damping-heavy
    # gain ratio makes the loop sensitive to velocity-estimate bias, the
    # channel observation attacks can actually move
    ref_radius: float = 4.3
    ref_omega: float = 0.4
    ref_phase: float = 0.0
    gain_pos: float = 3.0
    gain_vel: float = 6.0


DOUBLE_INT_STATE_NAMES = ("px", "py", "vx", "vy")
DOUBLE_INT_AXES = ((0, 2), (1, 3))  # (position, velocity) dims per control axis


def circle_reference(t, p: DoubleIntParams):
    """Reference position, velocity, acceleration on the circular path."""
    ang = p.ref_omega * np.asarray(t, dtype=float) + p.ref_phase
    c, s = np.cos(ang), np.sin(ang)
    pos = p.ref_radius * np.stack([c, s], axis=-1)
    vel = p.ref_radius * p.ref_omega * np.stack([-s, c], axis=-1)
    acc = -p.ref_radius * p.ref_omega**2 * np.stack([c, s], axis=-1)
    return pos, vel, acc


def landmark_ranges(pos, landmarks) -> np.ndarray:
    """Range snapshot ||l_i - p|| for each landmark (broadcasts over batch)."""
    diff = np.asarray(pos, dtype=float)[..., None, :] - landmarks
    return np.linalg.norm(diff, axis=-1)


def double_integrator_system(p: DoubleIntParams = DoubleIntParams()) -> System:
    def step(x, u, d):
        pos, vel = x[..., 0:2], x[..., 2:4]
        u = np.asarray(u, dtype=float)
        dp, dv = d[..., 0:2], d[..., 2:4]
        return np.concatenate(
            [
                pos + p.dt * (vel + 0.5 * p.dt * u + dp),
                vel + p.dt * (u + dv),
            ],
            axis=-1,
        )

    def observe(x, d_y):
        return landmark_ranges(x[..., 0:2], p.landmarks) + d_y

    def constraint(x):
        return np.minimum(
            p.pos_limit - np.abs(x[..., 0]), p.pos_limit - np.abs(x[..., 1])
        )

    def controller(x_hat, t):
        ref_p, ref_v, ref_a = circle_reference(t, p)
        u = (
            ref_a
            + p.gain_pos * (ref_p - x_hat[..., 0:2])
            + p.gain_vel * (ref_v - x_hat[..., 2:4])
        )
        return np.clip(u, -p.u_max, p.u_max)

    return System(
        name="landmarks",
        state_dim=4,
        control_dim=2,
        control_lo=np.array([-p.u_max, -p.u_max]),
        control_hi=np.array([p.u_max, p.u_max]),
        disturbance_box=Box(
            -np.array([p.d_pos, p.d_pos, p.d_vel, p.d_vel]),
            np.array([p.d_pos, p.d_pos, p.d_vel, p.d_vel]),
        ),
        obs_noise_box=Box(np.zeros(4), np.zeros(4)),
        dt=p.dt,
        step_fn=step,
        observe_fn=observe,
        constraint_fn=constraint,
        nominal_control_fn=controller,
        state_names=DOUBLE_INT_STATE_NAMES,
    )


def double_integrator_axis(p: DoubleIntParams = DoubleIntParams()) -> System:
    """One (position, velocity) axis with scalar input; both axes of the
    planar system share this form, so one value grid serves both."""

    def step(x, u, d):
        pos, vel = x[..., 0], x[..., 1]
        u = np.asarray(u)
        return np.stack(
            [
                pos + p.dt * (vel + 0.5 * p.dt * u + d[..., 0]),
                vel + p.dt * (u + d[..., 1]),
            ],
            axis=-1,
        )

    def constraint(x):
        return p.pos_limit - np.abs(x[..., 0])

    return System(
        name="double-integrator-axis",
        state_dim=2,
        control_dim=1,
        control_lo=np.array([-p.u_max]),
        control_hi=np.array([p.u_max]),
        disturbance_box=Box(
            -np.array([p.d_pos, p.d_vel]), np.array([p.d_pos, p.d_vel])
        ),
        obs_noise_box=None,
        dt=p.dt,
        step_fn=step,
        observe_fn=None,
        constraint_fn=constraint,
        nominal_control_fn=None,
        state_names=("p", "v"),
    )


def landmark_history(sys_params: DoubleIntParams, state) -> np.ndarray:
    """Noiseless stacked measurement history at a state, newest snapshot
    first.  Past positions come from constant-velocity backward extrapolation
    (p_{-k} = p - k*dt*v), matching how a smoothly moving system arrived."""
    state = np.asarray(state, dtype=float)
    pos, vel = state[..., 0:2], state[..., 2:4]
    snaps = [
        landmark_ranges(pos - k * sys_params.dt * vel, sys_params.landmarks)
        for k in range(sys_params.history_len)
    ]
    return np.concatenate(snaps, axis=-1)

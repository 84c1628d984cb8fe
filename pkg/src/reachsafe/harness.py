"""Scenario configuration and the closed-loop experiment engine.

One step of the loop: observe the true state (with sensor noise), mount the
observation attack, run the estimator and its verified uncertainty set,
filter the nominal control, clamp, and step the plant.  Everything a step
produced lands in a per-step log that serializes to CSV (one header comment
line documenting the column order, floats at 17 significant digits).

Randomness: a single scenario seed fans out to named substreams (process
disturbance, observation noise, Monte-Carlo, initialization) through
``numpy.random.SeedSequence.spawn``, in that fixed order, so component draws
stay decoupled while the whole run is reproducible bit for bit.

Monte-Carlo validation replays a recorded filtered run: rollouts start
uniformly inside the first uncertainty set, apply the recorded inputs under
disturbances sampled from the process box, and are projected into the
recorded uncertainty set of the matching step (the set that certifies that
time's observation), counting rollouts whose safety margin ever reaches zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from reachsafe.attack import AttackConfig, pgd_attack
from reachsafe.bounds import Box, state_uncertainty_set
from reachsafe.cbf import CbfConfig, CbfFilter, CbfInfeasibleError
from reachsafe.hjgrid import (
    GridSpec,
    ValueGrid,
    interp_value,
    nominal_filter,
    value_iteration,
)
from reachsafe.nets import Dataset, MlpModel, TrainConfig, forward, init_model, train
from reachsafe.robust import NeighborhoodSpec, box_lattice, delta_band_from_cells, robust_filter
from reachsafe.systems import (
    DOUBLE_INT_AXES,
    DoubleIntParams,
    LANDMARK_LAYOUTS,
    ScalarParams,
    System,
    TaxiParams,
    circle_reference,
    double_integrator_axis,
    double_integrator_system,
    landmark_history,
    scalar_estimator,
    scalar_system,
    taxi_safety_system,
    taxi_system,
)

FILTERS = ("none", "hj-nominal", "guardian", "cbf:mr", "cbf:r", "cbf:r-qp")
ATTACK_KINDS = ("none", "pgd", "constant-offset")


@dataclass(frozen=True)
class Scenario:
    name: str
    system: str  # "scalar" | "taxi" | "landmarks"
    filter_name: str = "none"
    seed: int = 0
    horizon: int = 150
    x0: tuple | None = None
    attack_kind: str = "none"
    attack_eps: float = 0.0
    attack_alpha: float | None = None
    attack_iters: int = 20
    attack_target: str = ""
    lattice_density: int = 5
    delta_band_cells: float = 3.0
    mc_rollouts: int = 10_000
    cbf_gamma: float = 0.5
    cbf_design_eps: float = 0.1
    cbf_margin: float | None = None  # None = derive from a verifier scan
    landmark_layout: str = "square"
    system_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.filter_name not in FILTERS:
            raise ValueError(f"unknown filter {self.filter_name!r}")
        if self.attack_kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.attack_kind!r}")
        if self.system not in ("scalar", "taxi", "landmarks"):
            raise ValueError(f"unknown system {self.system!r}")


def derive_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Named substreams in documented spawn order."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("disturbance", "obs_noise", "mc", "init")
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


# ---------------------------------------------------------------------------
# Default grids and estimator training
# ---------------------------------------------------------------------------


def default_grid_spec(kind: str) -> GridSpec:
    if kind == "scalar":
        return GridSpec(np.array([-1.5]), np.array([1.5]), (301,), n_u=41)
    if kind == "taxi":
        return GridSpec(
            np.array([-12.0, -0.8]), np.array([12.0, 0.8]), (121, 65), n_u=41
        )
    if kind == "di-axis":
        return GridSpec(
            np.array([-6.5, -7.0]), np.array([6.5, 7.0]), (105, 113), n_u=41
        )
    raise ValueError(f"unknown grid kind {kind!r}")


def solve_default_grid(kind: str, tol: float = 1e-4, max_iters: int = 500, **params):
    if kind == "scalar":
        sys = scalar_system(ScalarParams(**params))
    elif kind == "taxi":
        sys = taxi_safety_system(TaxiParams(**params))
    elif kind == "di-axis":
        sys = double_integrator_axis(DoubleIntParams(**params))
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    return value_iteration(sys, default_grid_spec(kind), tol=tol, max_iters=max_iters)


ERR_MARGIN = 1.3  # safety factor on the measured held-out estimation error


def train_taxi_estimator(
    params: TaxiParams | None = None,
    seed: int = 0,
    n_train: int = 24_000,
    n_holdout: int = 4_000,
    epochs: int = 40,
):
    """Train the feature-to-(cross-track, heading) estimator and measure its
    worst held-out error, which becomes the runtime inflation bound."""
    params = params or TaxiParams()
    sys = taxi_system(params)
    rng = np.random.default_rng(seed)
    n = n_train + n_holdout
    states = np.column_stack(
        [
            np.zeros(n),
            rng.uniform(-13.0, 13.0, size=n),
            rng.uniform(-0.85, 0.85, size=n),
        ]
    )
    noise = sys.obs_noise_box.sample(rng, n)
    obs = sys.observe(states, noise)
    targets = states[:, 1:3]
    model = init_model([params.obs_dim, 64, 64, 64, 2], ["relu"] * 3 + ["identity"], seed=seed)
    cfg = TrainConfig(learning_rate=2e-3, batch_size=256, epochs=epochs, seed=seed)
    model = train(model, Dataset(obs[:n_train], targets[:n_train]), cfg)
    pred = forward(model, obs[n_train:])
    err = np.max(np.abs(pred - targets[n_train:]), axis=0)
    return model, ERR_MARGIN * err


def train_landmark_estimator(
    params: DoubleIntParams | None = None,
    seed: int = 0,
    n_samples: int = 48_000,
    n_holdout: int = 4_000,
    epochs_main: int = 70,
    epochs_polish: int = 40,
):
    """Train the range-history-to-state estimator on histories synthesized
    over the whole workspace (uniform positions and velocities), with a
    lower-rate polishing stage so the fitted surface is smooth enough for
    the sensitivity fields to reflect measurement geometry.

    The error bound is the worst held-out error times a safety factor; it is
    an empirical assumption about the sampled region, not a guarantee.
    Velocity components remain intrinsically ambiguous -- three snapshots
    pin the average motion, not the instantaneous one -- which is exactly
    the channel observation attacks move."""
    params = params or DoubleIntParams()
    rng = np.random.default_rng(seed)
    states = np.column_stack(
        [
            rng.uniform(-5.5, 5.5, size=n_samples),
            rng.uniform(-5.5, 5.5, size=n_samples),
            rng.uniform(-2.5, 2.5, size=n_samples),
            rng.uniform(-2.5, 2.5, size=n_samples),
        ]
    )
    hists = landmark_history(params, states)
    model = init_model([12, 64, 64, 64, 4], ["relu"] * 3 + ["identity"], seed=seed)
    data = Dataset(hists[:-n_holdout], states[:-n_holdout])
    model = train(
        model,
        data,
        TrainConfig(learning_rate=2e-3, batch_size=512, epochs=epochs_main, seed=seed),
    )
    model = train(
        model,
        data,
        TrainConfig(
            learning_rate=4e-4, batch_size=512, epochs=epochs_polish, seed=seed + 1
        ),
    )
    pred = forward(model, hists[-n_holdout:])
    err = np.max(np.abs(pred - states[-n_holdout:]), axis=0)
    return model, ERR_MARGIN * err


def scalar_worst_halfwidth(
    estimator: MlpModel, eps: float, x_range=(-1.3, 0.97), n: int = 200
) -> float:
    """Largest verified estimate half-width over clean observations of a
    state sweep; the design margin the fixed-margin baselines get."""
    sys = scalar_system()
    worst = 0.0
    for x in np.linspace(x_range[0], x_range[1], n):
        y = sys.observe(np.array([x]), np.zeros(1))
        box = state_uncertainty_set(estimator, y, eps, np.zeros(1))
        worst = max(worst, float(box.width[0]) / 2.0)
    return worst


# ---------------------------------------------------------------------------
# Runtime assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisFilter:
    dims: tuple[int, ...]  # estimate coordinates of this control axis
    system: System  # scalar-control axis plant
    grid: ValueGrid
    nbhd: NeighborhoodSpec


@dataclass(frozen=True)
class Runtime:
    scenario: Scenario
    sim: System
    mc_system: System  # estimate-coordinate plant used for projected rollouts
    estimator: MlpModel
    est_err: np.ndarray
    est_dims: tuple[int, ...]  # sim-state dims the estimator reports
    axes: tuple[AxisFilter, ...]
    history_len: int
    target_fn: object | None
    cbf: CbfFilter | None
    cbf_margin: float
    x0: np.ndarray


def _make_target_fn(sc: Scenario, params) -> object | None:
    if sc.attack_kind != "pgd":
        return None
    if sc.system == "taxi":
        if sc.attack_target == "centerline":
            return lambda x_true, t: np.zeros(2)
        # default: mirror of the true (cross-track, heading) -- positive
        # feedback that drives the plant outward from either side
        return lambda x_true, t: -x_true[[1, 2]]
    if sc.system == "landmarks":
        # pull the estimate toward the circle center: claim a position at the
        # center and motion heading into it, so the tracking loop pushes the
        # true state radially outward
        def target(x_true, t):
            pos = x_true[0:2]
            r = max(float(np.linalg.norm(pos)), 1e-6)
            speed = params.ref_radius * params.ref_omega
            v_in = -speed * pos / r
            return np.concatenate([np.zeros(2), v_in])

        return target
    raise ValueError(f"no attack targets defined for system {sc.system!r}")


def build_runtime(
    sc: Scenario,
    grid: ValueGrid,
    estimator: MlpModel | None = None,
    est_err: np.ndarray | None = None,
) -> Runtime:
    """Assemble the per-family wiring: plants, filter axes, attack targets."""
    if sc.system == "scalar":
        params = ScalarParams(**sc.system_overrides)
        sim = scalar_system(params)
        estimator = estimator or scalar_estimator()
        est_err = np.zeros(1) if est_err is None else np.asarray(est_err, float)
        nbhd = NeighborhoodSpec(
            delta_band_from_cells(grid, sc.delta_band_cells), sc.lattice_density
        )
        axes = (AxisFilter((0,), sim, grid, nbhd),)
        cbf = None
        margin = 0.0
        if sc.filter_name.startswith("cbf:"):
            margin = (
                sc.cbf_margin
                if sc.cbf_margin is not None
                else scalar_worst_halfwidth(estimator, sc.cbf_design_eps)
            )
            variant = sc.filter_name.split(":", 1)[1]
            cfg = CbfConfig(
                variant=variant,
                gamma=sc.cbf_gamma,
                margin=margin if variant in ("r", "r-qp") else 0.0,
                u_lo=-params.u_bound,
                u_hi=params.u_bound,
                dt=params.dt,
                d_max=params.d_max,
            )
            cbf = CbfFilter(cfg)
        if sc.x0 is None:
            # start where the attacked estimate reads zero
            y0 = sim.observe(np.array([0.0]), np.zeros(1))[0] + sc.attack_eps
            x0 = forward(estimator, np.array([y0]))
        else:
            x0 = np.asarray(sc.x0, dtype=float)
        return Runtime(
            scenario=sc,
            sim=sim,
            mc_system=sim,
            estimator=estimator,
            est_err=est_err,
            est_dims=(0,),
            axes=axes,
            history_len=1,
            target_fn=None,
            cbf=cbf,
            cbf_margin=margin,
            x0=x0,
        )

    if sc.system == "taxi":
        params = TaxiParams(**sc.system_overrides)
        sim = taxi_system(params)
        safety = taxi_safety_system(params)
        if estimator is None:
            raise ValueError("taxi scenarios need a trained estimator")
        est_err = np.zeros(2) if est_err is None else np.asarray(est_err, float)
        nbhd = NeighborhoodSpec(
            delta_band_from_cells(grid, sc.delta_band_cells), sc.lattice_density
        )
        axes = (AxisFilter((0, 1), safety, grid, nbhd),)
        x0 = np.asarray(sc.x0 if sc.x0 is not None else (0.0, -6.0, 0.0), float)
        return Runtime(
            scenario=sc,
            sim=sim,
            mc_system=safety,
            estimator=estimator,
            est_err=est_err,
            est_dims=(1, 2),
            axes=axes,
            history_len=1,
            target_fn=_make_target_fn(sc, params),
            cbf=None,
            cbf_margin=0.0,
            x0=x0,
        )

    # landmarks
    overrides = dict(sc.system_overrides)
    overrides.setdefault("landmarks", LANDMARK_LAYOUTS[sc.landmark_layout].copy())
    params = DoubleIntParams(**overrides)
    sim = double_integrator_system(params)
    axis_sys = double_integrator_axis(params)
    if estimator is None:
        raise ValueError("landmark scenarios need a trained estimator")
    est_err = np.zeros(4) if est_err is None else np.asarray(est_err, float)
    nbhd = NeighborhoodSpec(
        delta_band_from_cells(grid, sc.delta_band_cells), sc.lattice_density
    )
    axes = tuple(AxisFilter(dims, axis_sys, grid, nbhd) for dims in DOUBLE_INT_AXES)
    if sc.x0 is None:
        p0, v0, _ = circle_reference(0.0, params)
        x0 = np.concatenate([p0, v0])
    else:
        x0 = np.asarray(sc.x0, dtype=float)
    return Runtime(
        scenario=sc,
        sim=sim,
        mc_system=sim,
        estimator=estimator,
        est_err=est_err,
        est_dims=(0, 1, 2, 3),
        axes=axes,
        history_len=params.history_len,
        target_fn=_make_target_fn(sc, params),
        cbf=None,
        cbf_margin=0.0,
        x0=x0,
    )


# ---------------------------------------------------------------------------
# The closed loop
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryLog:
    columns: list[str]
    rows: list[dict]

    def array(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class RunResult:
    log: TrajectoryLog
    audits: dict
    xbars: list[Box | None]
    u_applied: np.ndarray  # (T, control_dim)

    @property
    def ok(self) -> bool:
        return all(v for v in self.audits.values() if v is not None)


def _needs_xbar(filter_name: str) -> bool:
    return filter_name != "none"


def project_into_set(x: np.ndarray, box: Box) -> np.ndarray:
    """Per-coordinate clamp onto the box (idempotent, non-expansive)."""
    return np.clip(np.asarray(x, dtype=float), box.lower, box.upper)


def run_scenario(
    sc: Scenario,
    runtime: Runtime,
) -> RunResult:
    """Execute the closed loop and audit it.

    Audits: ``pert_norm`` (attack stayed inside its ball), ``containment``
    (true state inside every constructed uncertainty set; None when the run
    never constructs one), ``safety`` (margin never negative; only asserted
    for worst-case-filtered runs).
    """
    rngs = derive_rngs(sc.seed)
    sim = runtime.sim
    est = runtime.estimator
    x = runtime.x0.copy()
    sc_eps = sc.attack_eps if sc.attack_kind != "none" else 0.0
    atk_cfg = AttackConfig(
        eps=sc.attack_eps, step_alpha=sc.attack_alpha, n_iters=sc.attack_iters
    )
    history: list[np.ndarray] = []
    columns: list[str] | None = None
    rows: list[dict] = []
    xbars: list[Box | None] = []
    u_log = []
    containment_ok: bool | None = None
    pert_ok = True
    want_xbar = _needs_xbar(sc.filter_name)

    for t in range(sc.horizon):
        t_start = time.perf_counter()
        time_s = t * sim.dt
        row: dict = {"t": t, "time_s": time_s}
        for i, name in enumerate(sim.state_names):
            row[f"x_true_{name}"] = x[i]

        noise = (
            runtime.sim.obs_noise_box.sample(rngs["obs_noise"], 1)[0]
            if sim.obs_noise_box is not None
            else 0.0
        )
        snap = sim.observe(x, noise)
        for i in range(snap.shape[-1]):
            row[f"obs_{i}"] = snap[i]
        history.insert(0, snap)
        if len(history) < runtime.history_len:
            history.extend([snap] * (runtime.history_len - len(history)))
        del history[runtime.history_len:]
        obs_vec = np.concatenate(history) if runtime.history_len > 1 else history[0]

        wall_attack = 0.0
        if sc.attack_kind == "pgd":
            tick = time.perf_counter()
            target = runtime.target_fn(x, time_s)
            delta = pgd_attack(est, obs_vec, target, atk_cfg)
            wall_attack = time.perf_counter() - tick
        elif sc.attack_kind == "constant-offset":
            tick = time.perf_counter()
            delta = -sc.attack_eps * np.ones_like(obs_vec)
            wall_attack = time.perf_counter() - tick
        else:
            delta = np.zeros_like(obs_vec)
        obs_adv = obs_vec + delta
        pert = float(np.max(np.abs(delta))) if delta.size else 0.0
        row["pert_norm"] = pert
        if pert > sc.attack_eps + 1e-12:
            pert_ok = False

        x_est = forward(est, obs_adv)
        est_names = [sim.state_names[i] for i in runtime.est_dims]
        for name, v in zip(est_names, x_est):
            row[f"x_est_{name}"] = v
        xbar: Box | None = None
        wall_nnv = 0.0
        if want_xbar:
            tick = time.perf_counter()
            xbar = state_uncertainty_set(est, obs_adv, sc_eps, runtime.est_err)
            wall_nnv = time.perf_counter() - tick
            for name, lo, hi in zip(est_names, xbar.lower, xbar.upper):
                row[f"xbar_lo_{name}"] = lo
                row[f"xbar_hi_{name}"] = hi
            true_est_coords = x[list(runtime.est_dims)]
            inside = xbar.contains(true_est_coords, atol=1e-12)
            containment_ok = inside if containment_ok is None else (containment_ok and inside)
        xbars.append(xbar)

        u_nom = np.atleast_1d(sim.nominal_control(x_est, time_s))
        u_nom_cl = np.asarray(sim.clamp_control(u_nom), dtype=float)
        u_applied = u_nom_cl.copy()
        t_filter = time.perf_counter()
        any_active = False
        asm2_all = True
        if sc.filter_name == "guardian":
            for k, axis in enumerate(runtime.axes):
                dec = robust_filter(
                    axis.grid,
                    axis.system,
                    xbar.slice(axis.dims),
                    float(u_nom_cl[k]),
                    axis.nbhd,
                    density=sc.lattice_density,
                )
                u_applied[k] = dec.u_applied
                any_active = any_active or dec.active
                asm2_all = asm2_all and dec.asm2_ok
                row[f"active_{k}"] = int(dec.active)
                row[f"phi_nom_{k}"] = dec.phi_nominal
                row[f"phi_app_{k}"] = dec.phi_applied
                row[f"cone_{k}"] = dec.cone
                row[f"asm2_{k}"] = int(dec.asm2_ok)
        elif sc.filter_name == "hj-nominal":
            for k, axis in enumerate(runtime.axes):
                u_k, act = nominal_filter(
                    axis.grid,
                    axis.system,
                    x_est[list(axis.dims)],
                    float(u_nom_cl[k]),
                )
                u_applied[k] = u_k
                any_active = any_active or act
                row[f"active_{k}"] = int(act)
        elif sc.filter_name.startswith("cbf:"):
            halfwidth = float(xbar.width[0]) / 2.0
            try:
                u_k, info = runtime.cbf.step(
                    float(x_est[0]), float(u_nom_cl[0]), time_s, halfwidth
                )
                row["cbf_feasible"] = 1
                row["cbf_margin"] = info.margin_used
                row["cbf_lam"] = info.lam
            except CbfInfeasibleError as err:
                u_k = runtime.cbf.fallback_control(err.u_min, err.u_max)
                row["cbf_feasible"] = 0
                row["cbf_margin"] = float("nan")
                row["cbf_lam"] = runtime.cbf.lam
                any_active = True
            u_applied[0] = u_k
            any_active = any_active or (u_k != float(u_nom_cl[0]))
        wall_filter = (
            time.perf_counter() - t_filter if sc.filter_name != "none" else 0.0
        )
        row["filter_active"] = int(any_active)
        row["asm2_all"] = int(asm2_all)
        for k in range(sim.control_dim):
            row[f"u_nom_{k}"] = u_nom_cl[k]
            row[f"u_applied_{k}"] = u_applied[k]

        row["c_true"] = float(sim.constraint(x))
        v_min = np.inf
        for k, axis in enumerate(runtime.axes):
            sim_dims = [runtime.est_dims[i] for i in axis.dims]
            v_k = float(interp_value(axis.grid, x[sim_dims]))
            row[f"v_true_{k}"] = v_k
            v_min = min(v_min, v_k)
        row["v_true_min"] = v_min

        d = runtime.sim.disturbance_box.sample(rngs["disturbance"], 1)[0]
        u_arg = u_applied if sim.control_dim > 1 else float(u_applied[0])
        x = sim.step(x, u_arg, d)
        u_log.append(u_applied)

        t_end = time.perf_counter()
        total = t_end - t_start
        row["wall_attack"] = wall_attack
        row["wall_nnv"] = wall_nnv
        row["wall_filter"] = wall_filter
        row["wall_other"] = max(total - wall_attack - wall_nnv - wall_filter, 0.0)
        row["wall_total"] = total
        if columns is None:
            columns = list(row.keys())
        rows.append(row)

    log = TrajectoryLog(columns=columns or [], rows=rows)
    c_vals = log.array("c_true") if rows else np.array([])
    audits = {
        "pert_norm": pert_ok,
        "containment": containment_ok,
        "safety": bool(np.min(c_vals) >= 0.0)
        if sc.filter_name == "guardian" and rows
        else None,
    }
    return RunResult(
        log=log,
        audits=audits,
        xbars=xbars,
        u_applied=np.array(u_log) if u_log else np.zeros((0, sim.control_dim)),
    )


# ---------------------------------------------------------------------------
# Monte-Carlo projected rollouts
# ---------------------------------------------------------------------------


def monte_carlo_rollouts(
    runtime: Runtime, result: RunResult, n: int, seed: int | None = None
) -> dict:
    """Projected-rollout validation against a recorded filtered run.

    Rollouts start uniformly in the first recorded uncertainty set and follow
    the recorded inputs under disturbances drawn from the process box; each
    next state is projected into the next step's recorded set.  Reports the
    fraction of rollouts whose margin ever reached zero or below.
    """
    if n == 0:
        return {"rollouts": 0, "violations": 0, "fraction": 0.0, "steps": 0}
    if not result.xbars or result.xbars[0] is None:
        raise ValueError("the reference run has no recorded uncertainty sets")
    sc = runtime.scenario
    rng = derive_rngs(seed if seed is not None else sc.seed)["mc"]
    sys = runtime.mc_system
    # estimate coordinates of the mc plant within the recorded boxes
    box0 = result.xbars[0]
    X = rng.uniform(box0.lower, box0.upper, size=(n, box0.dim))
    violated = np.zeros(n, dtype=bool)
    min_margin = np.full(n, np.inf)
    steps = len(result.xbars)
    negative_set_steps = 0
    for t in range(steps):
        margin = sys.constraint(X)
        min_margin = np.minimum(min_margin, margin)
        violated |= margin <= 0.0
        if t + 1 >= steps:
            break
        u_vec = result.u_applied[t]
        d = sys.disturbance_box.sample(rng, n)
        u_arg = (
            np.broadcast_to(u_vec, (n, len(u_vec)))
            if sys.control_dim > 1
            else np.full(n, float(u_vec[0]))
        )
        X = sys.step(X, u_arg, d)
        nxt_box = result.xbars[t + 1]
        X = np.clip(X, nxt_box.lower, nxt_box.upper)
        # bookkeeping: steps whose uncertainty set pokes past the level set
        grid0 = runtime.axes[0].grid
        if len(runtime.axes) == 1:
            set_min = float(
                np.min(interp_value(grid0, box_lattice(nxt_box.slice(runtime.axes[0].dims), 5)))
            )
        else:
            set_min = min(
                float(np.min(interp_value(ax.grid, box_lattice(nxt_box.slice(ax.dims), 5))))
                for ax in runtime.axes
            )
        negative_set_steps += set_min < 0.0
    return {
        "rollouts": n,
        "violations": int(np.sum(violated)),
        "fraction": float(np.mean(violated)),
        "steps": steps,
        "min_margin": float(np.min(min_margin)),
        "steps_with_negative_set_min": int(negative_set_steps),
    }


# ---------------------------------------------------------------------------
# Timing and CSV
# ---------------------------------------------------------------------------


def timing_report(log: TrajectoryLog) -> dict:
    """Mean and standard deviation of the per-step wall-clock, total and by
    phase; phases that did no work are omitted."""
    if not len(log):
        return {}
    report = {}
    for phase in ("attack", "nnv", "filter", "other", "total"):
        col = f"wall_{phase}"
        vals = log.array(col)
        if phase in ("attack", "nnv", "filter") and float(np.sum(vals)) == 0.0:
            continue
        report[phase] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    return report


CSV_COMMENT = "# reachsafe trajectory v1; columns in order: "


def write_csv(log: TrajectoryLog, path) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_COMMENT + ",".join(log.columns) + "\n")
        fh.write(",".join(log.columns) + "\n")
        for row in log.rows:
            cells = []
            for col in log.columns:
                v = row[col]
                cells.append(v if isinstance(v, str) else f"{float(v):.17g}")
            fh.write(",".join(cells) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError("missing trajectory comment header")
        header = fh.readline().strip().split(",")
        data: dict[str, list] = {h: [] for h in header}
        for line in fh:
            if not line.strip():
                continue
            for h, cell in zip(header, line.rstrip("\n").split(",")):
                data[h].append(cell)
    out = {}
    for h, cells in data.items():
        try:
            out[h] = np.array([float(c) for c in cells])
        except ValueError:
            out[h] = np.array(cells)
    return out


# ---------------------------------------------------------------------------
# Scenario presets
# ---------------------------------------------------------------------------


def scalar_comparison_scenario(
    eps: float, filter_name: str, seed: int = 0, horizon: int = 150
) -> Scenario:
    """The tracking comparison: constant worst-sign observation offset, the
    reference stepping from the lower to the upper target."""
    return Scenario(
        name=f"scalar-{filter_name.replace(':', '-')}-eps{eps:g}",
        system="scalar",
        filter_name=filter_name,
        seed=seed,
        horizon=horizon,
        attack_kind="constant-offset",
        attack_eps=eps,
        cbf_design_eps=0.1,
    )


def taxi_scenario(
    filter_name: str,
    eps: float = 0.021,
    seed: int = 0,
    horizon: int = 400,
    x0=(0.0, -3.0, -0.46),
    target: str = "",
) -> Scenario:
    return Scenario(
        name=f"taxi-{filter_name.replace(':', '-')}-eps{eps:g}",
        system="taxi",
        filter_name=filter_name,
        seed=seed,
        horizon=horizon,
        x0=tuple(x0),
        attack_kind="pgd",
        attack_eps=eps,
        attack_target=target,
        delta_band_cells=8.0,
    )


def landmark_scenario(
    layout: str,
    filter_name: str,
    eps: float = 0.05,
    seed: int = 0,
    horizon: int = 160,
    x0=None,
) -> Scenario:
    return Scenario(
        name=f"landmarks-{layout}-{filter_name.replace(':', '-')}-eps{eps:g}",
        system="landmarks",
        filter_name=filter_name,
        seed=seed,
        horizon=horizon,
        x0=None if x0 is None else tuple(x0),
        attack_kind="pgd",
        attack_eps=eps,
        landmark_layout=layout,
        delta_band_cells=8.0,
    )

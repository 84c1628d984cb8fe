"""Measurement-robust barrier-function baselines for the scalar plant.

Discrete-time scalar-control adaptations built on the barrier pair
h1 = 1 - x, h2 = 1 + x with the exponential decay condition
h(x+) >= (1 - gamma) h(x), robustified against a bound e on the estimation
error |x - x_hat|.  With scalar control the least-deviation program collapses
to clamping the nominal input into the allowed interval.  All formulas below
are this project's adaptations of the cited filter families, not bit-level
reimplementations; their inflation constants are derived in
:func:`inflation_constant` and surfaced when a scenario is configured.

Variants:

- ``vanilla``: no robustification (e = 0);
- ``r``: fixed design margin; the barrier is shrunk to h - e and the plain
  condition is applied at the estimate.  Invariant for an inflated version of
  the safe interval, so it overshoots the true boundary once the actual error
  exceeds the design margin;
- ``r-qp``: the ``r`` margin scaled by an adaptive multiplier that decays
  while the measurement innovations look quiet and grows with them; less
  conservative, still only inflated-set invariant;
- ``mr``: state-dependent margin from the runtime verifier (the same state
  bounds the worst-case filter uses), with the condition required to hold for
  every state in the error ball on both sides, which tightens by (2 - gamma)e
  and can become infeasible when the bounds are large.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANTS = ("vanilla", "mr", "r", "r-qp")


class CbfInfeasibleError(RuntimeError):
    """The robustified constraint interval is empty at this step."""

    def __init__(self, u_min: float, u_max: float, t: float):
        self.u_min = u_min
        self.u_max = u_max
        self.t = t
        super().__init__(
            f"infeasible barrier constraints at t={t:.3f}: "
            f"need u in [{u_min:.4g}, {u_max:.4g}]"
        )


@dataclass(frozen=True)
class CbfConfig:
    variant: str
    gamma: float = 0.5
    margin: float = 0.0  # design error bound for r / r-qp
    u_lo: float = -2.0
    u_hi: float = 2.0
    dt: float = 0.1
    d_max: float = 0.02
    lam_min: float = 0.2
    adapt_up: float = 1.0
    adapt_decay: float = 0.05

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if not 0.0 < self.lam_min <= 1.0:
            raise ValueError("lam_min must lie in (0, 1]")


@dataclass(frozen=True)
class CbfStepInfo:
    feasible: bool
    margin_used: float
    u_min_required: float
    u_max_required: float
    lam: float


def allowed_interval(cfg: CbfConfig, x_hat: float, e: float) -> tuple[float, float]:
    """Raw control interval satisfying both robustified barrier conditions
    (before intersecting the actuator bounds)."""
    g, dt, dmax = cfg.gamma, cfg.dt, cfg.d_max
    if cfg.variant == "mr":
        # worst-case state on both sides of the decay condition
        u_max = (g * (1.0 - x_hat) - dt * dmax - (2.0 - g) * e) / dt
        u_min = (dt * dmax + (2.0 - g) * e - g * (1.0 + x_hat)) / dt
    else:
        # shrunken barrier h - e with the plain condition at the estimate
        u_max = (g * (1.0 - x_hat - e) - dt * dmax) / dt
        u_min = (dt * dmax - g * (1.0 + x_hat - e)) / dt
    return u_min, u_max


class CbfFilter:
    """Stateful per-run filter (the adaptive variant carries a multiplier)."""

    def __init__(self, cfg: CbfConfig):
        self.cfg = cfg
        self.reset()

    def reset(self) -> None:
        self.lam = 1.0
        self._prev_xhat: float | None = None
        self._prev_u: float | None = None

    def _margin(self, x_hat: float, meas_halfwidth: float) -> float:
        cfg = self.cfg
        if cfg.variant == "vanilla":
            return 0.0
        if cfg.variant == "mr":
            return float(meas_halfwidth)
        if cfg.variant == "r":
            return cfg.margin
        # r-qp: adapt the multiplier from the innovation of the previous step
        if self._prev_xhat is not None and cfg.margin > 0:
            predicted = self._prev_xhat + cfg.dt * self._prev_u
            innovation = abs(x_hat - predicted)
            self.lam = float(
                np.clip(
                    self.lam + cfg.adapt_up * innovation / cfg.margin - cfg.adapt_decay,
                    cfg.lam_min,
                    1.0,
                )
            )
        return self.lam * cfg.margin

    def step(
        self, x_hat: float, u_nom: float, t: float, meas_halfwidth: float = 0.0
    ) -> tuple[float, CbfStepInfo]:
        """Clamp the nominal input into the allowed interval.

        Raises :class:`CbfInfeasibleError` when the interval (intersected
        with the actuator bounds) is empty; the raw requirements ride on the
        exception so callers can log them and pick a fallback.
        """
        cfg = self.cfg
        x_hat = float(x_hat)
        e = self._margin(x_hat, meas_halfwidth)
        u_min, u_max = allowed_interval(cfg, x_hat, e)
        lo = max(u_min, cfg.u_lo)
        hi = min(u_max, cfg.u_hi)
        if lo > hi:
            self._remember(x_hat, self.fallback_control(u_min, u_max))
            raise CbfInfeasibleError(u_min, u_max, t)
        u = float(np.clip(u_nom, lo, hi))
        self._remember(x_hat, u)
        return u, CbfStepInfo(
            feasible=True,
            margin_used=e,
            u_min_required=u_min,
            u_max_required=u_max,
            lam=self.lam,
        )

    def _remember(self, x_hat: float, u: float) -> None:
        self._prev_xhat = x_hat
        self._prev_u = u

    def fallback_control(self, u_min: float, u_max: float) -> float:
        """Deterministic least-max-violation action for infeasible steps:
        the midpoint of the crossed requirements, clamped to the actuator."""
        return float(np.clip(0.5 * (u_min + u_max), self.cfg.u_lo, self.cfg.u_hi))


def inflation_constant(cfg: CbfConfig, actual_err_max: float) -> float:
    """Half-width increase of the interval the ``r`` family actually renders
    invariant for the true state.

    The filter keeps the ESTIMATE inside [-1 + margin, 1 - margin] up to one
    step of motion (dt * (u_hi + d_max)); the true state sits within the
    actual worst estimation error of the estimate, so it can overshoot the
    unit interval by the excess of that error over the design margin plus the
    one-step motion:

        kappa = max(0, actual_err_max - margin) + dt * (u_hi + d_max)
    """
    return max(0.0, actual_err_max - cfg.margin) + cfg.dt * (cfg.u_hi + cfg.d_max)

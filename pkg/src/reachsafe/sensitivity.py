"""State-dependent vulnerability fields for the landmark plant.

Two complementary diagnostics over the workspace:

- a Fisher-information analog I(x) = (1/eps^2) J^T J built from the range
  measurement Jacobian J (rows (p - l_i)^T / ||p - l_i||), whose eigenvalue
  ratio kappa = lambda_1 / lambda_2 marks positions where the measurement
  geometry is poorly conditioned and small observation perturbations move the
  estimate a lot;
- the area of the verifier's state-uncertainty box (position dimensions) at
  the same position, which needs no analytic model of the estimator.

The FIM uses the single-snapshot Jacobian (four ranges); history handling is
an estimator property that the box-volume field captures instead.  Velocity
components are pinned to the reference velocity at the nearest reference
phase when observation histories are synthesized per cell.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from reachsafe.bounds import state_uncertainty_set
from reachsafe.nets import MlpModel
from reachsafe.systems import DoubleIntParams, landmark_history

FIM_KAPPA = "fim_kappa"
NNV_VOLUME = "nnv_volume"


class SingularGeometryError(ValueError):
    """A query position coincides with a landmark."""


def range_jacobian(landmarks: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Jacobian of the range snapshot w.r.t. position, one row per landmark."""
    pos = np.asarray(pos, dtype=float)
    diff = pos - np.asarray(landmarks, dtype=float)
    norms = np.linalg.norm(diff, axis=-1)
    if np.any(norms < 1e-9):
        raise SingularGeometryError(f"position {pos} coincides with a landmark")
    return diff / norms[:, None]


def fim(landmarks: np.ndarray, pos: np.ndarray, eps: float) -> np.ndarray:
    """Fisher-information analog (1/eps^2) J^T J; symmetric PSD 2x2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    J = range_jacobian(landmarks, pos)
    return (J.T @ J) / (eps * eps)


def _symmetric_2x2_eigvals(m: np.ndarray) -> tuple[float, float]:
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(max(0.25 * (a - c) ** 2 + b * b, 0.0))
    return float(half_tr + disc), float(half_tr - disc)


def fim_condition(
    landmarks: np.ndarray, pos: np.ndarray, eps: float = 1.0, tol_eig: float = 1e-12
) -> float:
    """Eigenvalue ratio of the information matrix.  The 1/eps^2 factor
    cancels, so the ratio is computed from J^T J directly and is exactly
    independent of eps.  A vanishing second eigenvalue yields the +inf
    sentinel rather than an exception."""
    J = range_jacobian(landmarks, pos)
    lam1, lam2 = _symmetric_2x2_eigvals(J.T @ J)
    if lam2 <= tol_eig * max(lam1, 1.0):
        return float("inf")
    return lam1 / lam2


def pinned_velocity(params: DoubleIntParams, pos: np.ndarray) -> np.ndarray:
    """Reference velocity at the phase whose reference position is nearest
    to ``pos`` (closed form via the angle of the cell)."""
    pos = np.asarray(pos, dtype=float)
    ang = np.arctan2(pos[1], pos[0])
    return params.ref_radius * params.ref_omega * np.array(
        [-np.sin(ang), np.cos(ang)]
    )


def nnv_volume(
    model: MlpModel, params: DoubleIntParams, pos: np.ndarray, eps: float
) -> float:
    """Area of the verifier's position-uncertainty box at ``pos``: the
    noiseless observation history at the pinned-velocity state is perturbed
    by +-eps and pushed through the estimator bounds with zero extra
    inflation.

    Uses the fully tightened intermediate bounds: the field is a sensitivity
    diagnostic, and with plain interval intermediates the relaxation slack of
    unstable relu units varies across the workspace strongly enough to drown
    the estimator's actual sensitivity pattern."""
    state = np.concatenate([np.asarray(pos, dtype=float), pinned_velocity(params, pos)])
    hist = landmark_history(params, state)
    box = state_uncertainty_set(
        model, hist, eps, np.zeros(model.output_dim), tighten_intermediate=True
    )
    return float(np.prod(box.width[0:2]))


@dataclass(frozen=True)
class ScalarField:
    xs: np.ndarray  # (nx,)
    ys: np.ndarray  # (ny,)
    values: np.ndarray  # (nx, ny)
    metric: str
    eps: float

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


def heatmap(
    metric: str,
    params: DoubleIntParams,
    eps: float,
    model: MlpModel | None = None,
    bounds: tuple[float, float] = (-5.0, 5.0),
    n: int = 21,
) -> ScalarField:
    """Evaluate the chosen metric on every node of a square grid.  Singular
    nodes carry non-finite sentinels instead of raising."""
    xs = np.linspace(bounds[0], bounds[1], n)
    ys = np.linspace(bounds[0], bounds[1], n)
    values = np.empty((n, n))
    for i, px in enumerate(xs):
        for j, py in enumerate(ys):
            pos = np.array([px, py])
            try:
                if metric == FIM_KAPPA:
                    values[i, j] = fim_condition(params.landmarks, pos, eps)
                elif metric == NNV_VOLUME:
                    if model is None:
                        raise ValueError("nnv_volume heatmap needs an estimator")
                    values[i, j] = nnv_volume(model, params, pos, eps)
                else:
                    raise ValueError(f"unknown metric {metric!r}")
            except SingularGeometryError:
                values[i, j] = np.nan
    return ScalarField(xs=xs, ys=ys, values=values, metric=metric, eps=eps)


def field_rank_correlation(a: ScalarField, b: ScalarField) -> float:
    """Spearman rank correlation over cells finite in both fields."""
    mask = a.finite_mask() & b.finite_mask()
    if mask.sum() < 3:
        raise ValueError("not enough finite cells to correlate")
    rho, _ = stats.spearmanr(a.values[mask].ravel(), b.values[mask].ravel())
    return float(rho)


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def save_field_csv(field: ScalarField, path, extra_meta: dict | None = None) -> None:
    """CSV of (px, py, value) rows plus a sidecar text header file
    ``<path>.meta`` recording the metric, eps, and a config hash."""
    with open(path, "w") as fh:
        fh.write("px,py,value\n")
        for i, px in enumerate(field.xs):
            for j, py in enumerate(field.ys):
                fh.write(f"{px:.17g},{py:.17g},{field.values[i, j]:.17g}\n")
    meta = {
        "metric": field.metric,
        "eps": field.eps,
        "config_hash": config_hash(
            {
                "metric": field.metric,
                "eps": field.eps,
                "xs": field.xs.tolist(),
                "ys": field.ys.tolist(),
                **(extra_meta or {}),
            }
        ),
    }
    with open(str(path) + ".meta", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key}: {value}\n")

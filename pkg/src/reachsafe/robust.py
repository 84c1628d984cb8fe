"""Worst-case safety filtering over a state uncertainty set.

Instead of testing a proposed input at a single state, the filter evaluates
the worst next-step value over every state an adversary could be hiding in
(a box from :mod:`reachsafe.bounds`) and every disturbance:

    phi(X, u) = min over s in X, d in D of V(f(s, u, d))

The switching rule passes the input through iff phi >= 0 (inclusive) and
otherwise substitutes the sampled maximizer of phi.  Because the true state
is inside X, a nonnegative phi certifies the true next state stays in the
nonnegative level set of V.

Two checkable conditions back the invariance argument for scalar inputs:

- safe control cone (offline): the sign of grad(V)^T g is uniform over a
  convex set near the zero level set, so "more input" (or "less") never hurts
  anywhere in the set;
- bounded uncertainty (runtime): the uncertainty set and its one-step images
  stay inside the band {|V| <= delta} around the level set, up to parts that
  are strictly inside the safe region.

The inner minimization uses a uniform lattice over the box including all
vertices; it is exact whenever V is concave along the threat direction
(boundary-monotone values put the worst case at a vertex) and heuristic
otherwise, which the oracle tests cross-check by dense sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reachsafe.bounds import Box
from reachsafe.hjgrid import (
    ValueGrid,
    control_samples,
    disturbance_samples,
    interp_value,
    worst_next_value,
    _argmax_smallest_u,
)
from reachsafe.systems import System

CONE_NONNEG = "nonneg"
CONE_NONPOS = "nonpos"
CONE_ALL = "all"
CONE_EMPTY = "empty"
CONE_NA = "not-applicable"


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Realization of the band around the zero level set: {s : |V(s)| <= delta_band}."""

    delta_band: float
    lattice_density: int = 5
    tol_cone: float = 1e-6

    def __post_init__(self):
        if self.delta_band <= 0:
            raise ValueError("delta_band must be positive")
        if self.lattice_density < 2:
            raise ValueError("lattice_density must be at least 2")


def delta_band_from_cells(grid: ValueGrid, cells: float = 3.0) -> float:
    """Band width worth ``cells`` grid cells of value variation."""
    return float(cells * grid.edge_penalty)


@dataclass(frozen=True)
class FilterDecision:
    u_applied: float
    active: bool
    phi_nominal: float
    phi_applied: float
    xbar: Box
    asm2_ok: bool
    cone: str


def box_lattice(box: Box, density: int) -> np.ndarray:
    """Uniform lattice over the box including all vertices; degenerate axes
    contribute a single coordinate, so a point box yields exactly one point."""
    axes = [
        np.linspace(box.lower[i], box.upper[i], density)
        if box.upper[i] > box.lower[i]
        else np.array([box.lower[i]])
        for i in range(box.dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def phi(
    grid: ValueGrid, sys: System, xbar: Box, u: float, density: int = 5
) -> float:
    """Worst next-step value over the uncertainty set and the disturbance
    samples; deterministic given the lattice density."""
    pts = box_lattice(xbar, density)
    ds = disturbance_samples(sys, grid.spec.d_lattice)
    return worst_next_value(grid, sys, pts, u, ds)


def robust_control(
    grid: ValueGrid,
    sys: System,
    xbar: Box,
    density: int = 5,
    extra_candidates: tuple[float, ...] = (),
) -> float:
    """Sampled maximizer of phi over the control grid (ties toward the
    smallest |u|)."""
    pts = box_lattice(xbar, density)
    ds = disturbance_samples(sys, grid.spec.d_lattice)
    us = control_samples(sys, grid.spec.n_u)
    if extra_candidates:
        us = np.append(us, extra_candidates)
    scores = np.array([worst_next_value(grid, sys, pts, u, ds) for u in us])
    u, _ = _argmax_smallest_u(us, scores)
    return u


def check_safe_cone(
    grid: ValueGrid, sys: System, s_box: Box, nbhd: NeighborhoodSpec
) -> str:
    """Sign classification of sigma(s) = grad(V)(s)^T g(s) over a lattice on
    the box: 'nonneg' / 'nonpos' / 'all' (zero within tolerance) / 'empty'
    (mixed signs).  'not-applicable' if the box leaves the band."""
    pts = box_lattice(s_box, nbhd.lattice_density)
    vals = interp_value(grid, pts)
    if np.any(np.abs(vals) > nbhd.delta_band):
        return CONE_NA
    grads = grid.gradient(pts)
    g = sys.control_column(pts)
    sigma = np.sum(grads * g, axis=-1)
    nonneg = np.all(sigma >= -nbhd.tol_cone)
    nonpos = np.all(sigma <= nbhd.tol_cone)
    if nonneg and nonpos:
        return CONE_ALL
    if nonneg:
        return CONE_NONNEG
    if nonpos:
        return CONE_NONPOS
    return CONE_EMPTY


def check_uncertainty_bound(
    grid: ValueGrid,
    sys: System,
    xbar: Box,
    nbhd: NeighborhoodSpec,
    u_range: np.ndarray | None = None,
) -> bool:
    """Runtime smallness check: every lattice point of the uncertainty set
    and every one-step image (control samples x disturbance vertices) lies in
    the band around the level set or strictly inside the safe region, i.e.
    V >= -delta_band.  False is a legitimate answer surfaced to the log."""
    band = nbhd.delta_band
    pts = box_lattice(xbar, nbhd.lattice_density)
    if np.any(interp_value(grid, pts) < -band):
        return False
    if u_range is None:
        u_range = control_samples(sys, grid.spec.n_u)
    verts = sys.disturbance_vertices(include_center=False)
    for u in np.atleast_1d(u_range):
        for d in verts:
            nxt = sys.step(pts, np.full(len(pts), float(u)), d[None, :])
            if np.any(interp_value(grid, nxt) < -band):
                return False
    return True


def robust_filter(
    grid: ValueGrid,
    sys: System,
    xbar: Box,
    u_nom: float,
    nbhd: NeighborhoodSpec | None = None,
    density: int = 5,
) -> FilterDecision:
    """The two-case switch over the uncertainty set.

    Pass-through iff phi(X, u_nom) >= 0.  When active, applies the sampled
    maximizer of phi (the nominal proposal joins the candidate set, so the
    applied phi can never fall below the nominal one) and records the cone
    classification and the runtime uncertainty-bound check.  A failed runtime
    check does not halt filtering: the maximizer is still the best available
    action, and honesty lives in the log.
    """
    if nbhd is None:
        nbhd = NeighborhoodSpec(delta_band=delta_band_from_cells(grid))
    u_nom = float(u_nom)
    pts = box_lattice(xbar, density)
    ds = disturbance_samples(sys, grid.spec.d_lattice)
    phi_nom = worst_next_value(grid, sys, pts, u_nom, ds)
    if phi_nom >= 0.0:
        return FilterDecision(
            u_applied=u_nom,
            active=False,
            phi_nominal=phi_nom,
            phi_applied=phi_nom,
            xbar=xbar,
            asm2_ok=True,
            cone=CONE_NA,
        )
    us = np.append(control_samples(sys, grid.spec.n_u), u_nom)
    scores = np.array([worst_next_value(grid, sys, pts, u, ds) for u in us])
    u_star, phi_star = _argmax_smallest_u(us, scores)
    return FilterDecision(
        u_applied=u_star,
        active=True,
        phi_nominal=phi_nom,
        phi_applied=phi_star,
        xbar=xbar,
        asm2_ok=check_uncertainty_bound(grid, sys, xbar, nbhd),
        cone=check_safe_cone(grid, sys, xbar, nbhd),
    )

"""Grid solution of the discrete-time two-player safety game.

The value recursion

    V_k(x) = min( c(x), max_u min_d V_{k+1}(f(x, u, d)) )   with V_T = c

is iterated to a fixed point on a uniform rectangular grid, evaluating V off
the nodes by multilinear interpolation.  The nonnegative level set of the
converged V is the largest region from which the control can keep the margin
c nonnegative against worst-case disturbances; the induced policy maximizes
the worst-case next value, and the nominal switching filter passes a proposed
input through whenever its worst-case next value stays nonnegative.

Key conventions:

- node arrays are C-ordered (first state dimension slowest);
- the inner minimization samples the disturbance box at its vertices plus the
  center (optionally a denser lattice) -- strong candidates for additive
  disturbances, heuristic in general and documented as such;
- the outer maximization scans a uniform grid of control samples, breaking
  ties toward the smallest |u| (then toward the negative one);
- queries leaving the grid are clamped and charged a static one-cell margin
  penalty per cell of overshoot, so off-grid optimism is never silent;
- the per-sweep update is monotone non-increasing at every node and this is
  asserted on every sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reachsafe.systems import System


class GridFormatError(ValueError):
    """A value-grid file is malformed."""


class SweepMonotonicityError(RuntimeError):
    """A value-iteration sweep increased some node value (solver bug)."""


@dataclass(frozen=True)
class GridSpec:
    lower: np.ndarray
    upper: np.ndarray
    shape: tuple[int, ...]
    n_u: int = 41
    d_lattice: int = 0  # 0 = vertices+center only; k>=2 adds a k^dim lattice

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        shape = tuple(int(n) for n in self.shape)
        if lo.shape != hi.shape or lo.ndim != 1 or len(shape) != lo.size:
            raise ValueError("grid bounds and shape are inconsistent")
        if np.any(lo >= hi):
            raise ValueError("grid needs lower < upper per dimension")
        if any(n < 2 for n in shape):
            raise ValueError("grid needs at least 2 nodes per dimension")
        if self.n_u < 2:
            raise ValueError("need at least 2 control samples")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", shape)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (np.array(self.shape) - 1)

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(self.lower[i], self.upper[i], self.shape[i])
            for i in range(self.ndim)
        ]

    def nodes(self) -> np.ndarray:
        """All node coordinates, C-ordered, shape (prod(shape), ndim)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class ValueGrid:
    spec: GridSpec
    values: np.ndarray  # shape == spec.shape
    residual: float
    converged: bool
    iterations: int
    edge_penalty: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.shape:
            raise ValueError("values shape does not match grid spec")
        object.__setattr__(self, "values", v)

    def value(self, x, penalize_outside: bool = True) -> np.ndarray:
        return interp_value(self, x, penalize_outside)

    def gradient(self, x) -> np.ndarray:
        """Central differences with one node spacing per dimension."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = self.spec.spacing
        grads = []
        for i in range(self.spec.ndim):
            e = np.zeros(self.spec.ndim)
            e[i] = h[i]
            grads.append(
                (interp_value(self, x + e) - interp_value(self, x - e)) / (2 * h[i])
            )
        return np.stack(grads, axis=-1)


def _gather_plan(spec: GridSpec, pts: np.ndarray):
    """Clamped multilinear interpolation plan: flat corner indices, corner
    weights, and the static penalty multiplier (cells of overshoot, 0 inside).

    Coordinates within 1e-9 cells of a node snap to it so node queries are
    exact.
    """
    pts = np.asarray(pts, dtype=float)
    shape = np.array(spec.shape)
    t = (pts - spec.lower) / spec.spacing
    snapped = np.rint(t)
    t = np.where(np.abs(t - snapped) < 1e-9, snapped, t)
    below = np.maximum(-t, 0.0)
    above = np.maximum(t - (shape - 1), 0.0)
    overshoot = (below + above).sum(axis=-1)
    t = np.clip(t, 0.0, shape - 1)
    idx = np.minimum(t.astype(np.int64), shape - 2)
    frac = t - idx
    strides = np.ones(spec.ndim, dtype=np.int64)
    for i in range(spec.ndim - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    base = idx @ strides
    n_corners = 1 << spec.ndim
    flat = np.empty(pts.shape[:-1] + (n_corners,), dtype=np.int64)
    weight = np.empty(pts.shape[:-1] + (n_corners,), dtype=float)
    for corner in range(n_corners):
        off = np.array([(corner >> i) & 1 for i in range(spec.ndim)])
        flat[..., corner] = base + off @ strides
        w = np.where(off.astype(bool), frac, 1.0 - frac)
        weight[..., corner] = np.prod(w, axis=-1)
    return flat, weight, overshoot


def _apply_plan(values_flat, plan, edge_penalty, penalize_outside=True):
    flat, weight, overshoot = plan
    out = (values_flat[flat] * weight).sum(axis=-1)
    if penalize_outside:
        out = out - edge_penalty * np.where(overshoot > 0, 1.0 + overshoot, 0.0)
    return out


def interp_value(grid: ValueGrid, x, penalize_outside: bool = True) -> np.ndarray:
    """Multilinear interpolation of the value surface, exact at nodes.
    Points outside the grid are clamped and charged the one-cell penalty."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    plan = _gather_plan(grid.spec, pts)
    out = _apply_plan(grid.values.ravel(), plan, grid.edge_penalty, penalize_outside)
    return float(out[0]) if single else out


def _one_cell_variation(node_values: np.ndarray) -> float:
    worst = 0.0
    for axis in range(node_values.ndim):
        d = np.abs(np.diff(node_values, axis=axis))
        if d.size:
            worst = max(worst, float(d.max()))
    return worst


def control_samples(sys: System, n_u: int) -> np.ndarray:
    lo, hi = sys.control_bounds
    return np.linspace(lo, hi, n_u)


def disturbance_samples(sys: System, lattice: int = 0) -> np.ndarray:
    """Vertices plus center of the disturbance box, optionally a lattice."""
    pts = sys.disturbance_vertices(include_center=True)
    if lattice >= 2:
        axes = [
            np.linspace(sys.disturbance_box.lower[i], sys.disturbance_box.upper[i], lattice)
            for i in range(sys.disturbance_box.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        extra = np.stack([m.ravel() for m in mesh], axis=-1)
        pts = np.vstack([pts, extra])
    return np.unique(pts, axis=0)


def value_iteration(
    sys: System,
    spec: GridSpec,
    tol: float = 1e-4,
    max_iters: int = 500,
) -> ValueGrid:
    """Fixed-point iteration of the safety game recursion on the grid."""
    if sys.control_dim != 1:
        raise ValueError("value iteration needs a scalar-control system")
    if sys.state_dim != spec.ndim:
        raise ValueError(
            f"system state dim {sys.state_dim} does not match grid dim {spec.ndim}"
        )
    if tol <= 0:
        raise ValueError("tol must be positive")
    nodes = spec.nodes()
    c = np.asarray(sys.constraint(nodes), dtype=float)
    edge_penalty = _one_cell_variation(c.reshape(spec.shape))
    us = control_samples(sys, spec.n_u)
    ds = disturbance_samples(sys, spec.d_lattice)

    # next-state geometry is sweep-independent: precompute the gather plan
    # for every (control sample, disturbance sample) pair
    plans = []
    for u in us:
        row = []
        for d in ds:
            nxt = sys.step(nodes, np.full(len(nodes), u), d[None, :])
            row.append(_gather_plan(spec, nxt))
        plans.append(row)

    V = c.copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        vflat = V  # already flat (N,)
        best = np.full_like(V, -np.inf)
        for row in plans:
            worst = np.full_like(V, np.inf)
            for plan in row:
                np.minimum(
                    worst, _apply_plan(vflat, plan, edge_penalty), out=worst
                )
            np.maximum(best, worst, out=best)
        V_new = np.minimum(c, best)
        if np.any(V_new > V):
            raise SweepMonotonicityError(
                f"sweep {iterations} increased {int(np.sum(V_new > V))} node values"
            )
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if residual <= tol:
            break
    converged = residual <= tol
    return ValueGrid(
        spec=spec,
        values=V.reshape(spec.shape),
        residual=residual,
        converged=converged,
        iterations=iterations,
        edge_penalty=edge_penalty,
    )


def worst_next_value(
    grid: ValueGrid, sys: System, states: np.ndarray, u: float, ds: np.ndarray
) -> float:
    """min over the given states and disturbance samples of V(f(s, u, d))."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    worst = np.inf
    for d in ds:
        nxt = sys.step(states, np.full(len(states), u), d[None, :])
        worst = min(worst, float(np.min(interp_value(grid, nxt))))
    return worst


def _argmax_smallest_u(us: np.ndarray, scores: np.ndarray) -> tuple[float, float]:
    """Argmax breaking exact ties toward the smallest |u| (negative first)."""
    order = np.lexsort((us, np.abs(us)))
    best_i = order[0]
    for i in order[1:]:
        if scores[i] > scores[best_i]:
            best_i = i
    return float(us[best_i]), float(scores[best_i])


def nominal_safe_control(grid: ValueGrid, sys: System, x: np.ndarray) -> float:
    """Maximizer of the worst-case next value over the control sample grid."""
    ds = disturbance_samples(sys, grid.spec.d_lattice)
    us = control_samples(sys, grid.spec.n_u)
    scores = np.array(
        [worst_next_value(grid, sys, x[None, :], u, ds) for u in us]
    )
    u, _ = _argmax_smallest_u(us, scores)
    return u


def nominal_filter(
    grid: ValueGrid, sys: System, x: np.ndarray, u_nom: float
) -> tuple[float, bool]:
    """Switching filter at a known state: pass ``u_nom`` through iff its
    worst-case next value is nonnegative (inclusive), else substitute the
    sampled argmax (the proposed input joins the candidate set)."""
    x = np.asarray(x, dtype=float)
    ds = disturbance_samples(sys, grid.spec.d_lattice)
    worst = worst_next_value(grid, sys, x[None, :], u_nom, ds)
    if worst >= 0.0:
        return float(u_nom), False
    us = control_samples(sys, grid.spec.n_u)
    candidates = np.append(us, u_nom)
    scores = np.array(
        [worst_next_value(grid, sys, x[None, :], u, ds) for u in candidates]
    )
    u, _ = _argmax_smallest_u(candidates, scores)
    return u, True


GRID_MAGIC = "reachsafe-grid 1"


def save_grid(grid: ValueGrid, path) -> None:
    """Text header followed by the raw little-endian float64 node array in C
    order (first dimension slowest)."""
    lines = [GRID_MAGIC, f"dims {grid.spec.ndim}"]
    for i in range(grid.spec.ndim):
        lines.append(
            f"dim {i} {float(grid.spec.lower[i])!r} {float(grid.spec.upper[i])!r} "
            f"{grid.spec.shape[i]}"
        )
    lines.append(f"n_u {grid.spec.n_u}")
    lines.append(f"d_lattice {grid.spec.d_lattice}")
    lines.append(f"residual {float(grid.residual)!r}")
    lines.append(f"converged {int(grid.converged)}")
    lines.append(f"iterations {grid.iterations}")
    lines.append(f"edge_penalty {float(grid.edge_penalty)!r}")
    lines.append("data")
    header = ("\n".join(lines) + "\n").encode("ascii")
    data = grid.values.astype("<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def load_grid(path) -> ValueGrid:
    with open(path, "rb") as fh:
        blob = fh.read()
    marker = b"\ndata\n"
    cut = blob.find(marker)
    if cut < 0:
        raise GridFormatError("missing 'data' section")
    header = blob[:cut].decode("ascii", errors="replace").splitlines()
    payload = blob[cut + len(marker):]
    if not header or header[0] != GRID_MAGIC:
        raise GridFormatError(
            f"bad magic line {header[0]!r}; expected {GRID_MAGIC!r}"
        )
    fields = {}
    dims = {}
    for line in header[1:]:
        parts = line.split()
        if parts[0] == "dim":
            dims[int(parts[1])] = (float(parts[2]), float(parts[3]), int(parts[4]))
        else:
            fields[parts[0]] = parts[1]
    try:
        ndim = int(fields["dims"])
        lower = np.array([dims[i][0] for i in range(ndim)])
        upper = np.array([dims[i][1] for i in range(ndim)])
        shape = tuple(dims[i][2] for i in range(ndim))
        spec = GridSpec(
            lower,
            upper,
            shape,
            n_u=int(fields["n_u"]),
            d_lattice=int(fields["d_lattice"]),
        )
        residual = float(fields["residual"])
        converged = bool(int(fields["converged"]))
        iterations = int(fields["iterations"])
        edge_penalty = float(fields["edge_penalty"])
    except (KeyError, ValueError, IndexError) as exc:
        raise GridFormatError(f"malformed grid header: {exc}") from exc
    count = int(np.prod(shape))
    values = np.frombuffer(payload, dtype="<f8", count=-1)
    if values.size != count:
        raise GridFormatError(
            f"node array has {values.size} values, header promises {count}"
        )
    return ValueGrid(
        spec=spec,
        values=values.reshape(shape).copy(),
        residual=residual,
        converged=converged,
        iterations=iterations,
        edge_penalty=edge_penalty,
    )

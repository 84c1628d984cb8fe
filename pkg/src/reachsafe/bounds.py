"""Sound linear output bounds for feedforward networks over input boxes.

Given a network pi and a box of inputs, :func:`crown_bounds` produces affine
envelopes  psi*z + alpha <= pi(z) <= xi*z + beta  that hold for every z in the
box.  Intermediate pre-activation ranges come from interval propagation by
default (linear in depth; a flag switches to full backward bounding per layer
for tighter intermediates).  The final envelopes come from backward
substitution of per-neuron linear relaxations:

- relu: triangle upper line; lower line slope 0 or 1, whichever halves the
  relaxation area;
- tanh/sigmoid: secant on the purely convex/concave side, midpoint tangent on
  the other; in the mixed case a tangent line anchored at the far endpoint
  (found by bisection), falling back to the secant when that is already sound.
  Intercepts get a 1e-12 outward nudge after an endpoint soundness check.

:func:`concretize` turns the affine envelopes into an interval box, and
:func:`state_uncertainty_set` builds the runtime uncertainty set: the network
image box of (observation +- eps) inflated by the estimator's offline error
bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reachsafe.nets import DimensionError, MlpModel, _act, forward, sigmoid

_NUDGE = 1e-12


class BoundExplosionError(ArithmeticError):
    """Interval propagation produced non-finite values."""

    def __init__(self, layer: int):
        self.layer = layer
        super().__init__(f"non-finite bounds while propagating layer {layer}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned interval vector."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError(f"box bounds shapes differ: {lo.shape} vs {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: np.ndarray, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def inflate(self, margin: np.ndarray) -> "Box":
        m = np.broadcast_to(np.asarray(margin, dtype=float), self.lower.shape)
        return Box(self.lower - m, self.upper + m)

    def slice(self, dims) -> "Box":
        dims = list(dims)
        return Box(self.lower[dims], self.upper[dims])

    @staticmethod
    def around(center: np.ndarray, radius) -> "Box":
        c = np.asarray(center, dtype=float)
        r = np.broadcast_to(np.asarray(radius, dtype=float), c.shape)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        return Box(c - r, c + r)


@dataclass(frozen=True)
class LinearBounds:
    """Affine envelopes of a network over ``domain``:
    psi @ z + alpha_vec <= pi(z) <= xi @ z + beta_vec for all z in domain."""

    psi: np.ndarray
    alpha_vec: np.ndarray
    xi: np.ndarray
    beta_vec: np.ndarray
    domain: Box

    def lower_at(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.psi.T + self.alpha_vec

    def upper_at(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.xi.T + self.beta_vec


def _interval_affine(lo, hi, w, b):
    wp = np.maximum(w, 0.0)
    wn = np.minimum(w, 0.0)
    return lo @ wp.T + hi @ wn.T + b, hi @ wp.T + lo @ wn.T + b


def _relu_relax(lo, hi):
    """Per-neuron lines (sl, tl, su, tu) with sl*a+tl <= relu(a) <= su*a+tu on [lo, hi]."""
    sl = np.zeros_like(lo)
    tl = np.zeros_like(lo)
    su = np.zeros_like(lo)
    tu = np.zeros_like(lo)

    active = lo >= 0.0
    sl[active] = 1.0
    su[active] = 1.0
    # inactive (hi <= 0): all-zero lines are exact

    mixed = (lo < 0.0) & (hi > 0.0)
    if np.any(mixed):
        l, h = lo[mixed], hi[mixed]
        slope = h / (h - l)
        su[mixed] = slope
        tu[mixed] = -l * slope
        sl[mixed] = (np.abs(l) < np.abs(h)).astype(float)

    degen = lo == hi
    if np.any(degen):
        # exact tangent at the point; slope 0 at the kink itself
        s = (lo[degen] > 0.0).astype(float)
        t = np.maximum(lo[degen], 0.0) - s * lo[degen]
        for arr_s, arr_t in ((sl, tl), (su, tu)):
            arr_s[degen] = s
            arr_t[degen] = t
    return sl, tl, su, tu


def _s_curve_relax(lo, hi, f, df):
    """Relaxation lines for an increasing S-shaped activation (inflection at 0)."""
    sl = np.empty_like(lo)
    tl = np.empty_like(lo)
    su = np.empty_like(lo)
    tu = np.empty_like(lo)

    flo, fhi = f(lo), f(hi)
    width = hi - lo
    degen = width < 1e-12
    safe_width = np.where(degen, 1.0, width)
    secant = (fhi - flo) / safe_width
    mid = 0.5 * (lo + hi)
    fmid, dmid = f(mid), df(mid)

    concave = lo >= 0.0  # secant below, tangent above
    convex = hi <= 0.0  # secant above, tangent below
    mixed = ~(concave | convex | degen)

    sl[concave] = secant[concave]
    tl[concave] = flo[concave] - secant[concave] * lo[concave]
    su[concave] = dmid[concave]
    tu[concave] = fmid[concave] - dmid[concave] * mid[concave]

    su[convex] = secant[convex]
    tu[convex] = fhi[convex] - secant[convex] * hi[convex]
    sl[convex] = dmid[convex]
    tl[convex] = fmid[convex] - dmid[convex] * mid[convex]

    if np.any(mixed):
        l, h = lo[mixed], hi[mixed]
        fl, fh = flo[mixed], fhi[mixed]
        sec = secant[mixed]

        # upper line: through (l, f(l)); tangent point on [0, h] when the
        # secant cuts the curve near h, otherwise the secant itself is sound
        need_tan = df(h) <= sec
        d = _bisect_tangent(l, fl, np.zeros_like(h), h, f, df)
        s_up = np.where(need_tan, df(d), sec)
        t_up = np.where(need_tan, fl - df(d) * l, fl - sec * l)

        # lower line: through (h, f(h)); tangent point on [l, 0] mirrored
        need_tan_lo = df(l) <= sec
        d2 = _bisect_tangent(h, fh, l, np.zeros_like(l), f, df)
        s_lo = np.where(need_tan_lo, df(d2), sec)
        t_lo = np.where(need_tan_lo, fh - df(d2) * h, fh - sec * h)

        su[mixed], tu[mixed] = s_up, t_up
        sl[mixed], tl[mixed] = s_lo, t_lo

    if np.any(degen):
        s = df(lo[degen])
        t = flo[degen] - s * lo[degen]
        sl[degen] = s
        tl[degen] = t
        su[degen] = s
        tu[degen] = t

    # endpoint soundness check with an outward nudge
    for a, fa in ((lo, flo), (hi, fhi)):
        tu += np.maximum(fa - (su * a + tu), 0.0)
        tl -= np.maximum((sl * a + tl) - fa, 0.0)
    tu += _NUDGE
    tl -= _NUDGE
    return sl, tl, su, tu


def _bisect_tangent(anchor, f_anchor, left, right, f, df, iters: int = 50):
    """Tangent point d in [left, right] whose tangent line passes through
    (anchor, f_anchor): solves df(d)*(d - anchor) - (f(d) - f_anchor) = 0."""

    def g(d):
        return df(d) * (d - anchor) - (f(d) - f_anchor)

    a, b = left.astype(float).copy(), right.astype(float).copy()
    ga = g(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        gm = g(m)
        same = (gm > 0.0) == (ga > 0.0)
        a = np.where(same, m, a)
        ga = np.where(same, gm, ga)
        b = np.where(same, b, m)
    return 0.5 * (a + b)


def _tanh_df(a):
    t = np.tanh(a)
    return 1.0 - t * t


def _sigmoid_df(a):
    s = sigmoid(a)
    return s * (1.0 - s)


def _relaxation(activation: str, lo, hi):
    if activation == "relu":
        return _relu_relax(lo, hi)
    if activation == "tanh":
        return _s_curve_relax(lo, hi, np.tanh, _tanh_df)
    if activation == "sigmoid":
        return _s_curve_relax(lo, hi, sigmoid, _sigmoid_df)
    ones = np.ones_like(lo)
    zeros = np.zeros_like(lo)
    return ones, zeros, ones, zeros


def _preactivation_intervals(model: MlpModel, domain: Box):
    """Pre-activation interval per layer by interval propagation."""
    lo, hi = domain.lower, domain.upper
    pre = []
    for k, layer in enumerate(model.layers):
        alo, ahi = _interval_affine(lo, hi, layer.weight, layer.bias)
        if not (np.all(np.isfinite(alo)) and np.all(np.isfinite(ahi))):
            raise BoundExplosionError(k)
        pre.append((alo, ahi))
        # all supported activations are monotone increasing
        lo, hi = _act(layer.activation, alo), _act(layer.activation, ahi)
    return pre


def _backward_bounds(model: MlpModel, domain: Box, relax, upto: int):
    """Backward substitution from the affine output of layer ``upto`` down to
    the input.  ``relax[k]`` holds the relaxation lines of layer k's
    activation (needed for k < upto)."""
    layer = model.layers[upto]
    A_lo = layer.weight.copy()
    c_lo = layer.bias.copy()
    A_up = layer.weight.copy()
    c_up = layer.bias.copy()
    for k in range(upto - 1, -1, -1):
        sl, tl, su, tu = relax[k]
        # pass the linear terms through the activation relaxation
        Ap, An = np.maximum(A_up, 0.0), np.minimum(A_up, 0.0)
        c_up = c_up + Ap @ tu + An @ tl
        A_up = Ap * su + An * sl
        Ap, An = np.maximum(A_lo, 0.0), np.minimum(A_lo, 0.0)
        c_lo = c_lo + Ap @ tl + An @ tu
        A_lo = Ap * sl + An * su
        # absorb the affine layer
        lk = model.layers[k]
        c_up = c_up + A_up @ lk.bias
        A_up = A_up @ lk.weight
        c_lo = c_lo + A_lo @ lk.bias
        A_lo = A_lo @ lk.weight
        if not (np.all(np.isfinite(A_up)) and np.all(np.isfinite(A_lo))):
            raise BoundExplosionError(k)
    return A_lo, c_lo, A_up, c_up


def crown_bounds(
    model: MlpModel, domain: Box, tighten_intermediate: bool = False
) -> LinearBounds:
    """Sound affine envelopes of the network output over ``domain``.

    With ``tighten_intermediate`` the pre-activation ranges of every hidden
    layer are themselves computed by backward substitution (quadratic in
    depth) instead of interval propagation.
    """
    if domain.dim != model.input_dim:
        raise DimensionError(
            f"domain dim {domain.dim} does not match model input {model.input_dim}"
        )
    if not tighten_intermediate:
        pre = _preactivation_intervals(model, domain)
        relax = [
            _relaxation(layer.activation, *pre[k])
            for k, layer in enumerate(model.layers)
        ]
    else:
        relax = []
        for k, layer in enumerate(model.layers):
            A_lo, c_lo, A_up, c_up = _backward_bounds(model, domain, relax, k)
            alo = _concretize_one(A_lo, c_lo, domain, lower=True)
            ahi = _concretize_one(A_up, c_up, domain, lower=False)
            if not (np.all(np.isfinite(alo)) and np.all(np.isfinite(ahi))):
                raise BoundExplosionError(k)
            relax.append(_relaxation(layer.activation, alo, ahi))
    A_lo, c_lo, A_up, c_up = _backward_bounds(
        model, domain, relax, len(model.layers) - 1
    )
    return LinearBounds(A_lo, c_lo, A_up, c_up, domain)


def _concretize_one(A, c, domain: Box, lower: bool):
    Ap, An = np.maximum(A, 0.0), np.minimum(A, 0.0)
    if lower:
        return Ap @ domain.lower + An @ domain.upper + c
    return Ap @ domain.upper + An @ domain.lower + c


def concretize(b: LinearBounds) -> Box:
    """Interval image of the affine envelopes over their domain (closed form
    by splitting coefficient signs against the domain corners)."""
    lo = _concretize_one(b.psi, b.alpha_vec, b.domain, lower=True)
    hi = _concretize_one(b.xi, b.beta_vec, b.domain, lower=False)
    return Box(lo, hi)


def interval_image(model: MlpModel, domain: Box) -> Box:
    """Output box by pure interval propagation through every layer."""
    lo, hi = domain.lower, domain.upper
    for k, layer in enumerate(model.layers):
        alo, ahi = _interval_affine(lo, hi, layer.weight, layer.bias)
        if not (np.all(np.isfinite(alo)) and np.all(np.isfinite(ahi))):
            raise BoundExplosionError(k)
        lo, hi = _act(layer.activation, alo), _act(layer.activation, ahi)
    return Box(lo, hi)


def output_box(
    model: MlpModel, domain: Box, tighten_intermediate: bool = False
) -> Box:
    """Tightest available sound output box: the backward-substitution box
    intersected with the interval-propagation box (both enclose the image,
    so the intersection does too)."""
    crown = concretize(crown_bounds(model, domain, tighten_intermediate))
    ibp = interval_image(model, domain)
    lo = np.maximum(crown.lower, ibp.lower)
    hi = np.minimum(crown.upper, ibp.upper)
    # the true image is inside both boxes; any crossing is fp noise
    return Box(lo, np.maximum(hi, lo))


def state_uncertainty_set(
    model: MlpModel,
    perturbed_obs: np.ndarray,
    eps: float,
    est_err: np.ndarray,
    tighten_intermediate: bool = False,
) -> Box:
    """Box guaranteed to contain the true state.

    The true observation lies within ``eps`` (sup-norm) of ``perturbed_obs``,
    so the clean estimate lies in the network's image box of that observation
    ball; inflating by the offline estimation-error bound ``est_err`` then
    covers the true state.
    """
    obs = np.asarray(perturbed_obs, dtype=float)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    est_err = np.broadcast_to(np.asarray(est_err, dtype=float), (model.output_dim,))
    if np.any(est_err < 0):
        raise ValueError("est_err must be nonnegative")
    if obs.shape[-1] != model.input_dim:
        raise DimensionError(
            f"observation dim {obs.shape[-1]} does not match model input "
            f"{model.input_dim}"
        )
    if eps == 0.0:
        est = forward(model, obs)
        return Box(est - est_err, est + est_err)
    image = output_box(model, Box.around(obs, eps), tighten_intermediate)
    return image.inflate(est_err)

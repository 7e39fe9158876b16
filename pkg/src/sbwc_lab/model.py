"""Two-layer network with fixed balanced output signs.

The model is  Phi(w, x) = (1/sqrt(m)) * sum_j a_j * sigma(<w_j, x>)
with a_j in {+1, -1}, half of each, fixed during training.  Only the
first-layer weights w (a flat vector of length m*d, neuron j owning the
slice [j*d, (j+1)*d)) are trainable.

The Hessian in w is block diagonal, one d-x-d rank-one block per neuron,
so Hessian-vector products cost the same as a gradient:

    block_j of H v = (1/sqrt(m)) * a_j * sigma''(<w_j, x>) * <x, v_j> * x

Gradient norms are bounded by ell*||x|| and the Hessian operator norm by
big_l*||x||^2/sqrt(m); both bounds are exercised by tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec


@dataclass(frozen=True)
class NetworkShape:
    """Hidden width m (even, for balanced signs) and input dimension d."""

    m: int
    d: int

    def __post_init__(self):
        if self.m <= 0 or self.m % 2 != 0:
            raise ValueError(f"hidden width m must be a positive even integer, got {self.m}")
        if self.d <= 0:
            raise ValueError(f"input dimension d must be positive, got {self.d}")

    @property
    def param_dim(self) -> int:
        return self.m * self.d


def balanced_signs(m: int) -> np.ndarray:
    """+1 for the first m/2 neurons, -1 for the rest (fixed layout)."""
    if m <= 0 or m % 2 != 0:
        raise ValueError(f"m must be a positive even integer, got {m}")
    signs = np.ones(m)
    signs[m // 2:] = -1.0
    return signs


@dataclass(frozen=True)
class Weights:
    """Flat first-layer weight vector plus the fixed sign vector."""

    w: np.ndarray
    signs: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        signs = np.asarray(self.signs, dtype=np.float64)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "signs", signs)
        m = signs.shape[0]
        if w.ndim != 1 or m == 0 or w.shape[0] % m != 0:
            raise ValueError("weight vector length must be a multiple of the neuron count")
        if int(np.sum(signs == 1.0)) != m // 2 or int(np.sum(signs == -1.0)) != m - m // 2 or m % 2 != 0:
            raise ValueError("signs must contain exactly m/2 entries of +1 and m/2 of -1")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite entries")

    @property
    def m(self) -> int:
        return self.signs.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[0] // self.m

    def as_matrix(self) -> np.ndarray:
        """View of w as an (m, d) matrix, row j = neuron j."""
        return self.w.reshape(self.m, self.d)


def new_weights(shape: NetworkShape, w: np.ndarray) -> Weights:
    if w.shape != (shape.param_dim,):
        raise ValueError(f"expected weight vector of length {shape.param_dim}, got {w.shape}")
    return Weights(w=w, signs=balanced_signs(shape.m))


def _check_dims(shape: NetworkShape, weights: Weights, x: np.ndarray):
    if weights.m != shape.m or weights.d != shape.d:
        raise ValueError(f"weights are for shape ({weights.m}, {weights.d}), expected ({shape.m}, {shape.d})")
    if x.shape != (shape.d,):
        raise ValueError(f"input must have length d={shape.d}, got {x.shape}")


def forward(shape: NetworkShape, spec: ActivationSpec, weights: Weights,
            x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    _check_dims(shape, weights, x)
    z = weights.as_matrix() @ x
    sig, _, _ = spec.eval(z)
    return float(weights.signs @ sig) / np.sqrt(shape.m)


def model_grad(shape: NetworkShape, spec: ActivationSpec, weights: Weights,
               x: np.ndarray) -> np.ndarray:
    """Gradient of Phi in w, flat (m*d,) vector."""
    x = np.asarray(x, dtype=np.float64)
    _check_dims(shape, weights, x)
    z = weights.as_matrix() @ x
    _, d1, _ = spec.eval(z)
    coeff = weights.signs * d1 / np.sqrt(shape.m)
    return np.outer(coeff, x).ravel()


def model_hvp(shape: NetworkShape, spec: ActivationSpec, weights: Weights,
              x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Product of the (block-diagonal) Hessian of Phi in w with v."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_dims(shape, weights, x)
    if v.shape != (shape.param_dim,):
        raise ValueError(f"direction must have length {shape.param_dim}, got {v.shape}")
    z = weights.as_matrix() @ x
    _, _, d2 = spec.eval(z)
    vx = v.reshape(shape.m, shape.d) @ x
    coeff = weights.signs * d2 * vx / np.sqrt(shape.m)
    return np.outer(coeff, x).ravel()

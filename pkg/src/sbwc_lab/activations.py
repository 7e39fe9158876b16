"""Smooth activation functions with certified derivative bounds.

Each activation ships with explicit constants: ``ell`` bounds the first
derivative, ``big_l`` bounds the second derivative, and ``mu`` (softplus
only) is a local strong-convexity constant on [-2, 2].  Every inequality
used downstream is stated in terms of these constants, so they must be
real bounds, not estimates; tests re-certify them on a dense grid.

ReLU is deliberately absent: the curvature machinery needs two
derivatives everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Analytic suprema for GELU: |sigma'| peaks at u = sqrt(2), |sigma''| at 0.
GELU_ELL = float(0.5 * (1.0 + erf(1.0)) + _SQRT2 * _INV_SQRT_2PI * np.exp(-1.0))
GELU_BIG_L = float(np.sqrt(2.0 / np.pi))


@dataclass(frozen=True)
class ActivationSpec:
    """An activation family together with its certified constants."""

    kind: str
    ell: float
    big_l: float
    mu: float | None = None

    def eval(self, u):
        """Return (sigma, sigma', sigma'') at u (scalar or ndarray)."""
        return act_eval(self, u)


_SPECS = {
    "softplus": ActivationSpec("softplus", ell=1.0, big_l=0.25, mu=0.1),
    "tanh": ActivationSpec("tanh", ell=1.0, big_l=4.0 / (3.0 * np.sqrt(3.0))),
    "gelu": ActivationSpec("gelu", ell=GELU_ELL, big_l=GELU_BIG_L),
}


def activation(kind: str) -> ActivationSpec:
    """Look up an activation spec by kind string."""
    try:
        return _SPECS[kind]
    except KeyError:
        raise ValueError(
            f"unknown activation {kind!r}; expected one of {sorted(_SPECS)}"
        ) from None


def _sigmoid(u):
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _softplus(u):
    # u + log1p(e^-u) for u > 0 avoids overflow of e^u.
    out = np.where(u > 0, u, 0.0) + np.log1p(np.exp(-np.abs(u)))
    return out


def act_eval(spec: ActivationSpec, u):
    """Evaluate (sigma(u), sigma'(u), sigma''(u)).

    Accepts scalars or arrays; raises ValueError on non-finite input.
    """
    arr = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("activation input must be finite")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)

    if spec.kind == "softplus":
        s = _sigmoid(arr)
        val, d1, d2 = _softplus(arr), s, s * (1.0 - s)
    elif spec.kind == "tanh":
        t = np.tanh(arr)
        one_minus_t2 = 1.0 - t * t
        val, d1, d2 = t, one_minus_t2, -2.0 * t * one_minus_t2
    elif spec.kind == "gelu":
        cdf = 0.5 * (1.0 + erf(arr / _SQRT2))
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * arr * arr)
        val = arr * cdf
        d1 = cdf + arr * pdf
        d2 = pdf * (2.0 - arr * arr)
    else:  # pragma: no cover - constructor prevents this
        raise ValueError(f"unknown activation kind {spec.kind!r}")

    if scalar:
        return float(val[0]), float(d1[0]), float(d2[0])
    return val, d1, d2


def certify_activation(spec: ActivationSpec, n_points: int = 100_000,
                       lo: float = -50.0, hi: float = 50.0) -> dict:
    """Grid-check |sigma'| <= ell and |sigma''| <= big_l on [lo, hi].

    Returns the measured maxima and the boolean verdicts so reports can
    show the slack, not just pass/fail.
    """
    grid = np.linspace(lo, hi, n_points)
    _, d1, d2 = act_eval(spec, grid)
    max_d1 = float(np.max(np.abs(d1)))
    max_d2 = float(np.max(np.abs(d2)))
    return {
        "kind": spec.kind,
        "max_abs_d1": max_d1,
        "max_abs_d2": max_d2,
        "ell_ok": max_d1 <= spec.ell,
        "big_l_ok": max_d2 <= spec.big_l,
    }

"""Scalar classification losses with certified assumption flags.

A loss here is a convex, non-negative, decreasing function of the margin.
Each ``LossSpec`` carries the constants under which its regularity
assumptions hold: ``g_f`` (Lipschitz), ``l_f`` (smoothness), ``beta_f``
(self-boundedness |f'| <= beta_f * f) and a second-order flag
(f'' <= f).  ``None`` means the loss does not satisfy that assumption
with any constant we are willing to certify.  ``certify_loss`` re-checks
every inequality on a dense grid, so the flags are measurements rather
than folklore.

Config strings: "logistic", "exp", "poly:2.0".

The polynomial-tail loss is f(u) = u^(-beta) for u >= 1.  Below the
junction it continues as exp(q(u)) with
q(u) = -beta*(u-1) + beta*log cosh(u-1), which matches value, first and
second derivative at u = 1 (q is the quadratic -beta*s + beta*s^2/2 to
second order in s = u-1), is convex and decreasing, and keeps
|f'|/f = beta*(1 - tanh(u-1)) < 2*beta bounded so the loss stays
self-bounded with beta_f = 2*beta and representable in float64 on the
certification grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SLACK_TOL = 1e-12


@dataclass(frozen=True)
class LossSpec:
    kind: str
    g_f: float | None
    l_f: float | None
    beta_f: float | None
    second_order_self_bounded: bool
    beta: float | None = None  # polytail decay rate

    def eval(self, u):
        return loss_eval(self, u)


LOGISTIC = LossSpec("logistic", g_f=1.0, l_f=0.25, beta_f=1.0,
                    second_order_self_bounded=True)
EXPONENTIAL = LossSpec("exponential", g_f=None, l_f=None, beta_f=1.0,
                       second_order_self_bounded=True)


def polytail(beta: float) -> LossSpec:
    if beta <= 0:
        raise ValueError("polytail decay rate must be positive")
    return LossSpec("polytail", g_f=None, l_f=None, beta_f=2.0 * beta,
                    second_order_self_bounded=False, beta=beta)


def parse_loss(name: str) -> LossSpec:
    """Parse a loss config string: "logistic", "exp", "poly:2.0"."""
    if name == "logistic":
        return LOGISTIC
    if name in ("exp", "exponential"):
        return EXPONENTIAL
    if name.startswith("poly:"):
        return polytail(float(name.split(":", 1)[1]))
    raise ValueError(f"unknown loss {name!r}; expected logistic, exp or poly:<beta>")


def loss_name(spec: LossSpec) -> str:
    if spec.kind == "polytail":
        return f"poly:{spec.beta}"
    return "exp" if spec.kind == "exponential" else spec.kind


def _logcosh(x):
    # |x| + log1p(e^{-2|x|}) - log 2, overflow-free for any float.
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def loss_eval(spec: LossSpec, u):
    """Evaluate (f(u), f'(u), f''(u)); scalars in, scalars out."""
    arr = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss input must be finite")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)

    if spec.kind == "logistic":
        # log(1 + e^-u), stable on both branches
        val = np.where(arr > 0, 0.0, -arr) + np.log1p(np.exp(-np.abs(arr)))
        e = np.exp(-np.abs(arr))
        s_neg = np.where(arr >= 0, e / (1.0 + e), 1.0 / (1.0 + e))  # sigmoid(-u)
        d1 = -s_neg
        d2 = e / (1.0 + e) ** 2
    elif spec.kind == "exponential":
        val = np.exp(-arr)
        d1 = -val
        d2 = val
    elif spec.kind == "polytail":
        b = spec.beta
        val = np.empty_like(arr)
        d1 = np.empty_like(arr)
        d2 = np.empty_like(arr)
        tail = arr >= 1.0
        ut = arr[tail]
        val[tail] = ut ** (-b)
        d1[tail] = -b * ut ** (-b - 1.0)
        d2[tail] = b * (b + 1.0) * ut ** (-b - 2.0)
        s = arr[~tail] - 1.0
        t = np.tanh(s)
        f = np.exp(b * (_logcosh(s) - s))
        q1 = -b * (1.0 - t)
        q2 = b * (1.0 - t * t)
        val[~tail] = f
        d1[~tail] = q1 * f
        d2[~tail] = (q1 * q1 + q2) * f
    else:  # pragma: no cover
        raise ValueError(f"unknown loss kind {spec.kind!r}")

    if scalar:
        return float(val[0]), float(d1[0]), float(d2[0])
    return val, d1, d2


def default_grid(lo: float = -50.0, hi: float = 50.0) -> np.ndarray:
    """Linear plus two-sided log-spaced points, ~2e5 total on [lo, hi]."""
    lin = np.linspace(lo, hi, 100_000)
    logp = np.logspace(-8, np.log10(hi), 50_000)
    logn = -np.logspace(-8, np.log10(-lo), 50_000)
    grid = np.unique(np.concatenate([lin, logp, logn, [0.0]]))
    return grid


def certify_loss(spec: LossSpec, grid: np.ndarray | None = None) -> dict:
    """Grid-certify the loss assumption flags.

    Each flag is true iff its inequality holds at every grid point with
    slack >= -SLACK_TOL:  |f'| <= g_f,  f'' <= l_f,  |f'| <= beta_f*f,
    f'' <= f.  Flags whose constant is None are false by definition.
    Measured worst slacks are returned alongside the booleans.
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=np.float64)
    f, d1, d2 = loss_eval(spec, grid)
    abs_d1 = np.abs(d1)

    report = {"kind": loss_name(spec)}
    if spec.g_f is None:
        report["lipschitz"] = False
        report["lipschitz_slack"] = None
    else:
        slack = float(np.min(spec.g_f - abs_d1))
        report["lipschitz"] = slack >= -SLACK_TOL
        report["lipschitz_slack"] = slack
    if spec.l_f is None:
        report["smooth"] = False
        report["smooth_slack"] = None
    else:
        slack = float(np.min(spec.l_f - d2))
        report["smooth"] = slack >= -SLACK_TOL
        report["smooth_slack"] = slack
    if spec.beta_f is None:
        report["self_bounded"] = False
        report["self_bounded_slack"] = None
    else:
        slack = float(np.min(spec.beta_f * f - abs_d1))
        report["self_bounded"] = slack >= -SLACK_TOL
        report["self_bounded_slack"] = slack
    slack = float(np.min(f - d2))
    report["second_order_self_bounded"] = slack >= -SLACK_TOL
    report["second_order_slack"] = slack
    return report

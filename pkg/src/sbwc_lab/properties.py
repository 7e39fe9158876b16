"""Inequality checkers: each curvature/optimization property becomes a
predicate with a measured slack and a witness on failure.

Conventions shared by every checker:

* slack >= 0 means the inequality holds; reports carry the worst slack
  observed and the inputs achieving it.
* Tolerances default to 1e-10 * (1 + |RHS|).
* Violated *preconditions* (width, step size, segment length) yield
  status "not_applicable", never "fails" -- the inequalities are
  conditional and unconditional alarms would be false ones.
* Segment maxima are evaluated on an equispaced grid plus golden-section
  refinement around the argmax; a grid maximum is a lower bound on the
  true maximum, so "holds" is only asserted when two grid resolutions
  (1x and 10x) agree within 1% (status "unresolved" otherwise).

All checkers are deterministic given their inputs and grid sizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec
from .datasets import Dataset, RealizabilityCert
from .model import Weights
from .objective import Objective, forward_batch, min_eig
from .trainer import TrainTrace, verify_descent

SCHEMA_VERSION = 1

HOLDS = "holds"
FAILS = "fails"
NOT_APPLICABLE = "not_applicable"
UNRESOLVED = "unresolved"


def default_tol(rhs_magnitude: float) -> float:
    return 1e-10 * (1.0 + abs(rhs_magnitude))


@dataclass(frozen=True)
class PropertyReport:
    name: str
    status: str
    worst_slack: float
    witness: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def applicable(self) -> bool:
        return self.status != NOT_APPLICABLE

    @property
    def failed(self) -> bool:
        return self.status == FAILS

    def to_json(self) -> str:
        def clean(d):
            return {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v)
                    for k, v in d.items()}
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "status": self.status,
            "holds": self.holds,
            "worst_slack": float(self.worst_slack),
            "witness": clean(self.witness),
            "params": clean(self.params),
        })


def _status(slack: float, tol: float) -> str:
    return HOLDS if slack >= -tol else FAILS


# ---------------------------------------------------------------------------
# Self-bounded weak convexity


def check_sbwc(obj: Objective, w, tol: float | None = None,
               method: str = "auto") -> PropertyReport:
    """lambda_min(hess F(w)) >= -kappa F(w) with kappa = beta_f L R^2/sqrt(m).

    Eigenvalue non-convergence propagates (MinEigError).
    """
    res = min_eig(obj, w, method=method)
    risk = obj.risk(w)
    kappa = obj.kappa
    rhs = kappa * risk
    eff_tol = tol if tol is not None else default_tol(rhs)
    slack = res.lambda_min + rhs
    return PropertyReport(
        name="sbwc",
        status=_status(slack, eff_tol),
        worst_slack=float(slack),
        witness={"risk": risk, "lambda_min": res.lambda_min,
                 "eig_residual": res.residual, "eig_method": res.method},
        params={"kappa": kappa, "m": obj.shape.m, "tol": eff_tol},
    )


# ---------------------------------------------------------------------------
# Segment maximization machinery


def _golden_max(fun, lo: float, hi: float, iters: int = 40):
    """Deterministic golden-section maximization of fun on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def segment_max_risk(obj: Objective, w1, w2, grid_size: int = 1000):
    """Two-resolution grid + golden refinement estimate of max risk on [w1, w2].

    Returns (max_value, refinement_residual, argmax_alpha).  The value is
    a lower bound on the true segment maximum; the residual is the
    difference between the 10x and 1x grid levels.
    """
    coarse_alphas = np.linspace(0.0, 1.0, grid_size + 1)
    coarse = obj.segment_stats(w1, w2, coarse_alphas)[0]
    max_coarse = float(np.max(coarse))
    fine_alphas = np.linspace(0.0, 1.0, 10 * grid_size + 1)
    fine = obj.segment_stats(w1, w2, fine_alphas)[0]
    i = int(np.argmax(fine))
    max_fine = float(fine[i])
    h = 1.0 / (10 * grid_size)
    lo, hi = max(0.0, fine_alphas[i] - h), min(1.0, fine_alphas[i] + h)
    alpha_g, max_g = _golden_max(lambda a: obj.segment_risk(w1, w2, a), lo, hi)
    best = max(max_coarse, max_fine, max_g)
    residual = abs(max_fine - max_coarse)
    alpha_best = alpha_g if max_g >= max_fine else float(fine_alphas[i])
    return best, residual, alpha_best


# ---------------------------------------------------------------------------
# Generalized local quasi-convexity


def check_glqc(obj: Objective, w1, w2, grid_size: int = 1000,
               lam: float | None = None, tol: float | None = None) -> PropertyReport:
    """max over [w1,w2] of F <= tau * max{F(w1), F(w2)}.

    With ``lam`` given, uses the width form: applicable iff
    sqrt(m) >= lam * kappa_unit * ||w1-w2||^2 / 2 (kappa_unit = beta_f L R^2)
    and tau = (1 - 1/lam)^(-1).  Otherwise the distance form: applicable
    iff ||w1-w2||^2 < 2/kappa and tau = (1 - kappa D^2/2)^(-1).
    """
    d_vec = np.asarray(w1 if not isinstance(w1, Weights) else w1.w, dtype=np.float64) \
        - np.asarray(w2 if not isinstance(w2, Weights) else w2.w, dtype=np.float64)
    D = float(np.linalg.norm(d_vec))
    kappa = obj.kappa
    params = {"kappa": kappa, "D": D, "grid_size": grid_size, "m": obj.shape.m}
    if lam is not None:
        params["lambda"] = lam
        applicable = np.sqrt(obj.shape.m) >= lam * (kappa * np.sqrt(obj.shape.m)) / 2.0 * D**2
        # kappa*sqrt(m) = beta_f * L * R^2 exactly, avoiding a second constant
        tau = 1.0 / (1.0 - 1.0 / lam)
    else:
        applicable = kappa * D**2 / 2.0 < 1.0
        tau = 1.0 / (1.0 - kappa * D**2 / 2.0) if applicable else float("inf")
    params["tau"] = tau
    if not applicable:
        return PropertyReport(name="glqc", status=NOT_APPLICABLE, worst_slack=float("nan"),
                              witness={}, params=params)
    f1, f2 = obj.risk(w1), obj.risk(w2)
    seg_max, refinement, alpha_star = segment_max_risk(obj, w1, w2, grid_size)
    rhs = tau * max(f1, f2)
    eff_tol = tol if tol is not None else default_tol(rhs)
    params["tol"] = eff_tol
    slack = rhs - seg_max
    resolved = refinement < 0.01 * max(seg_max, np.finfo(float).tiny)
    if slack < -eff_tol:
        status = FAILS
    elif not resolved:
        status = UNRESOLVED
    else:
        status = HOLDS
    return PropertyReport(
        name="glqc", status=status, worst_slack=float(slack),
        witness={"endpoint_max": max(f1, f2), "segment_max": seg_max,
                 "argmax_alpha": alpha_star, "refinement_residual": refinement},
        params=params,
    )


# ---------------------------------------------------------------------------
# One-step expansiveness of GD


def check_expansiveness(obj: Objective, w, w2, eta: float,
                        grid_size: int = 1000, form: str = "self_bounded",
                        tol: float | None = None) -> PropertyReport:
    """Distance after one GD step vs. the curvature-controlled coefficient.

    form="self_bounded":  coefficient 1 + eta * beta_f * (L R^2/sqrt(m)) *
    max_seg F; needs eta <= 1/(ell^2 R^2) and a smooth (l_f <= 1)
    self-bounded loss.  form="general": coefficient max_seg H with
    H = eta*(L R^2/sqrt(m)) F' + max{1, eta ell^2 R^2 F''}; no
    preconditions (works for the exponential loss).
    """
    wv = np.asarray(w.w if isinstance(w, Weights) else w, dtype=np.float64)
    w2v = np.asarray(w2.w if isinstance(w2, Weights) else w2, dtype=np.float64)
    dist = float(np.linalg.norm(wv - w2v))
    _, g1 = obj.risk_and_grad(wv)
    _, g2 = obj.risk_and_grad(w2v)
    lhs = float(np.linalg.norm((wv - eta * g1) - (w2v - eta * g2)))
    ell, L, R = obj.ell, obj.big_l, obj.R
    sqm = np.sqrt(obj.shape.m)
    params = {"eta": eta, "form": form, "D": dist, "grid_size": grid_size, "m": obj.shape.m}

    alphas = np.linspace(0.0, 1.0, grid_size + 1)
    risks, fprimes, fdoubles = obj.segment_stats(wv, w2v, alphas)
    if form == "self_bounded":
        smooth_enough = obj.loss.l_f is not None and obj.loss.l_f <= 1.0
        self_bounded = obj.loss.beta_f is not None
        if not (smooth_enough and self_bounded and eta <= 1.0 / (ell**2 * R**2) * (1 + 1e-12)):
            return PropertyReport(name="expansiveness", status=NOT_APPLICABLE,
                                  worst_slack=float("nan"), witness={}, params=params)
        beta_f = obj.loss.beta_f
        coeff = 1.0 + eta * beta_f * (L * R**2 / sqm) * float(np.max(risks))
    elif form == "general":
        H = eta * (L * R**2 / sqm) * fprimes + np.maximum(1.0, eta * ell**2 * R**2 * fdoubles)
        coeff = float(np.max(H))
    else:
        raise ValueError(f"unknown expansiveness form {form!r}")
    rhs = coeff * dist
    eff_tol = tol if tol is not None else default_tol(rhs)
    params["tol"] = eff_tol
    slack = rhs - lhs
    return PropertyReport(
        name="expansiveness", status=_status(slack, eff_tol), worst_slack=float(slack),
        witness={"lhs": lhs, "rhs": rhs, "coefficient": coeff},
        params=params,
    )


# ---------------------------------------------------------------------------
# Train-loss, regret and iterate-norm bounds


def check_train_bounds(trace: TrainTrace, cert: RealizabilityCert,
                       eta: float | None = None, tol: float | None = None) -> PropertyReport:
    """Regret, last-iterate and iterate-norm bounds from a realizability cert.

    With g = cert.g_eps (built at eps, ideally eps = 1/T):
      regret  <= 2*eps + 5 g^2 / (2 eta T)
      F(w_T)  <= 2*eps + 5 g^2 / (2 eta T)
      ||w_t - w_0|| <= 4 g   for all recorded t.
    Preconditions (reported; any failure -> not_applicable):
      m >= 18^2 L^2 R^4 g^4,  g^2 >= max(eta T eps, eta F(w_0)),
      and the per-step descent property of the actual trace.
    """
    eta = trace.eta if eta is None else eta
    T = trace.T
    if T < 1:
        raise ValueError("trace has no iterations")
    meta = trace.meta
    L, R, m = meta["big_l"], meta["R"], meta["m"]
    g = cert.g_eps
    eps = cert.eps
    width_req = (18.0**2) * L**2 * R**4 * g**4
    width_ok = m >= width_req
    w_cond_ok = g**2 >= max(eta * T * eps, eta * trace.risk[0]) - 1e-12
    descent_slack = verify_descent(trace, eta)
    descent_ok = descent_slack >= -1e-12
    params = {"eta": eta, "T": T, "g": g, "eps": eps, "m": m,
              "width_required": width_req, "width_ok": bool(width_ok),
              "w_condition_ok": bool(w_cond_ok), "descent_ok": bool(descent_ok),
              "descent_slack": descent_slack}
    if cert.construction == "ntk":
        params["cor_ntk_last_rhs"] = 2.0 * eps + 5.0 * g**2 / (2.0 * eta * T)
    if not (width_ok and w_cond_ok and descent_ok):
        return PropertyReport(name="train_bounds", status=NOT_APPLICABLE,
                              worst_slack=float("nan"), witness={}, params=params)
    rhs = 2.0 * eps + 5.0 * g**2 / (2.0 * eta * T)
    regret = trace.regret
    last = float(trace.risk[-1])
    max_dist = float(np.max(trace.dist_init))
    slack_regret = rhs - regret
    slack_last = rhs - last
    slack_norm = 4.0 * g - max_dist
    eff_tol = tol if tol is not None else default_tol(max(rhs, 4.0 * g))
    params["tol"] = eff_tol
    slack = min(slack_regret, slack_last, slack_norm)
    return PropertyReport(
        name="train_bounds", status=_status(slack, eff_tol), worst_slack=float(slack),
        witness={"rhs": rhs, "regret": regret, "risk_last": last,
                 "max_dist_init": max_dist, "slack_regret": slack_regret,
                 "slack_last": slack_last, "slack_norm": slack_norm},
        params=params,
    )


# ---------------------------------------------------------------------------
# Interpolation


def check_interpolation(act: ActivationSpec, weights: Weights,
                        dataset: Dataset) -> float:
    """Fraction of samples with y_i Phi(w, x_i) <= 0 (zero margin counts
    as misclassified); 0.0 means the model interpolates the data."""
    from .model import NetworkShape
    shape = NetworkShape(m=weights.m, d=weights.d)
    phi = forward_batch(shape, act, weights, dataset.X)
    return float(np.mean(dataset.y * phi <= 0.0))

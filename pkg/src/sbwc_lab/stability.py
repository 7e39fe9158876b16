"""Leave-one-out stability and Monte-Carlo generalization gaps.

The leave-one-out (loo) objective drops sample i but keeps the 1/n
normalization; loo runs reuse the full run's initialization and step
size.  The stability bound compares the measured average distance
||w_T - w_T^{loo i}|| against (2 eta ell R / n)(F(w_0) + T * Reg) and
reports the two width conditions under which the bound is a theorem:

  (1) sqrt(m) >= 4 L R^2 * max_{t,i} max(||w_t - w_0||, ||w_t^{loo i} - w_0||)^2
  (2) sqrt(m) >= 6 L R^2 eta T * max(Reg, Reg_loo)

Generalization gaps are estimated in expectation over the train set:
fresh train sets per trial, one large shared held-out set, and the
bound is required of the trial mean (the theory claims nothing
per-trial).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .activations import ActivationSpec
from .datasets import Scenario
from .losses import LossSpec
from .model import NetworkShape, Weights
from .objective import Objective
from .rng import substream
from .trainer import GDConfig, TrainTrace, init_weights, resolve_step, train

SCHEMA_VERSION = 1


def loo_train_all(obj: Objective, config: GDConfig,
                  w0: Weights | None = None, eta: float | None = None,
                  record_every: int | None = None) -> list[TrainTrace]:
    """GD on every leave-one-out objective; same w0, eta, T as the full run."""
    if obj.excluded_index is not None:
        raise ValueError("pass the full objective, not a leave-one-out one")
    if w0 is None:
        w0 = init_weights(obj.shape, config.init, seed=config.seed,
                          scale=config.init_scale, vector=config.init_vector)
    if eta is None:
        eta = resolve_step(obj, w0, config.step_policy, config.step_size)
    cfg = config if record_every is None else replace(config, record_every=record_every)
    return [train(obj.exclude(i), cfg, w0=w0, eta=eta) for i in range(obj.dataset.n)]


def model_stability(w_T, loo_weights) -> tuple[float, np.ndarray]:
    """Average and per-i Euclidean distances ||w_T - w_T^{loo i}||."""
    wv = np.asarray(w_T.w if isinstance(w_T, Weights) else w_T, dtype=np.float64)
    dists = np.array([
        np.linalg.norm(wv - np.asarray(u.w if isinstance(u, Weights) else u, dtype=np.float64))
        for u in loo_weights
    ])
    if dists.size == 0:
        raise ValueError("no leave-one-out weights given")
    return float(np.mean(dists)), dists


def stability_bound(trace: TrainTrace, eta: float, n: int) -> float:
    """(2 eta ell R / n) (F(w_0) + T * Reg) from the full-run trace."""
    ell, R = trace.meta["ell"], trace.meta["R"]
    return 2.0 * eta * ell * R / n * (float(trace.risk[0]) + trace.T * trace.regret)


@dataclass(frozen=True)
class StabilityReport:
    per_i_distance: np.ndarray
    average: float
    bound: float
    regret: float
    regret_loo: float
    width_cond_iterates: bool
    width_cond_regret: bool
    expansion_worst_slack: float | None
    eta: float
    T: int
    n: int

    def __post_init__(self):
        assert abs(self.average - float(np.mean(self.per_i_distance))) <= 1e-12 * (1 + self.average)

    @property
    def satisfied(self) -> bool:
        return self.average <= self.bound

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "per_i_distance": [float(v) for v in self.per_i_distance],
            "average": self.average,
            "bound": self.bound,
            "regret": self.regret,
            "regret_loo": self.regret_loo,
            "width_cond_iterates": self.width_cond_iterates,
            "width_cond_regret": self.width_cond_regret,
            "expansion_worst_slack": self.expansion_worst_slack,
            "eta": self.eta,
            "T": self.T,
            "n": self.n,
        })


def run_loo_stability(obj: Objective, config: GDConfig,
                      check_expansion: bool = True):
    """Full run + all loo runs + stability report.

    When ``check_expansion`` is set, every GD step of every loo pair is
    checked against the per-step expansion coefficient
    1 + (2 eta beta_f L R^2 / sqrt(m)) max{F_loo(w_t), F_loo(w_t^loo)};
    the worst slack over all (i, t) lands in the report.
    """
    n = obj.dataset.n
    cfg_full = replace(config, record_every=1)
    full = train(obj, cfg_full)
    w0 = Weights(w=full.checkpoints[0], signs=full.final_weights.signs)
    eta = full.eta
    T = full.T
    sqm = np.sqrt(obj.shape.m)
    ell, L, R = obj.ell, obj.big_l, obj.R
    beta_f = obj.loss.beta_f if obj.loss.beta_f is not None else 1.0

    dists = np.empty(n)
    loo_regrets = np.empty(n)
    max_dist_loo = 0.0
    worst_exp_slack = float("inf") if check_expansion else None
    for i in range(n):
        obj_i = obj.exclude(i)
        tr_i = train(obj_i, replace(config, record_every=1 if check_expansion else 0),
                     w0=w0, eta=eta)
        dists[i] = float(np.linalg.norm(full.final_weights.w - tr_i.final_weights.w))
        loo_regrets[i] = tr_i.regret
        max_dist_loo = max(max_dist_loo, float(np.max(tr_i.dist_init)))
        if check_expansion:
            for t in range(T):
                wt = full.checkpoints[t]
                wt_loo = tr_i.checkpoints[t]
                f_a, g_a = obj_i.risk_and_grad(wt)
                f_b, g_b = obj_i.risk_and_grad(wt_loo)
                lhs = float(np.linalg.norm((wt - eta * g_a) - (wt_loo - eta * g_b)))
                coeff = 1.0 + 2.0 * eta * beta_f * L * R**2 / sqm * max(f_a, f_b)
                rhs = coeff * float(np.linalg.norm(wt - wt_loo))
                worst_exp_slack = min(worst_exp_slack, rhs - lhs)

    avg = float(np.mean(dists))
    reg = full.regret
    reg_loo = float(np.max(loo_regrets))
    bound = 2.0 * eta * ell * R / n * (float(full.risk[0]) + T * reg)
    max_dist_full = float(np.max(full.dist_init))
    cond1 = sqm >= 4.0 * L * R**2 * max(max_dist_full, max_dist_loo) ** 2
    cond2 = sqm >= 6.0 * L * R**2 * eta * T * max(reg, reg_loo)
    report = StabilityReport(
        per_i_distance=dists, average=avg, bound=bound, regret=reg,
        regret_loo=reg_loo, width_cond_iterates=bool(cond1),
        width_cond_regret=bool(cond2), expansion_worst_slack=worst_exp_slack,
        eta=eta, T=T, n=n)
    return full, report


@dataclass(frozen=True)
class GenGapReport:
    trials: int
    train_losses: np.ndarray = field(repr=False)
    test_losses: np.ndarray = field(repr=False)
    mean_gap: float
    se_gap: float
    theoretical: float | None
    general_bound: float | None  # mean of per-trial (8 ell^2 R^2/n)(eta T eps + 2 g^2)
    n: int
    T: int
    g_used: float | None

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "trials": self.trials,
            "train_losses": [float(v) for v in self.train_losses],
            "test_losses": [float(v) for v in self.test_losses],
            "mean_gap": self.mean_gap,
            "se_gap": self.se_gap,
            "theoretical": self.theoretical,
            "general_bound": self.general_bound,
            "n": self.n,
            "T": self.T,
            "g_used": self.g_used,
        })


def margin_g(scenario: Scenario, T: int) -> float | None:
    """g(1/T) for scenarios with a known margin: 2 log(T) / gamma."""
    if scenario.kind == "linsep" and scenario.gamma and T >= 2:
        return 2.0 * np.log(T) / scenario.gamma
    return None


def gen_gap_estimate(scenario: Scenario, config: GDConfig, n: int,
                     shape: NetworkShape, act: ActivationSpec, loss: LossSpec,
                     trials: int, test_size: int = 10_000, seed: int = 0,
                     g_of_T: float | None = None) -> GenGapReport:
    """Monte-Carlo estimate of E[F(w_T) - F_hat(w_T)] over the train set.

    Each trial draws a fresh train set of size n from the scenario,
    trains for config.T steps (T=0 skips training and evaluates at the
    initialization), and evaluates the test loss on one shared held-out
    sample of ``test_size`` points.  The theoretical comparison value is
    24 ell^2 R^2 g(1/T)^2 / n when a margin-based g is available.
    """
    if trials < 5:
        raise ValueError(f"need at least 5 trials, got {trials}")
    test_set = scenario.sample(test_size, substream(seed, "test"))
    test_obj_template = None
    train_losses = np.empty(trials)
    test_losses = np.empty(trials)
    T = config.T
    for k in range(trials):
        ds = scenario.sample(n, substream(seed, "trials", k))
        obj = Objective(dataset=ds, loss=loss, activation=act, shape=shape)
        if T == 0:
            w_final = init_weights(shape, config.init, seed=config.seed,
                                   scale=config.init_scale, vector=config.init_vector)
            train_losses[k] = obj.risk(w_final)
        else:
            tr = train(obj, config)
            w_final = tr.final_weights
            train_losses[k] = float(tr.risk[-1])
        if test_obj_template is None:
            test_obj_template = Objective(dataset=test_set, loss=loss,
                                          activation=act, shape=shape)
        test_losses[k] = test_obj_template.risk(w_final)

    gaps = test_losses - train_losses
    mean_gap = float(np.mean(gaps))
    se_gap = float(np.std(gaps, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    g = g_of_T if g_of_T is not None else margin_g(scenario, T)
    ell, R = act.ell, test_set.R
    theoretical = None
    general_bound = None
    if g is not None and T >= 1:
        theoretical = 24.0 * ell**2 * R**2 * g**2 / n
        eta = config.step_size
        if eta is None:
            # resolve against the last trial's objective (constants only)
            eta = resolve_step(Objective(dataset=test_set, loss=loss, activation=act, shape=shape),
                               init_weights(shape, "zero"), config.step_policy, config.step_size)
        general_bound = 8.0 * ell**2 * R**2 / n * (eta * T * (1.0 / T) + 2.0 * g**2)
    return GenGapReport(trials=trials, train_losses=train_losses,
                        test_losses=test_losses, mean_gap=mean_gap, se_gap=se_gap,
                        theoretical=theoretical, general_bound=general_bound,
                        n=n, T=T, g_used=g)

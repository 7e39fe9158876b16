"""Full-batch gradient descent with certified step-size policies.

Policies resolve the step size from the objective's constants:

* smoothness:   eta = 1 / (ell^2 R^2 + L R^2 / sqrt(m))
* self_bounded: eta = 0.99 * min{1/(ell^2+L), 1/(sqrt(L) ell)} / (R^2 F(w0))
  (for losses certified only via self-boundedness, e.g. exponential;
  the 0.99 keeps us strictly inside the open step-size condition)
* ntk:          eta = min{3, 1/L_F}  (margin-certificate regime)
* fixed:        caller-supplied eta

Every run records per-iteration risk, gradient norm and distance from
initialization; full iterates are stored only at ``record_every``
strides plus {0, T}.  Traces are deterministic given the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import NetworkShape, Weights, new_weights
from .objective import Objective
from .rng import substream

SCHEMA_VERSION = 1

STEP_POLICIES = ("fixed", "smoothness", "self_bounded", "ntk")
INIT_KINDS = ("zero", "gaussian", "explicit")


class TrainingDivergedError(RuntimeError):
    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class GDConfig:
    step_policy: str = "smoothness"
    step_size: float | None = None        # for "fixed"
    T: int = 100
    init: str = "zero"
    init_scale: float = 1.0               # gaussian entry std
    init_vector: np.ndarray | None = None  # for "explicit"
    seed: int = 0
    record_every: int = 0                 # 0: checkpoints only at {0, T}

    def __post_init__(self):
        if self.step_policy not in STEP_POLICIES:
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if self.step_policy == "fixed" and (self.step_size is None or self.step_size <= 0):
            raise ValueError("fixed step policy needs step_size > 0")
        if self.T < 1:
            raise ValueError(f"iteration count T must be >= 1, got {self.T}")
        if self.init not in INIT_KINDS:
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "explicit" and self.init_vector is None:
            raise ValueError("explicit init needs init_vector")
        if self.record_every < 0:
            raise ValueError("record_every must be >= 0")


def init_weights(shape: NetworkShape, init: str, seed: int = 0,
                 scale: float = 1.0, vector: np.ndarray | None = None) -> Weights:
    if init == "zero":
        return new_weights(shape, np.zeros(shape.param_dim))
    if init == "gaussian":
        rng = substream(seed, "init")
        return new_weights(shape, scale * rng.standard_normal(shape.param_dim))
    if init == "explicit":
        if vector is None:
            raise ValueError("explicit init needs a vector")
        return new_weights(shape, np.array(vector, dtype=np.float64))
    raise ValueError(f"unknown init {init!r}")


def resolve_step(obj: Objective, w0: Weights, policy: str,
                 step_size: float | None = None) -> float:
    if policy == "fixed":
        if step_size is None or step_size <= 0:
            raise ValueError("fixed policy needs step_size > 0")
        return float(step_size)
    if policy == "smoothness":
        return 1.0 / obj.smoothness
    if policy == "ntk":
        return min(3.0, 1.0 / obj.smoothness)
    if policy == "self_bounded":
        f0 = obj.risk(w0)
        if f0 <= 0.0:
            raise ValueError("self_bounded policy undefined: F(w0) = 0")
        ell, L, R = obj.ell, obj.big_l, obj.R
        cap = min(1.0 / (ell**2 + L), 1.0 / (np.sqrt(L) * ell))
        return 0.99 * cap / (R**2 * f0)
    raise ValueError(f"unknown step policy {policy!r}")


@dataclass
class TrainTrace:
    """Per-iteration record of a GD run (arrays have length T+1)."""

    risk: np.ndarray
    grad_norm: np.ndarray
    dist_init: np.ndarray
    eta: float
    final_weights: Weights = field(repr=False)
    checkpoints: dict = field(default_factory=dict, repr=False)  # t -> weight vector copy
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.risk) - 1

    @property
    def regret(self) -> float:
        """(1/T) sum_{t=1..T} F(w_t)."""
        if self.T == 0:
            return float("nan")
        return float(np.sum(self.risk[1:])) / self.T

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,risk,grad_norm,dist_init\n")
            for t in range(len(self.risk)):
                fh.write(f"{t},{self.risk[t]!r},{self.grad_norm[t]!r},{self.dist_init[t]!r}\n")

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "T": self.T,
            "eta": self.eta,
            "risk_initial": float(self.risk[0]),
            "risk_final": float(self.risk[-1]),
            "regret": self.regret,
            "grad_norm_final": float(self.grad_norm[-1]),
            "dist_init_final": float(self.dist_init[-1]),
            "dist_init_max": float(np.max(self.dist_init)),
            "meta": self.meta,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def train(obj: Objective, config: GDConfig, w0: Weights | None = None,
          eta: float | None = None) -> TrainTrace:
    """Run full-batch GD; returns the populated trace.

    ``w0``/``eta`` override the config-derived initialization and step
    (used by leave-one-out runs, which must reuse the full run's).
    Raises TrainingDivergedError on a non-finite loss or when the risk
    exceeds 1e3 * F(w0).
    """
    if w0 is None:
        w0 = init_weights(obj.shape, config.init, seed=config.seed,
                          scale=config.init_scale, vector=config.init_vector)
    if eta is None:
        eta = resolve_step(obj, w0, config.step_policy, config.step_size)
    T = config.T
    risk = np.empty(T + 1)
    grad_norm = np.empty(T + 1)
    dist_init = np.empty(T + 1)
    checkpoints = {}
    w0_vec = w0.w.copy()
    w = w0_vec.copy()

    def record_checkpoint(t, vec):
        if t in (0, T) or (config.record_every > 0 and t % config.record_every == 0):
            checkpoints[t] = vec.copy()

    guard = None
    for t in range(T + 1):
        f, g = obj.risk_and_grad(w)
        if not np.isfinite(f):
            raise TrainingDivergedError(f"non-finite training loss at iteration {t}", t)
        if guard is None:
            guard = 1e3 * max(f, np.finfo(float).tiny)
        elif f > guard:
            raise TrainingDivergedError(
                f"training loss {f} exceeded 1e3 * F(w0) at iteration {t}", t)
        risk[t] = f
        grad_norm[t] = np.linalg.norm(g)
        dist_init[t] = np.linalg.norm(w - w0_vec)
        record_checkpoint(t, w)
        if t < T:
            w = w - eta * g

    final = Weights(w=w, signs=w0.signs.copy())
    meta = {
        "m": obj.shape.m,
        "d": obj.shape.d,
        "n": obj.dataset.n,
        "excluded_index": obj.excluded_index,
        "ell": obj.ell,
        "big_l": obj.big_l,
        "R": obj.R,
        "loss": obj.loss.kind,
        "activation": obj.activation.kind,
        "step_policy": config.step_policy,
        "seed": config.seed,
        "record_every": config.record_every,
    }
    return TrainTrace(risk=risk, grad_norm=grad_norm, dist_init=dist_init,
                      eta=float(eta), final_weights=final,
                      checkpoints=checkpoints, meta=meta)


def verify_descent(trace: TrainTrace, eta: float | None = None) -> float:
    """Worst slack of F(w_t) - (eta/2)||grad F(w_t)||^2 - F(w_{t+1}).

    Non-negative (up to -1e-12) whenever the step satisfies the descent
    condition; +inf for an empty trace.  Informative, never raises.
    """
    if eta is None:
        eta = trace.eta
    if trace.T == 0:
        return float("inf")
    slack = trace.risk[:-1] - 0.5 * eta * trace.grad_norm[:-1] ** 2 - trace.risk[1:]
    return float(np.min(slack))

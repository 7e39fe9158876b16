"""Experiment configuration: TOML in, validated dataclass, JSON echo out.

The on-disk format is key = value with nested tables:

    seed = 0
    out = "results"
    activation = "tanh"
    loss = "logistic"

    [scenario]
    kind = "linsep"     # xor | linsep | csv
    d = 10
    gamma = 0.5
    n = 64

    [shape]
    m = 256

    [gd]
    policy = "smoothness"   # fixed | smoothness | self_bounded | ntk
    T = 256
    init = "zero"           # zero | gaussian
    record_every = 0

    [sweep]
    seeds = [0]

    [stability]
    trials = 20
    test_size = 10000

Validation errors name the offending field path (e.g. "shape.m").  The
resolved configuration is echoed verbatim as JSON next to every result
so runs can be audited and replayed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import tomli

from .trainer import INIT_KINDS, STEP_POLICIES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out: str = "results"
    delta: float = 0.1
    eps: float = 0.1
    activation: str = "tanh"
    loss: str = "logistic"
    scenario_kind: str = "xor"
    scenario_d: int = 4
    scenario_gamma: float | None = None
    scenario_n: int = 64
    scenario_path: str | None = None
    m: int = 64
    gd_policy: str = "smoothness"
    gd_step_size: float | None = None
    gd_T: int = 128
    gd_init: str = "zero"
    gd_init_scale: float = 1.0
    gd_record_every: int = 0
    sweep_T: tuple = ()
    sweep_n: tuple = ()
    sweep_m: tuple = ()
    sweep_gamma: tuple = ()
    sweep_seeds: tuple = (0,)
    stability_trials: int = 20
    stability_test_size: int = 10_000

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out": self.out,
            "delta": self.delta,
            "eps": self.eps,
            "activation": self.activation,
            "loss": self.loss,
            "scenario": {
                "kind": self.scenario_kind,
                "d": self.scenario_d,
                "gamma": self.scenario_gamma,
                "n": self.scenario_n,
                "path": self.scenario_path,
            },
            "shape": {"m": self.m},
            "gd": {
                "policy": self.gd_policy,
                "step_size": self.gd_step_size,
                "T": self.gd_T,
                "init": self.gd_init,
                "init_scale": self.gd_init_scale,
                "record_every": self.gd_record_every,
            },
            "sweep": {
                "T": list(self.sweep_T),
                "n": list(self.sweep_n),
                "m": list(self.sweep_m),
                "gamma": list(self.sweep_gamma),
                "seeds": list(self.sweep_seeds),
            },
            "stability": {
                "trials": self.stability_trials,
                "test_size": self.stability_test_size,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _get(table: dict, path: str, default, caster, check=None, message=None):
    parts = path.split(".")
    node = table
    for p in parts[:-1]:
        node = node.get(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{'.'.join(parts[:-1])}: expected a table")
    raw = node.get(parts[-1], default)
    if raw is None:
        return None
    try:
        val = caster(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: cannot interpret {raw!r}") from None
    if check is not None and not check(val):
        raise ConfigError(f"{path}: {message or 'invalid value'} (got {raw!r})")
    return val


def _int_list(raw):
    return tuple(int(v) for v in raw)


def _float_list(raw):
    return tuple(float(v) for v in raw)


def from_dict(table: dict) -> ExperimentConfig:
    cfg = ExperimentConfig(
        seed=_get(table, "seed", 0, int),
        out=_get(table, "out", "results", str),
        delta=_get(table, "delta", 0.1, float, lambda v: 0 < v < 1, "must be in (0, 1)"),
        eps=_get(table, "eps", 0.1, float, lambda v: 0 < v <= 1, "must be in (0, 1]"),
        activation=_get(table, "activation", "tanh", str,
                        lambda v: v in ("softplus", "tanh", "gelu"),
                        "must be softplus, tanh or gelu"),
        loss=_get(table, "loss", "logistic", str,
                  lambda v: v in ("logistic", "exp") or v.startswith("poly:"),
                  "must be logistic, exp or poly:<beta>"),
        scenario_kind=_get(table, "scenario.kind", "xor", str,
                           lambda v: v in ("xor", "linsep", "csv"),
                           "must be xor, linsep or csv"),
        scenario_d=_get(table, "scenario.d", 4, int, lambda v: v >= 1, "must be >= 1"),
        scenario_gamma=_get(table, "scenario.gamma", None, float,
                            lambda v: 0 < v < 1, "must be in (0, 1)"),
        scenario_n=_get(table, "scenario.n", 64, int, lambda v: v >= 1, "must be >= 1"),
        scenario_path=_get(table, "scenario.path", None, str),
        m=_get(table, "shape.m", 64, int,
               lambda v: v >= 2 and v % 2 == 0, "must be a positive even integer"),
        gd_policy=_get(table, "gd.policy", "smoothness", str,
                       lambda v: v in STEP_POLICIES, f"must be one of {STEP_POLICIES}"),
        gd_step_size=_get(table, "gd.step_size", None, float,
                          lambda v: v > 0, "must be positive"),
        gd_T=_get(table, "gd.T", 128, int, lambda v: v >= 1, "must be >= 1"),
        gd_init=_get(table, "gd.init", "zero", str,
                     lambda v: v in INIT_KINDS, f"must be one of {INIT_KINDS}"),
        gd_init_scale=_get(table, "gd.init_scale", 1.0, float,
                           lambda v: v > 0, "must be positive"),
        gd_record_every=_get(table, "gd.record_every", 0, int,
                             lambda v: v >= 0, "must be >= 0"),
        sweep_T=_get(table, "sweep.T", (), _int_list,
                     lambda v: all(t >= 1 for t in v), "entries must be >= 1"),
        sweep_n=_get(table, "sweep.n", (), _int_list,
                     lambda v: all(n >= 1 for n in v), "entries must be >= 1"),
        sweep_m=_get(table, "sweep.m", (), _int_list,
                     lambda v: all(m >= 2 and m % 2 == 0 for m in v),
                     "entries must be positive even integers"),
        sweep_gamma=_get(table, "sweep.gamma", (), _float_list,
                         lambda v: all(0 < g < 1 for g in v), "entries must be in (0, 1)"),
        sweep_seeds=_get(table, "sweep.seeds", None, _int_list) or (),
        stability_trials=_get(table, "stability.trials", 20, int,
                              lambda v: v >= 5, "must be >= 5"),
        stability_test_size=_get(table, "stability.test_size", 10_000, int,
                                 lambda v: v >= 1, "must be >= 1"),
    )
    if not cfg.sweep_seeds:
        cfg = replace(cfg, sweep_seeds=(cfg.seed,))
    if cfg.scenario_kind == "linsep" and cfg.scenario_gamma is None:
        raise ConfigError("scenario.gamma: required for the linsep scenario")
    if cfg.scenario_kind == "csv" and cfg.scenario_path is None:
        raise ConfigError("scenario.path: required for the csv scenario")
    if cfg.scenario_kind == "xor" and cfg.scenario_d < 3:
        raise ConfigError("scenario.d: noisy XOR needs d >= 3")
    if cfg.gd_policy == "fixed" and cfg.gd_step_size is None:
        raise ConfigError("gd.step_size: required for the fixed step policy")
    return cfg


def parse(text_or_dict) -> ExperimentConfig:
    """Parse TOML text or an already-nested dict (e.g. a JSON echo)."""
    if isinstance(text_or_dict, dict):
        return from_dict(text_or_dict)
    return from_dict(tomli.loads(text_or_dict))


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            table = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return from_dict(table)

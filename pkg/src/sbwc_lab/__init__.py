"""Gradient descent on two-layer smooth networks with self-bounded
losses: training, curvature certificates, leave-one-out stability, and
tangent-feature separability margins."""

from .activations import ActivationSpec, act_eval, activation, certify_activation
from .datasets import (Dataset, InitBound, MarginCert, RealizabilityCert,
                       Scenario, build_realizability_linear,
                       build_realizability_ntk, gen_linsep, gen_xor,
                       init_output_bound, load_csv, make_scenario, ntk_features,
                       ntk_margin, save_csv, xor_support)
from .estimator import TwoLayerGDClassifier
from .losses import (EXPONENTIAL, LOGISTIC, LossSpec, certify_loss, loss_eval,
                     parse_loss, polytail)
from .model import (NetworkShape, Weights, balanced_signs, forward, model_grad,
                    model_hvp, new_weights)
from .objective import (MinEigError, MinEigResult, Objective, ObjectiveStats,
                        forward_batch, min_eig)
from .properties import (PropertyReport, check_expansiveness, check_glqc,
                         check_interpolation, check_sbwc, check_train_bounds,
                         segment_max_risk)
from .rng import substream
from .stability import (GenGapReport, StabilityReport, gen_gap_estimate,
                        loo_train_all, model_stability, run_loo_stability,
                        stability_bound)
from .trainer import (GDConfig, TrainTrace, TrainingDivergedError, init_weights,
                      resolve_step, train, verify_descent)

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec", "act_eval", "activation", "certify_activation",
    "Dataset", "InitBound", "MarginCert", "RealizabilityCert", "Scenario",
    "build_realizability_linear", "build_realizability_ntk", "gen_linsep",
    "gen_xor", "init_output_bound", "load_csv", "make_scenario", "ntk_features",
    "ntk_margin", "save_csv", "xor_support",
    "TwoLayerGDClassifier",
    "EXPONENTIAL", "LOGISTIC", "LossSpec", "certify_loss", "loss_eval",
    "parse_loss", "polytail",
    "NetworkShape", "Weights", "balanced_signs", "forward", "model_grad",
    "model_hvp", "new_weights",
    "MinEigError", "MinEigResult", "Objective", "ObjectiveStats",
    "forward_batch", "min_eig",
    "PropertyReport", "check_expansiveness", "check_glqc",
    "check_interpolation", "check_sbwc", "check_train_bounds",
    "segment_max_risk",
    "substream",
    "GenGapReport", "StabilityReport", "gen_gap_estimate", "loo_train_all",
    "model_stability", "run_loo_stability", "stability_bound",
    "GDConfig", "TrainTrace", "TrainingDivergedError", "init_weights",
    "resolve_step", "train", "verify_descent",
]

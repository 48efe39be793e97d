"""ecobo: energy-conscious hyperparameter tuning.

Minimizes the training time of a black-box ML workload (wallclock as the
energy proxy) subject to a predictive-performance threshold, using
Gaussian-process surrogates with an EI-times-PoF acquisition, plus a
penalized unconstrained-BO baseline for comparison.
"""

from .acquisition import (AcquisitionContext, expected_improvement, joint_acquisition,
                          maximize, penalized_objective, probability_of_feasibility)
from .backend import BACKEND
from .evaluators import (EvaluationResult, ExternalEvaluator, SYNTHETIC_PROBLEMS,
                         SyntheticProblem, evaluate_external, evaluate_synthetic)
from .gp import GpModel, KernelParams, fit, kernel_matern52, log_marginal_likelihood, predict
from .optimizer import (Observation, OptimizerState, ProblemSpec, TrialTrace,
                        run, transform_constraint, transform_objective)
from .space import ParamSpec, SearchSpace, decode, encode, sample

__version__ = "0.1.0"

__all__ = [
    "AcquisitionContext", "BACKEND", "EvaluationResult", "ExternalEvaluator",
    "GpModel", "KernelParams", "Observation", "OptimizerState", "ParamSpec",
    "ProblemSpec", "SYNTHETIC_PROBLEMS", "SearchSpace", "SyntheticProblem",
    "TrialTrace", "decode", "encode", "evaluate_external", "evaluate_synthetic",
    "expected_improvement", "fit", "joint_acquisition", "kernel_matern52",
    "log_marginal_likelihood", "maximize", "penalized_objective", "predict",
    "probability_of_feasibility", "run", "sample", "transform_constraint",
    "transform_objective",
]

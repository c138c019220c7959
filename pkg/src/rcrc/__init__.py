"""Reservoir-computing agents: fixed random conv features, an echo-state
reservoir, and a linear controller trained by CMA-ES."""

from .controller import ActionMode, ControllerWeights, Move, act_continuous, act_discrete, n_params
from .envs import EnvConfig, make_env
from .fixed_conv import ConvSpec, FeatureExtractor, build_extractor, conv2d, preprocess
from .prng import PRNG_ID, Stream, derive_seed
from .reservoir import Reservoir, ReservoirSpec, build_reservoir, fit_ridge, nmse, spectral_radius
from .trainer import TrainConfig, evaluate_generalization, score_candidate, train

__version__ = "0.1.0"

__all__ = [
    "ActionMode", "ControllerWeights", "Move", "act_continuous", "act_discrete", "n_params",
    "EnvConfig", "make_env", "ConvSpec", "FeatureExtractor", "build_extractor", "conv2d",
    "preprocess", "PRNG_ID", "Stream", "derive_seed", "Reservoir", "ReservoirSpec",
    "build_reservoir", "fit_ridge", "nmse", "spectral_radius", "TrainConfig",
    "evaluate_generalization", "score_candidate", "train",
]

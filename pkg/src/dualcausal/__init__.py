"""Dual causal debiasing for video action recognition on synthetic worlds.

The text branch removes frame-level bias from the class embeddings by
back-door adjustment (``tci``); the visual branch removes a scene confounder
by front-door adjustment through text-guided frame emphasis (``vci``).
``scm`` holds the exact discrete oracle for both adjustment formulas and
``synthworld`` generates episodes with a planted bias and confounder.
"""
from .errors import (ConfigError, CriterionNotSatisfiedError, DualCausalError, GenerationError,
                     InvalidArgumentError, NumericDomainError, ParseError, ShapeError,
                     SpecValidationError, TrainingDivergedError, UndefinedConditionalError)
from .model import VARIANTS, DualCausalModel, stack_inputs
from .synthworld import (Episode, World, WorldSpec, breakfast_analog, build_world, sample_dataset,
                         strong_bias)

__version__ = "0.1.0"

__all__ = [
    "DualCausalModel", "VARIANTS", "stack_inputs",
    "WorldSpec", "World", "Episode", "build_world", "sample_dataset", "breakfast_analog", "strong_bias",
    "DualCausalError", "ShapeError", "InvalidArgumentError", "NumericDomainError",
    "SpecValidationError", "GenerationError", "ParseError", "UndefinedConditionalError",
    "CriterionNotSatisfiedError", "TrainingDivergedError", "ConfigError",
]

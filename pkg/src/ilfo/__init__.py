"""Imitation learning from state-only observations.

A two-stage pipeline: a policy and a forward-dynamics generator are trained
jointly by block-coordinate descent so the policy reproduces demonstrated
next states through the generator; the policy is then refined adversarially
against a recurrent discriminator over state-difference sequences. Built on
an eager reverse-mode autodiff core over numpy float64 arrays.
"""

from .autodiff import (
    AdamState,
    CheckpointError,
    IncompleteGradientError,
    NonScalarRootError,
    ParameterSet,
    ShapeMismatchError,
    Value,
    adam_step,
    backward,
    clip_gradients,
    forward,
    global_norm,
    load_checkpoint,
    save_checkpoint,
)
from .data import (
    Dataset,
    DatasetFormatError,
    DeltaSequence,
    MissingActionsError,
    TooShortError,
    Trajectory,
    TransitionPair,
    extract_transition_pairs,
    generate_teacher_dataset,
    load_dataset,
    save_dataset,
    teacher_delta_sequence,
    transition_arrays,
)
from .envs import (
    EnvSpec,
    EnvState,
    UnknownEnvError,
    env_names,
    get_spec,
    random_policy,
    reset,
    rollout,
    step,
    teacher_action,
    teacher_policy,
)
from .evaluation import (
    EvalReport,
    aer,
    bc_oracle_train,
    coefficient_of_variation,
    disjoint_eval_seeds,
    evaluate_policy,
    finite_difference_gradient,
    optimal_discriminator_oracle,
    performance,
    random_baseline_aer,
)
from .models import (
    DiscriminatorNet,
    EmptyInputError,
    FrozenViolationError,
    GeneratorNet,
    PolicyNet,
    freeze,
    frozen,
    release,
)
from .training import (
    ConfigError,
    ExperimentConfig,
    NumericAbortError,
    TrainingLog,
    TrainResult,
    build_nets,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CheckpointError",
    "ConfigError",
    "Dataset",
    "DatasetFormatError",
    "DeltaSequence",
    "DiscriminatorNet",
    "EmptyInputError",
    "EnvSpec",
    "EnvState",
    "EvalReport",
    "ExperimentConfig",
    "FrozenViolationError",
    "GeneratorNet",
    "IncompleteGradientError",
    "MissingActionsError",
    "NonScalarRootError",
    "NumericAbortError",
    "ParameterSet",
    "PolicyNet",
    "ShapeMismatchError",
    "TooShortError",
    "TrainResult",
    "TrainingLog",
    "Trajectory",
    "TransitionPair",
    "UnknownEnvError",
    "Value",
    "adam_step",
    "aer",
    "backward",
    "bc_oracle_train",
    "build_nets",
    "clip_gradients",
    "coefficient_of_variation",
    "disjoint_eval_seeds",
    "env_names",
    "evaluate_policy",
    "extract_transition_pairs",
    "finite_difference_gradient",
    "forward",
    "freeze",
    "frozen",
    "generate_teacher_dataset",
    "get_spec",
    "global_norm",
    "load_checkpoint",
    "load_dataset",
    "optimal_discriminator_oracle",
    "performance",
    "random_baseline_aer",
    "random_policy",
    "release",
    "reset",
    "rollout",
    "save_checkpoint",
    "save_dataset",
    "step",
    "teacher_action",
    "teacher_delta_sequence",
    "teacher_policy",
    "train",
    "transition_arrays",
]

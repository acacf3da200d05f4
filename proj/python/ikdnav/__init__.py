"""Python surface of the terrain-aware inverse kinodynamic navigation benchmark."""

from ._core import (
    Dataset,
    FormatFault,
    ParameterSet,
    TrainResult,
    ValidationError,
    World,
    collect,
    forward,
    grad_check,
    load_dataset,
    load_params,
    load_world,
    parse_world,
    run_benchmark,
    save_dataset,
    save_params,
    train,
    validate_world,
    world_hash,
    world_to_json,
)

__all__ = [
    "Dataset",
    "FormatFault",
    "ParameterSet",
    "TrainResult",
    "ValidationError",
    "World",
    "collect",
    "forward",
    "grad_check",
    "load_dataset",
    "load_params",
    "load_world",
    "parse_world",
    "run_benchmark",
    "save_dataset",
    "save_params",
    "train",
    "validate_world",
    "world_hash",
    "world_to_json",
]

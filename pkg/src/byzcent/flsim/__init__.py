from .mlp import MLPConfig, ModelParams, evaluate_model, forward_loss_grad, init_model, local_update, unflatten
from .partition import SCHEMES, PartitionError, partition_data
from .training import (
    RoundRecord,
    SimState,
    TrainConfig,
    TrainingError,
    init_state,
    iter_training,
    run_metadata,
    run_round_fedavg,
    run_round_fedsgd,
    run_training,
)

__all__ = [
    "MLPConfig",
    "ModelParams",
    "RoundRecord",
    "SCHEMES",
    "PartitionError",
    "SimState",
    "TrainConfig",
    "TrainingError",
    "evaluate_model",
    "forward_loss_grad",
    "init_model",
    "init_state",
    "iter_training",
    "local_update",
    "partition_data",
    "run_metadata",
    "run_round_fedavg",
    "run_round_fedsgd",
    "run_training",
    "unflatten",
]

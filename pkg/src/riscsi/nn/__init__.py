"""Minimal numpy neural-network engine with manual backpropagation."""

from ..numerics import complex_to_real, mat_to_real, real_to_complex, real_to_mat, real_to_vec, vec_to_real
from .checkpoint_io import FormatError, checkpoint_id, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from .gradcheck import gradient_check
from .network import (
    Checkpoint,
    LayerSpec,
    NetworkSpec,
    NumericError,
    StateError,
    are_dnn_spec,
    backward,
    de_dnn_spec,
    forward,
    init_checkpoint,
    irp_dnn_spec,
    mlp_spec,
    mse_loss,
    mse_loss_grad,
    update_bn_stats,
)
from .optim import AdamConfig, AdamState, adam_step, step_schedule

__all__ = [
    "AdamConfig", "AdamState", "Checkpoint", "FormatError", "LayerSpec", "NetworkSpec",
    "NumericError", "StateError", "adam_step", "are_dnn_spec", "backward", "checkpoint_id",
    "complex_to_real", "de_dnn_spec", "forward", "from_bytes", "gradient_check", "init_checkpoint", "irp_dnn_spec",
    "load_checkpoint", "mat_to_real", "mlp_spec", "mse_loss", "mse_loss_grad", "real_to_complex",
    "real_to_mat", "real_to_vec", "save_checkpoint", "step_schedule", "to_bytes", "update_bn_stats",
    "vec_to_real",
]

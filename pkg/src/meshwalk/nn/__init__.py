"""Neural-network building blocks: layers, losses, optimizer, checkpoints."""

from . import backend
from .layers import (Dense, GRUCellParams, GRULayer, InstanceNorm, Relu,
                     Tensor, fc_forward, glorot_uniform, gru_cell,
                     gru_sequence, instance_norm, split_gru_params)
from .losses import cross_entropy, cross_entropy_rows, softmax
from .optim import Adam, CyclicSchedule, adam_step, cyclic_rate
from .checkpoint import load_checkpoint, save_checkpoint, sha256_file

__all__ = [
    "backend", "Dense", "GRUCellParams", "GRULayer", "InstanceNorm", "Relu",
    "Tensor", "fc_forward", "glorot_uniform", "gru_cell", "gru_sequence",
    "instance_norm", "split_gru_params", "cross_entropy",
    "cross_entropy_rows", "softmax", "Adam", "CyclicSchedule", "adam_step",
    "cyclic_rate", "load_checkpoint", "save_checkpoint", "sha256_file",
]

"""Desk-scale experiments on batch-size scaling of gradients, strides and
curvature-based layer-wise learning rates."""

from .tensor import Batch, LayerState, Network, backward, finite_diff_gradient, forward, init_network
from .data import (Batcher, Dataset, DiscardPolicy, ScheduleSpec, discard_small_loss,
                   gen_teacher_dataset, load_csv_dataset, schedule_lookup)
from .optim import Optimizer, OptimizerConfig
from .theory import fit_loglog_slope

__version__ = "0.1.0"

"""Progressively diffused networks: ring-kernel convolutional LSTM diffusion layers."""

from .conv_lstm import CellState, GateParams, lstm_forward, lstm_step, lstm_step_backward
from .diffusion_layer import (DiffusionLayerParams, LayerState, diffusion_backward,
                              diffusion_forward, diffusion_step, init_state)
from .errors import (CheckpointError, ConfigError, DataError, NumericError, OracleError,
                     UsageError)
from .metrics import EvalReport, evaluate
from .network import (NetworkConfig, NetworkParams, backbone_forward, merge_scores,
                      network_backward, network_forward, predict, total_loss)
from .ring_kernels import RingSpec, ring_mask, ring_offsets
from .tensor_core import (MaskedKernel, conv2d_masked, conv2d_masked_backward,
                          finite_difference_jacobian, pointwise, pointwise_backward)
from .trainer import OptimState, init_params, sgd_step

__version__ = "0.1.0"

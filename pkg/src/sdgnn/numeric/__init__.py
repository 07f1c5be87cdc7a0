"""Tensors, reverse-mode gradients, Adam and gradient checking."""

from sdgnn.numeric import autograd as ops
from sdgnn.numeric.adam import AdamState, adam_step
from sdgnn.numeric.autograd import (
    ContractError,
    DimensionError,
    TapeGraph,
    Tensor,
    as_tensor,
    backward,
    const,
    set_debug,
)
from sdgnn.numeric.gradcheck import FiniteDiffReport, finite_diff_check

__all__ = [
    "AdamState",
    "ContractError",
    "DimensionError",
    "FiniteDiffReport",
    "TapeGraph",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "const",
    "finite_diff_check",
    "ops",
    "set_debug",
]

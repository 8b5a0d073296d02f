from .autograd import Tensor, concat, gather_rows, stack, stop_gradient
from .layers import Dense, MLP, SelfAttention, dense_forward, self_attention_forward
from .losses import bce_loss
from .optim import optimizer_step
from .params import GradientTape, ParameterStore, glorot_uniform

__all__ = [
    "Tensor", "concat", "gather_rows", "stack", "stop_gradient",
    "Dense", "MLP", "SelfAttention", "dense_forward", "self_attention_forward",
    "bce_loss", "optimizer_step",
    "GradientTape", "ParameterStore", "glorot_uniform",
]

"""Small differentiable kernel: tensors, layers, Adam and a gradient checker."""

from .gradcheck import grad_check
from .layers import (
    EncoderLayer,
    FeedForward,
    LayerNorm,
    Linear,
    MLP,
    Module,
    MultiHeadAttention,
    as_tensor,
    merge_heads,
    sinusoidal_encoding,
    sinusoidal_table,
    split_heads,
)
from .optim import Adam, AdamConfig, Parameter, adam_step, clip_grad_norm
from .tensor import (
    Tensor,
    add,
    attention_weights,
    concat,
    cumsum,
    dropout,
    gelu,
    getitem,
    layer_norm,
    linear,
    matmul,
    mean,
    mul,
    reshape,
    scaled_dot_attention,
    square,
    stack,
    tabs,
    transpose,
    tsum,
)

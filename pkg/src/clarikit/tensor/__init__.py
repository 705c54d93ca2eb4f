"""Minimal reverse-mode autodiff tensors plus the transformer blocks,
optimizer, and hashed text encoder used by the pane scoring model."""

from .autodiff import (
    GraphError,
    Tensor,
    add,
    check_gradients,
    concat,
    embedding_lookup,
    exp,
    finite_difference_gradient,
    layer_norm,
    log,
    matmul,
    max_relative_error,
    mean,
    mul,
    neg,
    relu,
    sigmoid,
    softmax,
    softplus,
    split,
    stack_rows,
    sum_,
    transpose,
    zero_grads,
)
from .checkpoint import load_tensors, save_tensors
from .nn import (
    AttentionHeadParams,
    EncoderLayerParams,
    attention_weights,
    encoder_layer_params_dict,
    encoder_layer_params_from_dict,
    init_encoder_layer,
    masked_mean_rows,
    multi_head_self_attention,
    transformer_encoder_layer,
)
from .optim import Adam, AdamConfig, NonFiniteGradientError, schedule_factor
from .text import encode_text, sequence_ids, text_encode

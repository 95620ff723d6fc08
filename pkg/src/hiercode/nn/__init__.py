"""Transformer substrate: blocks, pooling, gradient check, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .core import (
    MASK_FILL,
    DecoderBlock,
    EncoderBlock,
    MultiHeadAttention,
    TransformerEncoder,
    masked_mean_pool,
    self_attention_encode,
)
from .gradcheck import finite_difference_check

__all__ = [
    "MASK_FILL",
    "DecoderBlock",
    "EncoderBlock",
    "MultiHeadAttention",
    "TransformerEncoder",
    "finite_difference_check",
    "load_checkpoint",
    "masked_mean_pool",
    "save_checkpoint",
    "self_attention_encode",
]

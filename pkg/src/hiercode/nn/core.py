"""Transformer building blocks shared by the hierarchy and sequence encoders.

Pre-norm residual blocks with GELU feed-forwards. Masking uses a large
negative fill (-1e30) rather than -inf so fully-masked rows stay finite:
exp(-1e30 - max) underflows to exactly 0.0, which keeps masked keys
mathematically excluded while degenerate all-pad rows produce ignorable
finite values instead of NaN.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import AllMasked, ShapeMismatch

MASK_FILL = -1e30

# Probabilities are floored at this value inside logs so that exact
# zeros yield a large finite loss instead of inf.
PROB_FLOOR = 1e-9


def _assert_finite(t: torch.Tensor, where: str) -> None:
    if not torch.isfinite(t).all():
        raise FloatingPointError(f"non-finite values after {where}")


def masked_mean_pool(H: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over unmasked positions only; shape [B, L, d] -> [B, d]."""
    if H.dim() != 3 or mask.shape != H.shape[:2]:
        raise ShapeMismatch(f"pool expects H [B,L,d] with mask [B,L]; got {tuple(H.shape)}, {tuple(mask.shape)}")
    m = mask.to(H.dtype)
    counts = m.sum(dim=1)
    if (counts == 0).any():
        raise AllMasked("masked_mean_pool requires at least one valid position per row")
    return (H * m.unsqueeze(-1)).sum(dim=1) / counts.unsqueeze(-1)


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention; self- or cross- depending on memory."""

    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        if dim % heads:
            raise ShapeMismatch(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.drop = nn.Dropout(dropout)

    def forward(
        self,
        x: torch.Tensor,
        memory: torch.Tensor | None = None,
        key_mask: torch.Tensor | None = None,
        causal: bool = False,
    ) -> torch.Tensor:
        source = x if memory is None else memory
        B, L, _ = x.shape
        S = source.shape[1]
        q = self.q_proj(x).view(B, L, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(source).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(source).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if key_mask is not None:
            if key_mask.shape != (B, S):
                raise ShapeMismatch(f"key_mask {tuple(key_mask.shape)} does not match keys [{B},{S}]")
            logits = logits.masked_fill(~key_mask.bool()[:, None, None, :], MASK_FILL)
        if causal:
            steps = torch.arange(L, device=x.device)
            future = steps[None, :] > steps[:, None] if L == S else None
            if future is None:
                raise ShapeMismatch("causal attention requires query and key length to match")
            logits = logits.masked_fill(future[None, None, :, :], MASK_FILL)
        weights = torch.softmax(logits, dim=-1)
        out = (self.drop(weights) @ v).transpose(1, 2).reshape(B, L, self.dim)
        return self.out_proj(out)

    def attention_weights(
        self,
        x: torch.Tensor,
        memory: torch.Tensor | None = None,
        key_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Softmax rows [B, heads, L, S]; exposed for normalization tests."""
        source = x if memory is None else memory
        B, L, _ = x.shape
        S = source.shape[1]
        q = self.q_proj(x).view(B, L, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(source).view(B, S, self.heads, self.head_dim).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if key_mask is not None:
            logits = logits.masked_fill(~key_mask.bool()[:, None, None, :], MASK_FILL)
        return torch.softmax(logits, dim=-1)


class EncoderBlock(nn.Module):
    """Pre-norm self-attention + feed-forward residual block."""

    def __init__(self, dim: int, heads: int, ff_dim: int, dropout: float = 0.0):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, dropout)
        self.ln2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(
            nn.Linear(dim, ff_dim),
            nn.GELU(),
            nn.Linear(ff_dim, dim),
        )
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        x = x + self.drop(self.attn(self.ln1(x), key_mask=mask))
        x = x + self.drop(self.ff(self.ln2(x)))
        return x


class DecoderBlock(nn.Module):
    """Pre-norm causal self-attention, cross-attention, feed-forward."""

    def __init__(self, dim: int, heads: int, ff_dim: int, dropout: float = 0.0):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, heads, dropout)
        self.ln2 = nn.LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads, dropout)
        self.ln3 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(
            nn.Linear(dim, ff_dim),
            nn.GELU(),
            nn.Linear(ff_dim, dim),
        )
        self.drop = nn.Dropout(dropout)

    def forward(
        self,
        x: torch.Tensor,
        memory: torch.Tensor,
        memory_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        x = x + self.drop(self.self_attn(self.ln1(x), causal=True))
        x = x + self.drop(self.cross_attn(self.ln2(x), memory=memory, key_mask=memory_mask))
        x = x + self.drop(self.ff(self.ln3(x)))
        return x


def self_attention_encode(
    X: torch.Tensor,
    mask: torch.Tensor | None,
    layers,
    checked: bool = False,
) -> torch.Tensor:
    """Run X [B, L, d] through a stack of EncoderBlocks."""
    if X.dim() != 3:
        raise ShapeMismatch(f"expected [B,L,d] input, got {tuple(X.shape)}")
    if mask is not None and mask.shape != X.shape[:2]:
        raise ShapeMismatch(f"mask {tuple(mask.shape)} does not match input {tuple(X.shape)}")
    out = X
    for i, block in enumerate(layers):
        out = block(out, mask)
        if checked:
            _assert_finite(out, f"encoder block {i}")
    return out


class TransformerEncoder(nn.Module):
    """EncoderBlock stack with a final layer norm (pre-norm convention)."""

    def __init__(self, dim: int, heads: int, ff_dim: int, layers: int, dropout: float = 0.0):
        super().__init__()
        self.blocks = nn.ModuleList(
            EncoderBlock(dim, heads, ff_dim, dropout) for _ in range(layers)
        )
        self.final_ln = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        return self.final_ln(self_attention_encode(x, mask, self.blocks))

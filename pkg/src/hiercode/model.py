"""The two-stage hierarchy transformer.

Stage 1 embeds each token's root-to-leaf node-type path and runs a small
path-level transformer, mean-pooling over real path positions to get one
hierarchy vector per token. Stage 2 concatenates that vector with the
token embedding, projects to the sequence width, adds learned positions,
and runs the main sequence encoder. Mean-pooling the sequence output
yields the program vector used by the classification head and for
retrieval.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .config import HiTConfig
from .encoding import Batch
from .errors import ShapeMismatch
from .nn.core import TransformerEncoder, masked_mean_pool

_EMBED_INIT_STD = 0.02


@dataclass
class EncoderOutput:
    """Per-token contextual vectors, pooled program vector, and mask."""

    H: torch.Tensor  # [B, L, seq_model_dim]
    v: torch.Tensor  # [B, seq_model_dim]
    mask: torch.Tensor  # bool [B, L]


class HierarchyEncoder(nn.Module):
    """Path-level encoder: embed node types, contextualize, mean-pool."""

    def __init__(self, config: HiTConfig):
        super().__init__()
        self.config = config
        self.node_embed = nn.Embedding(config.node_vocab_size, config.hier_dim, padding_idx=0)
        self.depth_embed = nn.Embedding(config.max_path_depth, config.hier_dim)
        self.encoder = TransformerEncoder(
            config.hier_dim, config.heads, config.hier_ff_dim,
            config.hier_layers, config.dropout,
        )
        nn.init.normal_(self.node_embed.weight, std=_EMBED_INIT_STD)
        nn.init.normal_(self.depth_embed.weight, std=_EMBED_INIT_STD)

    def forward(self, path_ids: torch.Tensor, path_lengths: torch.Tensor) -> torch.Tensor:
        if path_ids.dim() != 3 or path_lengths.shape != path_ids.shape[:2]:
            raise ShapeMismatch(
                f"expected path_ids [B,L,D] with path_lengths [B,L]; got "
                f"{tuple(path_ids.shape)}, {tuple(path_lengths.shape)}"
            )
        B, L, D = path_ids.shape
        if D > self.config.max_path_depth:
            raise ShapeMismatch(
                f"path depth {D} exceeds max_path_depth {self.config.max_path_depth}"
            )
        flat_ids = path_ids.reshape(B * L, D)
        flat_len = path_lengths.reshape(B * L)

        # Identical paths must produce identical vectors, so encode each
        # distinct (ids, length) row once and scatter the results back.
        # This also collapses the heavy redundancy among token paths.
        keyed = torch.cat([flat_ids, flat_len.unsqueeze(1)], dim=1)
        unique, inverse = torch.unique(keyed, dim=0, return_inverse=True)
        u_ids, u_len = unique[:, :D], unique[:, D]

        mask = torch.arange(D, device=path_ids.device).unsqueeze(0) < u_len.unsqueeze(1)
        # All-pad rows (padding tokens) pool over position 0; their output
        # is ignored downstream but must stay finite.
        safe_mask = mask.clone()
        safe_mask[:, 0] |= u_len == 0

        x = self.node_embed(u_ids) + self.depth_embed(
            torch.arange(D, device=path_ids.device)
        ).unsqueeze(0)
        h = self.encoder(x, safe_mask)
        pooled = masked_mean_pool(h, safe_mask)
        return pooled[inverse].reshape(B, L, self.config.hier_dim)


class HiTEncoder(nn.Module):
    """Hierarchy encoder + fusion + sequence encoder."""

    def __init__(self, config: HiTConfig):
        super().__init__()
        self.config = config
        self.hierarchy = HierarchyEncoder(config)
        self.token_embed = nn.Embedding(config.vocab_size, config.token_dim, padding_idx=0)
        self.fuse = nn.Linear(config.token_dim + config.hier_dim, config.seq_model_dim)
        self.pos_embed = nn.Embedding(config.max_len, config.seq_model_dim)
        self.seq_encoder = TransformerEncoder(
            config.seq_model_dim, config.heads, config.seq_ff_dim,
            config.seq_layers, config.dropout,
        )
        nn.init.normal_(self.token_embed.weight, std=_EMBED_INIT_STD)
        nn.init.normal_(self.pos_embed.weight, std=_EMBED_INIT_STD)

    def hierarchy_encode(self, path_ids: torch.Tensor, path_lengths: torch.Tensor) -> torch.Tensor:
        return self.hierarchy(path_ids, path_lengths)

    def fuse_and_encode(
        self, P: torch.Tensor, token_ids: torch.Tensor, mask: torch.Tensor
    ) -> EncoderOutput:
        B, L = token_ids.shape
        if P.shape[:2] != (B, L):
            raise ShapeMismatch(
                f"hierarchy vectors {tuple(P.shape)} do not match tokens [{B},{L}]"
            )
        if L > self.config.max_len:
            raise ShapeMismatch(f"sequence length {L} exceeds max_len {self.config.max_len}")
        E = self.token_embed(token_ids)
        X = self.fuse(torch.cat([P, E], dim=-1))
        X = X + self.pos_embed(torch.arange(L, device=token_ids.device)).unsqueeze(0)
        H = self.seq_encoder(X, mask)
        v = masked_mean_pool(H, mask)
        return EncoderOutput(H=H, v=v, mask=mask)

    def forward(self, batch: Batch) -> EncoderOutput:
        P = self.hierarchy_encode(batch.path_ids, batch.path_lengths)
        return self.fuse_and_encode(P, batch.token_ids, batch.token_mask)


class Classifier(nn.Module):
    """Two-layer MLP head: ReLU hidden layer, softmax output."""

    def __init__(self, dim: int, num_categories: int):
        super().__init__()
        if num_categories < 2:
            raise ValueError(f"need at least 2 categories, got {num_categories}")
        self.hidden = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, num_categories)

    def logits(self, v: torch.Tensor) -> torch.Tensor:
        return self.out(torch.relu(self.hidden(v)))

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.logits(v), dim=-1)


class HiTClassifierModel(nn.Module):
    """Encoder plus classification head; also the retrieval embedder."""

    def __init__(self, config: HiTConfig):
        super().__init__()
        self.config = config
        self.encoder = HiTEncoder(config)
        self.classifier = Classifier(config.seq_model_dim, config.num_categories)

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.classifier(self.encoder(batch).v)

    def encode(self, batch: Batch) -> EncoderOutput:
        return self.encoder(batch)

    def embed_for_retrieval(self, batch: Batch) -> torch.Tensor:
        v = self.encoder(batch).v
        return v / v.norm(dim=-1, keepdim=True).clamp_min(1e-12)


def hierarchy_parameter_count(encoder: HiTEncoder) -> int:
    """Parameters that exist only because of the hierarchy pathway.

    Counts the whole path encoder plus the fusion columns that read the
    hierarchy vector; a vanilla sequence model has neither.
    """
    n = sum(p.numel() for p in encoder.hierarchy.parameters())
    n += encoder.config.seq_model_dim * encoder.config.hier_dim
    return n


def param_report(model: nn.Module) -> dict:
    """Break down parameter counts; fraction is hierarchy / total."""
    total = sum(p.numel() for p in model.parameters())
    encoder = getattr(model, "encoder", None)
    hier = hierarchy_parameter_count(encoder) if isinstance(encoder, HiTEncoder) else 0
    components = {}
    for name, module in model.named_children():
        components[name] = sum(p.numel() for p in module.parameters())
    return {
        "total": total,
        "hierarchy_pathway": hier,
        "hierarchy_fraction": hier / total if total else 0.0,
        "components": components,
    }

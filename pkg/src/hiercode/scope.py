"""Variable scope probe: do token embeddings know their enclosing block?

Pairs of identifier occurrences are labeled 1 iff both sit under the
same nearest block-type CST ancestor node. A bilinear head scored as
sigmoid(h_a^T W_s h_b) is trained on top of a frozen, classification-
trained encoder; only W_s receives gradients, so probe accuracy
measures what the representations already contain.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .config import HiTConfig
from .encoding import Vocabulary, encode_and_pad
from .errors import InsufficientIdentifiers, ShapeMismatch
from .model import HiTClassifierModel
from .nn.checkpoint import load_checkpoint
from .syntax.paths import NodeTypeVocabulary, TokenizedProgram, project_hierarchy
from .training import scope_pair_loss, seed_everything

IDENTIFIER_TYPES = frozenset({"identifier"})


@dataclass
class VariablePair:
    """Two identifier occurrences in one program plus their scope label."""

    program: TokenizedProgram
    pos_a: int
    pos_b: int
    label: int

    def __post_init__(self):
        n = len(self.program.tokens)
        if not (0 <= self.pos_a < n and 0 <= self.pos_b < n):
            raise ValueError(
                f"positions ({self.pos_a}, {self.pos_b}) out of range for {n} tokens"
            )
        if self.pos_a == self.pos_b:
            raise ValueError("a pair needs two distinct positions")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def identifier_positions(
    program: TokenizedProgram, types: frozenset[str] = IDENTIFIER_TYPES
) -> list[int]:
    """Token positions whose CST leaf type is an identifier."""
    return [
        i for i, path in enumerate(program.paths) if path.nodes[-1] in types
    ]


def sample_pairs(
    program: TokenizedProgram, budget: int, rng: random.Random
) -> list[VariablePair]:
    """Draw a balanced sample of same-scope/different-scope pairs.

    Same scope means the same nearest enclosing block-type ancestor
    node, read off the block ids recorded at extraction time. The output
    holds an equal number of positive and negative pairs (the minority
    side caps the majority), at most `budget` pairs in total.
    """
    if not program.block_ids:
        raise ValueError(
            "program carries no block ids; sample from freshly extracted programs"
        )
    positions = identifier_positions(program)
    if len(positions) < 2:
        raise InsufficientIdentifiers(
            f"need at least 2 identifier occurrences, found {len(positions)}"
        )
    if budget <= 0:
        return []
    positives: list[tuple[int, int]] = []
    negatives: list[tuple[int, int]] = []
    for ai in range(len(positions)):
        for bi in range(ai + 1, len(positions)):
            a, b = positions[ai], positions[bi]
            same = program.block_ids[a] == program.block_ids[b]
            (positives if same else negatives).append((a, b))
    rng.shuffle(positives)
    rng.shuffle(negatives)
    k = min(budget // 2, len(positives), len(negatives))
    chosen = [(a, b, 1) for a, b in positives[:k]] + [
        (a, b, 0) for a, b in negatives[:k]
    ]
    return [VariablePair(program, a, b, label) for a, b, label in chosen]


class ScopeProbe(nn.Module):
    """Bilinear same-scope scorer; W_s starts at zero so scores start at 0.5."""

    def __init__(self, dim: int):
        super().__init__()
        self.W_s = nn.Parameter(torch.zeros(dim, dim))

    def forward(self, h_a: torch.Tensor, h_b: torch.Tensor) -> torch.Tensor:
        if h_a.shape != h_b.shape:
            raise ShapeMismatch(
                f"h_a {tuple(h_a.shape)} does not match h_b {tuple(h_b.shape)}"
            )
        return torch.sigmoid(((h_a @ self.W_s) * h_b).sum(dim=-1))


def score_pair(probe: ScopeProbe, h_a: torch.Tensor, h_b: torch.Tensor) -> torch.Tensor:
    """Probability that two identifier embeddings share a scope."""
    return probe(h_a, h_b)


def _pair_features(
    encoder,
    programs: Sequence[TokenizedProgram],
    grouped_pairs: Sequence[tuple[int, VariablePair]],
    vocab: Vocabulary,
    node_vocab: NodeTypeVocabulary,
    config: HiTConfig,
    mode: str,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, int]:
    """Frozen encoder features for each pair; truncated positions drop."""
    cache: dict[int, torch.Tensor] = {}
    feats_a, feats_b, labels = [], [], []
    dropped = 0
    with torch.no_grad():
        for pi, pair in grouped_pairs:
            if pi not in cache:
                projected = project_hierarchy(programs[pi], mode)
                batch = encode_and_pad(
                    [projected], vocab, node_vocab, config.max_len, config.max_path_depth
                )
                cache[pi] = encoder(batch).H[0]
            H = cache[pi]
            if pair.pos_a >= H.shape[0] or pair.pos_b >= H.shape[0]:
                dropped += 1
                continue
            feats_a.append(H[pair.pos_a])
            feats_b.append(H[pair.pos_b])
            labels.append(pair.label)
    if not labels:
        raise InsufficientIdentifiers("no usable pairs after truncation")
    return (
        torch.stack(feats_a),
        torch.stack(feats_b),
        torch.tensor(labels, dtype=torch.float32),
        dropped,
    )


def run_probe(
    checkpoint_path: str | Path,
    programs: Sequence[TokenizedProgram],
    *,
    mode: str = "full",
    pairs_per_program: int = 8,
    seed: int = 0,
    epochs: int = 200,
    lr: float = 1e-2,
    train_fraction: float = 0.7,
) -> dict:
    """Train only W_s on frozen encoder features; report held-out accuracy.

    The checkpoint must carry its vocabularies in the extra payload.
    Returns {"mode", "accuracy", "n_pairs"}.
    """
    config_dict, state, extra = load_checkpoint(checkpoint_path)
    config = HiTConfig.from_dict(config_dict).updated(hierarchy_mode=mode)
    model = HiTClassifierModel(config)
    model.load_state_dict(state)
    model.eval()
    vocab = Vocabulary.from_list(extra["vocab"])
    node_vocab = NodeTypeVocabulary.from_list(extra["node_vocab"])

    rng = random.Random(seed)
    grouped: list[tuple[int, VariablePair]] = []
    for pi, program in enumerate(programs):
        try:
            for pair in sample_pairs(program, pairs_per_program, rng):
                grouped.append((pi, pair))
        except InsufficientIdentifiers:
            continue
    if not grouped:
        raise InsufficientIdentifiers("no program yielded a scope pair")

    seed_everything(seed)
    h_a, h_b, labels, _ = _pair_features(
        model.encoder, programs, grouped, vocab, node_vocab, config, mode
    )
    n = labels.shape[0]
    order = list(range(n))
    rng.shuffle(order)
    n_train = max(1, min(n - 1, round(n * train_fraction))) if n > 1 else 1
    train_idx = torch.tensor(order[:n_train])
    eval_idx = torch.tensor(order[n_train:]) if n > n_train else train_idx

    probe = ScopeProbe(config.seq_model_dim)
    optimizer = torch.optim.AdamW(probe.parameters(), lr=lr)
    for _ in range(epochs):
        optimizer.zero_grad(set_to_none=True)
        p = probe(h_a[train_idx], h_b[train_idx])
        loss = scope_pair_loss(p, labels[train_idx])
        loss.backward()
        optimizer.step()

    with torch.no_grad():
        p = probe(h_a[eval_idx], h_b[eval_idx])
        predicted = (p > 0.5).to(labels.dtype)
        accuracy = float((predicted == labels[eval_idx]).float().mean())
    return {"mode": mode, "accuracy": accuracy, "n_pairs": n}

"""Vocabularies, name subtokenization, batching, and copy alignment.

Source tokens are the CST leaf strings exactly as extracted; there is no
subword splitting on the encoder side, so out-of-vocabulary tokens
become UNK and are recoverable only through the copy mechanism. Method
names on the decoder side are split into lowercase subtokens and draw
from a separate target vocabulary.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import torch

from .errors import EmptyCorpus
from .syntax.paths import NodeTypeVocabulary, TokenizedProgram, truncate_path

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN)


class Vocabulary:
    """Frequency-ranked token ↔ id mapping with four reserved slots."""

    PAD = 0
    UNK = 1
    BOS = 2
    EOS = 3

    def __init__(self, tokens: Sequence[str] = ()):
        self._tokens: list[str] = list(RESERVED_TOKENS) + [
            t for t in tokens if t not in RESERVED_TOKENS
        ]
        self._ids: dict[str, int] = {t: i for i, t in enumerate(self._tokens)}

    @classmethod
    def build(cls, token_streams: Iterable[Sequence[str]], max_size: int) -> "Vocabulary":
        """Rank by frequency on the training split, ties lexicographic."""
        if max_size < 4:
            raise ValueError(f"max_size must be >= 4, got {max_size}")
        counts: Counter[str] = Counter()
        n_streams = 0
        for stream in token_streams:
            n_streams += 1
            counts.update(stream)
        if n_streams == 0:
            raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
        for reserved in RESERVED_TOKENS:
            counts.pop(reserved, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        keep = [token for token, _ in ranked[: max_size - 4]]
        return cls(keep)

    @property
    def size(self) -> int:
        return len(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.UNK)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self._tokens[i] for i in ids]

    def to_list(self) -> list[str]:
        return list(self._tokens)

    @classmethod
    def from_list(cls, tokens: list[str]) -> "Vocabulary":
        if tuple(tokens[:4]) != RESERVED_TOKENS:
            raise ValueError("vocabulary list must start with the reserved tokens")
        return cls(tokens[4:])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_list()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_list(json.loads(Path(path).read_text(encoding="utf-8")))


def build_vocab(corpus: Iterable[TokenizedProgram], max_size: int) -> Vocabulary:
    """Vocabulary over the surface tokens of a training corpus."""
    return Vocabulary.build((p.tokens for p in corpus), max_size)


def subtokenize_name(name: str) -> list[str]:
    """Split an identifier into lowercase subtokens.

    Boundaries: underscores, a lower-to-upper transition, and any
    letter/digit transition. Empty pieces are dropped.
    """
    pieces: list[str] = []
    current: list[str] = []
    prev = ""
    for ch in name:
        if ch == "_":
            if current:
                pieces.append("".join(current))
                current = []
            prev = ""
            continue
        boundary = (
            (prev.islower() and ch.isupper())
            or (prev.isdigit() and not ch.isdigit())
            or (ch.isdigit() and bool(prev) and not prev.isdigit())
        )
        if boundary and current:
            pieces.append("".join(current))
            current = []
        current.append(ch)
        prev = ch
    if current:
        pieces.append("".join(current))
    return [p.lower() for p in pieces if p]


def build_copy_map(program: TokenizedProgram, vocab: Vocabulary) -> list[int]:
    """Per-position ids: vocab id if known, else a fresh extended id.

    Extended ids start at vocab.size and are assigned on first
    occurrence; repeated out-of-vocabulary tokens reuse their id, so the
    extended ids used by one program form a contiguous range.
    """
    ids: list[int] = []
    extended: dict[str, int] = {}
    for token in program.tokens:
        if token in vocab:
            ids.append(vocab.id_of(token))
        else:
            if token not in extended:
                extended[token] = vocab.size + len(extended)
            ids.append(extended[token])
    return ids


def extended_tokens(program: TokenizedProgram, vocab: Vocabulary) -> list[str]:
    """Surface strings behind a program's extended ids, in id order."""
    out: list[str] = []
    seen: set[str] = set()
    for token in program.tokens:
        if token not in vocab and token not in seen:
            seen.add(token)
            out.append(token)
    return out


@dataclass
class Batch:
    """Padded tensors for a list of programs.

    token_mask[b, i] is True iff position i holds a real token; masked
    positions carry all-PAD paths with length 0. copy_map holds the
    per-position extended-vocabulary ids from build_copy_map (0 at
    padding), and ext_tokens the surface strings those ids stand for.
    """

    token_ids: torch.Tensor  # long [B, L]
    path_ids: torch.Tensor  # long [B, L, D]
    path_lengths: torch.Tensor  # long [B, L]
    token_mask: torch.Tensor  # bool [B, L]
    copy_map: torch.Tensor  # long [B, L]
    ext_tokens: list[list[str]]
    targets: torch.Tensor | None = None

    def __len__(self) -> int:
        return self.token_ids.shape[0]

    @property
    def max_extended(self) -> int:
        return max((len(e) for e in self.ext_tokens), default=0)


def encode_and_pad(
    programs: Sequence[TokenizedProgram],
    vocab: Vocabulary,
    node_vocab: NodeTypeVocabulary,
    max_len: int,
    max_depth: int,
    copy_vocab: Vocabulary | None = None,
) -> Batch:
    """Pad a list of programs into one Batch.

    Tokens beyond max_len are dropped from the right; paths deeper than
    max_depth are re-truncated with the extraction rules. copy_vocab is
    the vocabulary used for copy alignment (the target vocabulary for
    generation); it defaults to the source vocab.
    """
    copy_vocab = copy_vocab or vocab
    B = len(programs)
    lengths = [min(len(p), max_len) for p in programs]
    L = max(lengths, default=1)
    L = max(L, 1)
    depths = [
        min(len(path.nodes), max_depth)
        for p in programs
        for path in p.paths[: max_len]
    ]
    D = max(depths, default=1)

    token_ids = torch.zeros((B, L), dtype=torch.long)
    path_ids = torch.full((B, L, D), NodeTypeVocabulary.PAD, dtype=torch.long)
    path_lengths = torch.zeros((B, L), dtype=torch.long)
    token_mask = torch.zeros((B, L), dtype=torch.bool)
    copy_ids = torch.zeros((B, L), dtype=torch.long)
    ext: list[list[str]] = []

    for b, program in enumerate(programs):
        n = lengths[b]
        token_ids[b, :n] = torch.tensor(vocab.encode(program.tokens[:n]), dtype=torch.long)
        token_mask[b, :n] = True
        full_copy = build_copy_map(program, copy_vocab)
        copy_ids[b, :n] = torch.tensor(full_copy[:n], dtype=torch.long)
        ext.append(extended_tokens(program, copy_vocab))
        for i, path in enumerate(program.paths[:n]):
            nodes, _ = truncate_path(path.nodes, path.statement_split, max_depth)
            ids = node_vocab.encode(nodes)
            path_ids[b, i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            path_lengths[b, i] = len(ids)

    return Batch(
        token_ids=token_ids,
        path_ids=path_ids,
        path_lengths=path_lengths,
        token_mask=token_mask,
        copy_map=copy_ids,
        ext_tokens=ext,
    )


def encode_generation_targets(
    batch: Batch,
    names: Sequence[str],
    target_vocab: Vocabulary,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Build decoder inputs and extended-id targets for method names.

    Returns (decoder_in [B, T+1], target_out [B, T+1]). decoder_in
    starts with BOS and folds extended ids back to UNK (the decoder
    embeds only in-vocabulary ids); target_out ends with EOS and keeps
    extended ids so the loss can reward copying. Padding is PAD = 0.
    """
    if len(names) != len(batch):
        raise ValueError(f"{len(names)} names for a batch of {len(batch)}")
    sequences: list[list[int]] = []
    for b, name in enumerate(names):
        subs = subtokenize_name(name) if name else []
        ext_lookup = {t: target_vocab.size + i for i, t in enumerate(batch.ext_tokens[b])}
        ids = []
        for sub in subs:
            if sub in target_vocab:
                ids.append(target_vocab.id_of(sub))
            elif sub in ext_lookup:
                ids.append(ext_lookup[sub])
            else:
                ids.append(Vocabulary.UNK)
        sequences.append(ids)
    T = max((len(s) for s in sequences), default=0) + 1
    decoder_in = torch.zeros((len(batch), T), dtype=torch.long)
    target_out = torch.zeros((len(batch), T), dtype=torch.long)
    for b, ids in enumerate(sequences):
        in_ids = [Vocabulary.BOS] + [
            i if i < target_vocab.size else Vocabulary.UNK for i in ids
        ]
        out_ids = ids + [Vocabulary.EOS]
        decoder_in[b, : len(in_ids)] = torch.tensor(in_ids, dtype=torch.long)
        target_out[b, : len(out_ids)] = torch.tensor(out_ids, dtype=torch.long)
    return decoder_in, target_out

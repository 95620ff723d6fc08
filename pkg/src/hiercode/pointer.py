"""Transformer decoder with a pointer/copy head for name generation.

The decoder proper is a causal transformer with cross-attention over the
encoder output. On top of its final state s_t, a separate additive
attention scores every source position (e_i = w3ᵀ tanh(W1 H_i + W2 s_t
+ b)), and the resulting distribution is mixed with the vocabulary
softmax through a sigmoid copy gate:

    P(w) = (1 - p_copy) * P_v(w) + p_copy * Σ_{i: w_i = w} a_i

Positions that share a surface token pool their attention mass onto one
id, and out-of-vocabulary source tokens live in a per-example extended
id range starting at the vocabulary size.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import HiTConfig
from .encoding import Batch, Vocabulary
from .errors import EmptyTarget, ShapeMismatch, UnloadedModel
from .model import EncoderOutput, HiTEncoder
from .nn.core import MASK_FILL, PROB_FLOOR, DecoderBlock


def extended_mixture(
    P_v: torch.Tensor,
    p_copy: torch.Tensor,
    a_t: torch.Tensor,
    copy_map: torch.Tensor,
    n_ext: int,
) -> torch.Tensor:
    """Mix a vocabulary distribution with pointer attention.

    P_v [B, V], p_copy [B, 1] in (0,1), a_t [B, L] summing to 1 over
    real positions, copy_map [B, L] holding vocab-or-extended ids.
    Returns P [B, V + n_ext] summing to 1.
    """
    B, V = P_v.shape
    out = torch.cat(
        [(1.0 - p_copy) * P_v, P_v.new_zeros(B, n_ext)], dim=1
    )
    return out.scatter_add(1, copy_map, p_copy * a_t)


def generation_loss(
    P_seq: torch.Tensor, targets: torch.Tensor, pad_id: int = Vocabulary.PAD
) -> torch.Tensor:
    """Per-example mean NLL over target steps, then batch mean.

    targets use extended ids where the gold subtoken is only copiable;
    padding positions (pad_id) are excluded. Probabilities are floored
    at 1e-9 inside the log.
    """
    if P_seq.dim() != 3 or targets.shape != P_seq.shape[:2]:
        raise ShapeMismatch(
            f"P_seq {tuple(P_seq.shape)} does not match targets {tuple(targets.shape)}"
        )
    mask = targets != pad_id
    steps = mask.sum(dim=1)
    if (steps == 0).any():
        raise EmptyTarget("every example needs at least one target subtoken")
    picked = P_seq.gather(2, targets.clamp_min(0).unsqueeze(-1)).squeeze(-1)
    nll = -torch.log(picked.clamp_min(PROB_FLOOR))
    per_example = (nll * mask).sum(dim=1) / steps
    return per_example.mean()


class PointerDecoder(nn.Module):
    """Causal decoder stack plus the pointer attention and copy gate."""

    def __init__(self, config: HiTConfig):
        super().__init__()
        self.config = config
        d = config.seq_model_dim
        self.target_embed = nn.Embedding(config.target_vocab_size, d, padding_idx=0)
        self.pos_embed = nn.Embedding(config.max_len, d)
        self.blocks = nn.ModuleList(
            DecoderBlock(d, config.heads, config.seq_ff_dim, config.dropout)
            for _ in range(config.dec_layers)
        )
        self.final_ln = nn.LayerNorm(d)
        # Pointer attention: e_i = w3ᵀ tanh(W1 H_i + W2 s_t + b)
        self.W1 = nn.Linear(d, d, bias=False)
        self.W2 = nn.Linear(d, d, bias=True)
        self.w3 = nn.Linear(d, 1, bias=False)
        # Generation head and copy gate over h*
        self.W4 = nn.Linear(d, config.target_vocab_size)
        self.W5 = nn.Linear(d, 1)
        nn.init.normal_(self.target_embed.weight, std=0.02)
        nn.init.normal_(self.pos_embed.weight, std=0.02)

    def states(self, decoder_in: torch.Tensor, enc: EncoderOutput) -> torch.Tensor:
        """Decoder outputs s_1..s_T for teacher-forced input ids."""
        B, T = decoder_in.shape
        if T > self.config.max_len:
            raise ShapeMismatch(f"target length {T} exceeds max_len {self.config.max_len}")
        x = self.target_embed(decoder_in) + self.pos_embed(
            torch.arange(T, device=decoder_in.device)
        ).unsqueeze(0)
        for block in self.blocks:
            x = block(x, enc.H, enc.mask)
        return self.final_ln(x)

    def attend(
        self, H: torch.Tensor, mask: torch.Tensor, s_t: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Pointer attention for one step: a_t [B, L], h* [B, d]."""
        if s_t.dim() != 2 or H.dim() != 3 or H.shape[0] != s_t.shape[0]:
            raise ShapeMismatch(
                f"attend expects H [B,L,d] and s_t [B,d]; got {tuple(H.shape)}, {tuple(s_t.shape)}"
            )
        scores = self.w3(torch.tanh(self.W1(H) + self.W2(s_t).unsqueeze(1))).squeeze(-1)
        scores = scores.masked_fill(~mask.bool(), MASK_FILL)
        a_t = torch.softmax(scores, dim=-1)
        h_star = torch.bmm(a_t.unsqueeze(1), H).squeeze(1)
        return a_t, h_star

    def mix_distribution(
        self,
        h_star: torch.Tensor,
        a_t: torch.Tensor,
        copy_map: torch.Tensor,
        n_ext: int,
    ) -> torch.Tensor:
        P_v = torch.softmax(self.W4(h_star), dim=-1)
        p_copy = torch.sigmoid(self.W5(h_star))
        return extended_mixture(P_v, p_copy, a_t, copy_map, n_ext)

    def forward(
        self, decoder_in: torch.Tensor, enc: EncoderOutput, batch: Batch
    ) -> torch.Tensor:
        """Teacher-forced distributions [B, T, V + n_ext]."""
        S = self.states(decoder_in, enc)
        B, T, d = S.shape
        L = enc.H.shape[1]
        n_ext = batch.max_extended
        # Broadcast the per-step attention over all T steps at once.
        keys = self.W1(enc.H).unsqueeze(1)  # [B, 1, L, d]
        queries = self.W2(S).unsqueeze(2)  # [B, T, 1, d]
        scores = self.w3(torch.tanh(keys + queries)).squeeze(-1)  # [B, T, L]
        scores = scores.masked_fill(~enc.mask.bool().unsqueeze(1), MASK_FILL)
        a = torch.softmax(scores, dim=-1)
        h_star = a @ enc.H  # [B, T, d]
        P_v = torch.softmax(self.W4(h_star), dim=-1)
        p_copy = torch.sigmoid(self.W5(h_star))
        out = torch.cat(
            [(1.0 - p_copy) * P_v, P_v.new_zeros(B, T, n_ext)], dim=-1
        )
        copy = batch.copy_map.unsqueeze(1).expand(B, T, L)
        return out.scatter_add(2, copy, p_copy * a)


class HiTGeneratorModel(nn.Module):
    """Encoder + pointer decoder for method-name generation."""

    def __init__(self, config: HiTConfig):
        super().__init__()
        self.config = config
        self.encoder = HiTEncoder(config)
        self.decoder = PointerDecoder(config)
        self._target_tokens: list[str] | None = None

    def forward(self, batch: Batch, decoder_in: torch.Tensor) -> torch.Tensor:
        return self.decoder(decoder_in, self.encoder(batch), batch)

    def loss(self, batch: Batch, decoder_in: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
        return generation_loss(self(batch, decoder_in), targets)

    @torch.no_grad()
    def decode(self, batch: Batch, max_steps: int = 8, beam: int = 1) -> list[list[str]]:
        """Emit subtoken strings per example until EOS or max_steps.

        Requires a bound target vocabulary (bind_target_vocab) so that
        in-vocabulary ids can be resolved to surface strings.
        """
        if beam < 1:
            raise ValueError(f"beam must be >= 1, got {beam}")
        if self._target_tokens is None:
            raise UnloadedModel("decode requires a bound target vocabulary")
        if max_steps == 0:
            return [[] for _ in range(len(batch))]
        # decoder_in grows to max_steps + 1 ids including BOS
        max_steps = min(max_steps, self.config.max_len - 1)
        enc = self.encoder(batch)
        if beam == 1:
            return self._greedy(batch, enc, max_steps)
        return [self._beam_one(batch, enc, b, max_steps, beam) for b in range(len(batch))]

    def _greedy(self, batch: Batch, enc: EncoderOutput, max_steps: int) -> list[list[str]]:
        B = len(batch)
        V = self.config.target_vocab_size
        device = batch.token_ids.device
        decoder_in = torch.full((B, 1), Vocabulary.BOS, dtype=torch.long, device=device)
        finished = torch.zeros(B, dtype=torch.bool, device=device)
        emitted_ids: list[list[int]] = [[] for _ in range(B)]
        for _ in range(max_steps):
            P = self.decoder(decoder_in, enc, batch)[:, -1]  # [B, V+E]
            nxt = P.argmax(dim=-1)
            for b in range(B):
                if finished[b]:
                    continue
                idx = int(nxt[b])
                if idx == Vocabulary.EOS:
                    finished[b] = True
                else:
                    emitted_ids[b].append(idx)
            if finished.all():
                break
            feed = torch.where(
                nxt < V, nxt, torch.full_like(nxt, Vocabulary.UNK)
            )
            feed = torch.where(finished, torch.full_like(feed, Vocabulary.PAD), feed)
            decoder_in = torch.cat([decoder_in, feed.unsqueeze(1)], dim=1)
        return self._materialize(batch, emitted_ids)

    def _beam_one(
        self, batch: Batch, enc: EncoderOutput, b: int, max_steps: int, beam: int
    ) -> list[str]:
        V = self.config.target_vocab_size
        sub = _slice_batch(batch, b)
        enc_b = EncoderOutput(
            H=enc.H[b : b + 1], v=enc.v[b : b + 1], mask=enc.mask[b : b + 1]
        )
        # (log_prob, emitted extended ids, finished)
        beams: list[tuple[float, list[int], bool]] = [(0.0, [], False)]
        for _ in range(max_steps):
            candidates: list[tuple[float, list[int], bool]] = []
            for score, ids, done in beams:
                if done:
                    candidates.append((score, ids, True))
                    continue
                feed = [Vocabulary.BOS] + [i if i < V else Vocabulary.UNK for i in ids]
                decoder_in = torch.tensor([feed], dtype=torch.long)
                P = self.decoder(decoder_in, enc_b, sub)[0, -1]
                logp = torch.log(P.clamp_min(PROB_FLOOR))
                top = torch.topk(logp, min(beam, P.shape[-1]))
                for val, idx in zip(top.values.tolist(), top.indices.tolist()):
                    if idx == Vocabulary.EOS:
                        candidates.append((score + val, ids, True))
                    else:
                        candidates.append((score + val, ids + [idx], False))
            candidates.sort(key=lambda c: -c[0])
            beams = candidates[:beam]
            if all(done for _, _, done in beams):
                break
        best = max(beams, key=lambda c: c[0])
        return self._materialize(_slice_batch(batch, b), [best[1]])[0]

    def _materialize(self, batch: Batch, emitted: list[list[int]]) -> list[list[str]]:
        vocab_tokens: list[str] = self._target_tokens
        V = self.config.target_vocab_size
        out = []
        for b, ids in enumerate(emitted):
            ext = batch.ext_tokens[b]
            subs = []
            for i in ids:
                if i < V:
                    subs.append(vocab_tokens[i] if i < len(vocab_tokens) else "<unk>")
                else:
                    pos = i - V
                    subs.append(ext[pos] if pos < len(ext) else "<unk>")
            out.append(subs)
        return out

    def bind_target_vocab(self, vocab: Vocabulary) -> None:
        """Attach target-side surface strings for decode()."""
        self._target_tokens = vocab.to_list()


def _slice_batch(batch: Batch, b: int) -> Batch:
    return Batch(
        token_ids=batch.token_ids[b : b + 1],
        path_ids=batch.path_ids[b : b + 1],
        path_lengths=batch.path_lengths[b : b + 1],
        token_mask=batch.token_mask[b : b + 1],
        copy_map=batch.copy_map[b : b + 1],
        ext_tokens=[batch.ext_tokens[b]],
    )


def join_camel_case(subtokens: list[str]) -> str:
    """['get','item','count'] -> 'getItemCount'."""
    if not subtokens:
        return ""
    head, *rest = subtokens
    return head + "".join(s[:1].upper() + s[1:] for s in rest)

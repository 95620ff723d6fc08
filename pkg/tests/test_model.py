"""Architecture tests: hierarchy encoding, fusion, heads, param budget."""

import pytest
import torch

from hiercode.config import HiTConfig
from hiercode.encoding import Batch, Vocabulary, build_vocab, encode_and_pad
from hiercode.errors import ShapeMismatch
from hiercode.model import (
    Classifier,
    EncoderOutput,
    HierarchyEncoder,
    HiTClassifierModel,
    HiTEncoder,
    hierarchy_parameter_count,
    param_report,
)
from hiercode.syntax import NodeTypeVocabulary, project_hierarchy, tokenize_program


def small_config(**overrides):
    base = dict(
        token_dim=16, hier_dim=8, seq_model_dim=16, heads=2,
        hier_layers=1, seq_layers=2, dec_layers=1, max_len=32,
        max_path_depth=8, num_categories=4, vocab_size=64,
        target_vocab_size=32, node_vocab_size=32, dropout=0.0,
    )
    base.update(overrides)
    return HiTConfig(**base)


def toy_batch(mode="full", srcs=None):
    srcs = srcs or ["x = 1", "def f():\n    y = x + 1", "for i in xs:\n    f(i)"]
    progs = [tokenize_program(s, "python") for s in srcs]
    progs = [project_hierarchy(p, mode) for p in progs]
    vocab = build_vocab(progs, max_size=64)
    node_vocab = NodeTypeVocabulary.from_programs(progs)
    return encode_and_pad(progs, vocab, node_vocab, max_len=32, max_depth=8), vocab, node_vocab


class TestHierarchyEncoder:
    def test_identical_paths_identical_vectors(self):
        torch.manual_seed(0)
        enc = HierarchyEncoder(small_config())
        ids = torch.tensor([[[2, 3, 4, 0], [2, 3, 4, 0], [2, 5, 0, 0]]])
        lengths = torch.tensor([[3, 3, 2]])
        P = enc(ids, lengths)
        assert torch.equal(P[0, 0], P[0, 1])
        assert not torch.equal(P[0, 0], P[0, 2])

    def test_single_node_path_is_mean_of_one(self):
        torch.manual_seed(1)
        enc = HierarchyEncoder(small_config())
        ids = torch.tensor([[[5, 0, 0, 0]]])
        lengths = torch.tensor([[1]])
        P = enc(ids, lengths)
        x = enc.node_embed(torch.tensor([[5]])) + enc.depth_embed(torch.tensor([0]))
        expected = enc.encoder(x, torch.ones(1, 1, dtype=torch.bool))[0, 0]
        assert torch.allclose(P[0, 0], expected, atol=1e-6)

    def test_padded_depth_positions_ignored(self):
        torch.manual_seed(2)
        enc = HierarchyEncoder(small_config()).double()
        ids = torch.tensor([[[2, 3, 0, 0], [2, 3, 9, 9]]])
        lengths = torch.tensor([[2, 2]])
        P = enc(ids, lengths)
        assert (P[0, 0] - P[0, 1]).abs().max().item() < 1e-12

    def test_batch_equals_per_example_loop(self):
        torch.manual_seed(3)
        enc = HierarchyEncoder(small_config()).double()
        ids = torch.randint(0, 8, (3, 5, 6))
        lengths = torch.randint(1, 7, (3, 5))
        batched = enc(ids, lengths)
        for b in range(3):
            single = enc(ids[b : b + 1], lengths[b : b + 1])
            assert torch.allclose(batched[b], single[0], atol=1e-6)

    def test_shape_validation(self):
        enc = HierarchyEncoder(small_config())
        with pytest.raises(ShapeMismatch):
            enc(torch.zeros(2, 3, dtype=torch.long), torch.zeros(2, 3, dtype=torch.long))
        with pytest.raises(ShapeMismatch):
            enc(torch.zeros(2, 3, 40, dtype=torch.long), torch.zeros(2, 3, dtype=torch.long))


class TestHiTEncoder:
    def test_forward_shapes(self):
        torch.manual_seed(4)
        batch, _, _ = toy_batch()
        model = HiTEncoder(small_config())
        out = model(batch)
        B, L = batch.token_ids.shape
        assert out.H.shape == (B, L, 16)
        assert out.v.shape == (B, 16)

    def test_v_is_masked_mean_of_H(self):
        torch.manual_seed(5)
        batch, _, _ = toy_batch()
        model = HiTEncoder(small_config())
        out = model(batch)
        from hiercode.nn import masked_mean_pool

        assert torch.allclose(out.v, masked_mean_pool(out.H, batch.token_mask), atol=1e-7)

    def test_pad_invariance_of_v(self):
        torch.manual_seed(6)
        model = HiTEncoder(small_config()).double()
        batch, _, _ = toy_batch(srcs=["x = 1 + 2"])
        out1 = model(batch)
        padded = Batch(
            token_ids=torch.cat([batch.token_ids, torch.zeros(1, 4, dtype=torch.long)], 1),
            path_ids=torch.cat(
                [batch.path_ids, torch.zeros(1, 4, batch.path_ids.shape[2], dtype=torch.long)], 1
            ),
            path_lengths=torch.cat([batch.path_lengths, torch.zeros(1, 4, dtype=torch.long)], 1),
            token_mask=torch.cat([batch.token_mask, torch.zeros(1, 4, dtype=torch.bool)], 1),
            copy_map=torch.cat([batch.copy_map, torch.zeros(1, 4, dtype=torch.long)], 1),
            ext_tokens=batch.ext_tokens,
        )
        out2 = model(padded)
        assert (out1.v - out2.v).abs().max().item() < 1e-10

    def test_vanilla_containment_under_mode_none(self):
        torch.manual_seed(7)
        config = small_config()
        model = HiTEncoder(config).double()
        with torch.no_grad():
            model.fuse.weight.zero_()
            model.fuse.weight[:, config.hier_dim :] = torch.eye(config.token_dim)
            model.fuse.bias.zero_()
        batch, _, _ = toy_batch(mode="none")
        out = model(batch)

        E = model.token_embed(batch.token_ids)
        L = batch.token_ids.shape[1]
        X = E + model.pos_embed(torch.arange(L)).unsqueeze(0)
        H_vanilla = model.seq_encoder(X, batch.token_mask)
        assert (out.H - H_vanilla).abs().max().item() < 1e-6

    def test_permuting_batch_permutes_outputs(self):
        torch.manual_seed(8)
        model = HiTEncoder(small_config()).double()
        batch, _, _ = toy_batch()
        out = model(batch)
        perm = [2, 0, 1]
        permuted = Batch(
            token_ids=batch.token_ids[perm],
            path_ids=batch.path_ids[perm],
            path_lengths=batch.path_lengths[perm],
            token_mask=batch.token_mask[perm],
            copy_map=batch.copy_map[perm],
            ext_tokens=[batch.ext_tokens[i] for i in perm],
        )
        out2 = model(permuted)
        assert torch.allclose(out.v[perm], out2.v, atol=1e-10)

    def test_full_gradient_flow(self):
        failures = 0
        for seed in range(5):
            torch.manual_seed(seed)
            model = HiTClassifierModel(small_config())
            batch, _, _ = toy_batch()
            probs = model(batch)
            loss = -torch.log(probs.clamp_min(1e-9))[
                torch.arange(len(batch)), torch.tensor([0, 1, 2])
            ].mean()
            model.zero_grad()
            loss.backward()
            for name, p in model.named_parameters():
                if p.grad is None or p.grad.abs().sum().item() == 0.0:
                    failures += 1
                    break
        assert failures == 0

    def test_too_long_sequence_rejected(self):
        model = HiTEncoder(small_config(max_len=4))
        batch, _, _ = toy_batch()
        with pytest.raises(ShapeMismatch):
            model(batch)


class TestClassifier:
    def test_zero_weights_uniform(self):
        clf = Classifier(8, 5)
        with torch.no_grad():
            for p in clf.parameters():
                p.zero_()
        probs = clf(torch.randn(3, 8))
        assert torch.allclose(probs, torch.full((3, 5), 0.2), atol=1e-7)

    def test_probabilities_sum_to_one(self):
        torch.manual_seed(9)
        clf = Classifier(8, 4)
        probs = clf(torch.randn(100, 8))
        sums = probs.sum(dim=-1)
        assert ((sums - 1.0).abs() < 1e-6).all()
        assert (probs >= 0).all()

    def test_argmax_shift_invariant(self):
        torch.manual_seed(10)
        clf = Classifier(8, 4)
        v = torch.randn(16, 8)
        logits = clf.logits(v)
        shifted = torch.softmax(logits + 3.7, dim=-1)
        assert torch.equal(shifted.argmax(-1), clf(v).argmax(-1))

    def test_rejects_single_category(self):
        with pytest.raises(ValueError):
            Classifier(8, 1)


class TestRetrievalEmbedding:
    def test_unit_norm(self):
        torch.manual_seed(11)
        model = HiTClassifierModel(small_config())
        batch, _, _ = toy_batch()
        emb = model.embed_for_retrieval(batch)
        norms = emb.norm(dim=-1)
        assert ((norms - 1.0).abs() < 1e-6).all()

    def test_identical_programs_cosine_one(self):
        torch.manual_seed(12)
        model = HiTClassifierModel(small_config())
        batch, _, _ = toy_batch(srcs=["x = 1", "x = 1"])
        emb = model.embed_for_retrieval(batch)
        cos = (emb[0] * emb[1]).sum()
        assert cos.item() == pytest.approx(1.0, abs=1e-6)


class TestParamBudget:
    def test_hierarchy_overhead_at_defaults(self):
        config = HiTConfig(num_categories=250, vocab_size=8000, node_vocab_size=64)
        model = HiTClassifierModel(config)
        report = param_report(model)
        assert report["hierarchy_fraction"] <= 0.05
        assert report["hierarchy_pathway"] == hierarchy_parameter_count(model.encoder)
        assert report["total"] > 1_000_000

    def test_report_components_cover_model(self):
        model = HiTClassifierModel(small_config())
        report = param_report(model)
        assert sum(report["components"].values()) == report["total"]

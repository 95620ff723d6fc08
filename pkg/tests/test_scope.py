"""Tests for scope pair sampling and the bilinear probe.

Pair labels are verified against an independent recursive walk of the
CST that tracks each leaf's nearest block-type ancestor by object
identity, with no shared code with the extraction pipeline.
"""

import math
import random

import pytest
import torch

from hiercode.config import HiTConfig
from hiercode.encoding import build_vocab
from hiercode.errors import (
    InsufficientIdentifiers,
    MissingCheckpoint,
    ShapeMismatch,
)
from hiercode.model import HiTClassifierModel
from hiercode.nn.checkpoint import save_checkpoint
from hiercode.scope import (
    ScopeProbe,
    VariablePair,
    _pair_features,
    identifier_positions,
    run_probe,
    sample_pairs,
    score_pair,
)
from hiercode.syntax import NodeTypeVocabulary, parse_to_cst, tokenize_program
from hiercode.syntax.parse import get_grammar
from hiercode.training import scope_pair_loss, seed_everything

SCOPED_SRC = """def f():
    a = 1
    if a:
        b = a + 1
        c = b
    for i in xs:
        d = i
    return a
"""

PROBE_SOURCES = [
    SCOPED_SRC,
    "def g(n):\n    total = 0\n    while n:\n        total = total + n\n        n = n - 1\n    return total\n",
    "def h(xs):\n    out = 0\n    for x in xs:\n        if x:\n            out = out + x\n    return out\n",
    "a = 1\nb = a\nif b:\n    c = a + b\n    d = c\n",
]


def oracle_leaf_blocks(source, language="python"):
    """Nearest block-type ancestor per non-comment leaf, by identity."""
    grammar = get_grammar(language)
    tree = parse_to_cst(source, language)
    out = []

    def walk(node, current_block):
        if node.is_leaf:
            if node.type != "comment":
                out.append(current_block)
            return
        inner = node if node.type in grammar.blocks else current_block
        for child in node.children:
            walk(child, inner)

    walk(tree, None)
    return out


class TestVariablePair:
    def test_rejects_equal_positions(self):
        program = tokenize_program("x = y", "python")
        with pytest.raises(ValueError):
            VariablePair(program, 0, 0, 1)

    def test_rejects_out_of_range(self):
        program = tokenize_program("x = y", "python")
        with pytest.raises(ValueError):
            VariablePair(program, 0, 99, 1)

    def test_rejects_bad_label(self):
        program = tokenize_program("x = y", "python")
        with pytest.raises(ValueError):
            VariablePair(program, 0, 2, 2)


class TestIdentifierPositions:
    def test_frozen_simple_assignment(self):
        program = tokenize_program("x = y + 1", "python")
        # tokens: x = y + 1 -> identifiers at 0 and 2
        assert identifier_positions(program) == [0, 2]

    def test_keywords_and_literals_excluded(self):
        program = tokenize_program("if x:\n    return 1", "python")
        positions = identifier_positions(program)
        for i in positions:
            assert program.tokens[i] == "x"


class TestSamplePairs:
    def test_labels_match_identity_oracle(self):
        program = tokenize_program(SCOPED_SRC, "python")
        blocks = oracle_leaf_blocks(SCOPED_SRC)
        pairs = sample_pairs(program, budget=40, rng=random.Random(0))
        assert pairs, "expected a non-empty sample"
        for pair in pairs:
            expected = 1 if blocks[pair.pos_a] is blocks[pair.pos_b] else 0
            assert pair.label == expected

    def test_balanced(self):
        program = tokenize_program(SCOPED_SRC, "python")
        for budget in (2, 6, 10, 100):
            pairs = sample_pairs(program, budget, random.Random(1))
            pos = sum(p.label for p in pairs)
            neg = len(pairs) - pos
            assert abs(pos - neg) <= 1
            assert len(pairs) <= budget

    def test_deterministic_given_seed(self):
        program = tokenize_program(SCOPED_SRC, "python")
        a = sample_pairs(program, 10, random.Random(42))
        b = sample_pairs(program, 10, random.Random(42))
        assert [(p.pos_a, p.pos_b, p.label) for p in a] == [
            (p.pos_a, p.pos_b, p.label) for p in b
        ]

    def test_zero_budget_empty(self):
        program = tokenize_program(SCOPED_SRC, "python")
        assert sample_pairs(program, 0, random.Random(0)) == []

    def test_insufficient_identifiers(self):
        with pytest.raises(InsufficientIdentifiers):
            sample_pairs(tokenize_program("x = 1", "python"), 4, random.Random(0))
        with pytest.raises(InsufficientIdentifiers):
            sample_pairs(tokenize_program("1 + 2", "python"), 4, random.Random(0))

    def test_requires_block_ids(self):
        program = tokenize_program("x = y", "python")
        stripped = type(program)(
            tokens=program.tokens,
            paths=program.paths,
            language=program.language,
            source_digest=program.source_digest,
            block_ids=[],
        )
        with pytest.raises(ValueError):
            sample_pairs(stripped, 4, random.Random(0))

    def test_positions_are_identifiers(self):
        program = tokenize_program(SCOPED_SRC, "python")
        pairs = sample_pairs(program, 30, random.Random(3))
        id_positions = set(identifier_positions(program))
        for pair in pairs:
            assert pair.pos_a in id_positions
            assert pair.pos_b in id_positions


class TestScopeProbe:
    def test_zero_weights_score_exactly_half(self):
        probe = ScopeProbe(8)
        h = torch.randn(5, 8)
        p = score_pair(probe, h, torch.randn(5, 8))
        assert torch.equal(p, torch.full((5,), 0.5))

    def test_scaled_identity_on_unit_vector(self):
        for c in (-2.0, 0.5, 3.0):
            probe = ScopeProbe(4)
            with torch.no_grad():
                probe.W_s.copy_(c * torch.eye(4))
            h = torch.zeros(1, 4)
            h[0, 0] = 1.0
            p = score_pair(probe, h, h)
            expected = 1.0 / (1.0 + math.exp(-c))
            assert p.item() == pytest.approx(expected, abs=1e-7)

    def test_shape_mismatch(self):
        probe = ScopeProbe(4)
        with pytest.raises(ShapeMismatch):
            probe(torch.zeros(2, 4), torch.zeros(3, 4))


def probe_fixture(tmp_path, mode="full"):
    seed_everything(0)
    programs = [tokenize_program(src, "python") for src in PROBE_SOURCES]
    vocab = build_vocab(programs, max_size=128)
    node_vocab = NodeTypeVocabulary.from_programs(programs)
    config = HiTConfig(
        token_dim=16, hier_dim=8, seq_model_dim=16, heads=2,
        hier_layers=1, seq_layers=1, dec_layers=1, max_len=64,
        max_path_depth=8, num_categories=2, dropout=0.0,
        vocab_size=vocab.size, target_vocab_size=32,
        node_vocab_size=len(node_vocab.to_list()),
    )
    model = HiTClassifierModel(config)
    path = tmp_path / "clf.ckpt"
    save_checkpoint(
        path,
        config.to_dict(),
        dict(model.state_dict()),
        extra={
            "task": "classify",
            "vocab": vocab.to_list(),
            "node_vocab": node_vocab.to_list(),
        },
    )
    return path, programs, model, vocab, node_vocab, config


class TestRunProbe:
    def test_report_shape_and_determinism(self, tmp_path):
        path, programs, *_ = probe_fixture(tmp_path)
        first = run_probe(
            path, programs, mode="full", pairs_per_program=6, seed=0, epochs=5
        )
        second = run_probe(
            path, programs, mode="full", pairs_per_program=6, seed=0, epochs=5
        )
        assert set(first) == {"mode", "accuracy", "n_pairs"}
        assert first["mode"] == "full"
        assert 0.0 <= first["accuracy"] <= 1.0
        assert first["n_pairs"] > 0
        assert first == second

    def test_all_modes_run(self, tmp_path):
        path, programs, *_ = probe_fixture(tmp_path)
        for mode in ("full", "global", "local", "none"):
            report = run_probe(
                path, programs, mode=mode, pairs_per_program=4, seed=1, epochs=3
            )
            assert report["mode"] == mode

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(MissingCheckpoint):
            run_probe(tmp_path / "absent.ckpt", [], mode="full")

    def test_no_pairs_raises(self, tmp_path):
        path, _, *_ = probe_fixture(tmp_path)
        tiny = [tokenize_program("x = 1", "python")]
        with pytest.raises(InsufficientIdentifiers):
            run_probe(path, tiny, pairs_per_program=4)

    def test_probe_training_leaves_encoder_bitwise_unchanged(self, tmp_path):
        path, programs, model, vocab, node_vocab, config = probe_fixture(tmp_path)
        before = {
            k: v.detach().clone() for k, v in model.encoder.state_dict().items()
        }
        rng = random.Random(0)
        grouped = []
        for pi, program in enumerate(programs):
            for pair in sample_pairs(program, 6, rng):
                grouped.append((pi, pair))
        h_a, h_b, labels, _ = _pair_features(
            model.encoder, programs, grouped, vocab, node_vocab, config, "full"
        )
        probe = ScopeProbe(config.seq_model_dim)
        optimizer = torch.optim.AdamW(probe.parameters(), lr=1e-2)
        for _ in range(20):
            optimizer.zero_grad()
            loss = scope_pair_loss(probe(h_a, h_b), labels)
            loss.backward()
            optimizer.step()
        assert not torch.equal(probe.W_s, torch.zeros_like(probe.W_s))
        for k, v in model.encoder.state_dict().items():
            assert torch.equal(v, before[k]), k

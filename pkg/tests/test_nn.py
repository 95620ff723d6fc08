"""Neural substrate tests: masking, pooling, gradients, checkpoints."""

import numpy as np
import pytest
import torch

from hiercode.errors import AllMasked, MissingCheckpoint, ShapeMismatch
from hiercode.nn import (
    DecoderBlock,
    EncoderBlock,
    MultiHeadAttention,
    TransformerEncoder,
    finite_difference_check,
    load_checkpoint,
    masked_mean_pool,
    save_checkpoint,
    self_attention_encode,
)


def zero_residual_paths(block: EncoderBlock) -> None:
    """Zero the projections that feed the residual sums."""
    torch.nn.init.zeros_(block.attn.out_proj.weight)
    torch.nn.init.zeros_(block.attn.out_proj.bias)
    torch.nn.init.zeros_(block.ff[2].weight)
    torch.nn.init.zeros_(block.ff[2].bias)


class TestSelfAttentionEncode:
    def test_identity_with_zeroed_projections(self):
        torch.manual_seed(0)
        blocks = [EncoderBlock(16, 4, 32) for _ in range(3)]
        for b in blocks:
            zero_residual_paths(b)
        x = torch.randn(2, 5, 16)
        mask = torch.ones(2, 5, dtype=torch.bool)
        out = self_attention_encode(x, mask, blocks)
        assert torch.equal(out, x)

    def test_attention_rows_sum_to_one_over_unmasked(self):
        torch.manual_seed(1)
        attn = MultiHeadAttention(16, 4)
        x = torch.randn(3, 7, 16)
        mask = torch.rand(3, 7) > 0.3
        mask[:, 0] = True
        weights = attn.attention_weights(x, key_mask=mask)
        sums = weights.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6)
        masked_mass = weights[..., :][~mask[:, None, None, :].expand_as(weights)]
        assert (masked_mass == 0).all()

    def test_single_valid_position_gets_weight_one(self):
        torch.manual_seed(2)
        attn = MultiHeadAttention(8, 2)
        x = torch.randn(1, 4, 8)
        mask = torch.tensor([[True, False, False, False]])
        weights = attn.attention_weights(x, key_mask=mask)
        assert torch.equal(weights[..., 0], torch.ones_like(weights[..., 0]))

    def test_masked_positions_cannot_change_unmasked_outputs(self):
        torch.manual_seed(3)
        blocks = [EncoderBlock(8, 2, 16).double() for _ in range(2)]
        x = torch.randn(2, 6, 8, dtype=torch.float64)
        mask = torch.tensor([[True] * 4 + [False] * 2, [True] * 3 + [False] * 3])
        out1 = self_attention_encode(x, mask, blocks)
        x2 = x.clone()
        x2[~mask] += torch.randn_like(x2[~mask]) * 100.0
        out2 = self_attention_encode(x2, mask, blocks)
        assert (out1[mask] - out2[mask]).abs().max().item() < 1e-12

    def test_shape_mismatch_rejected(self):
        blocks = [EncoderBlock(8, 2, 16)]
        with pytest.raises(ShapeMismatch):
            self_attention_encode(torch.randn(2, 6), None, blocks)
        with pytest.raises(ShapeMismatch):
            self_attention_encode(torch.randn(2, 6, 8), torch.ones(2, 5, dtype=torch.bool), blocks)

    def test_forward_deterministic_given_seed(self):
        def run():
            torch.manual_seed(7)
            torch.set_num_threads(1)
            blocks = [EncoderBlock(16, 4, 32) for _ in range(2)]
            x = torch.randn(2, 5, 16)
            return self_attention_encode(x, torch.ones(2, 5, dtype=torch.bool), blocks)

        a, b = run(), run()
        assert torch.equal(a, b)

    def test_encoder_wrapper_applies_final_norm(self):
        torch.manual_seed(4)
        enc = TransformerEncoder(16, 4, 32, layers=2)
        x = torch.randn(2, 5, 16)
        out = enc(x, torch.ones(2, 5, dtype=torch.bool))
        assert out.shape == x.shape


class TestMaskedMeanPool:
    def test_single_valid_position(self):
        H = torch.randn(1, 3, 4)
        mask = torch.tensor([[False, True, False]])
        assert torch.equal(masked_mean_pool(H, mask)[0], H[0, 1])

    def test_two_valid_positions_average(self):
        H = torch.randn(1, 4, 8, dtype=torch.float64)
        mask = torch.tensor([[True, True, False, False]])
        expected = (H[0, 0] + H[0, 1]) / 2
        assert torch.allclose(masked_mean_pool(H, mask)[0], expected)

    def test_invariant_to_padding_length(self):
        torch.manual_seed(5)
        H = torch.randn(2, 3, 4, dtype=torch.float64)
        mask = torch.ones(2, 3, dtype=torch.bool)
        base = masked_mean_pool(H, mask)
        H_pad = torch.cat([H, torch.randn(2, 5, 4, dtype=torch.float64)], dim=1)
        mask_pad = torch.cat([mask, torch.zeros(2, 5, dtype=torch.bool)], dim=1)
        assert torch.allclose(masked_mean_pool(H_pad, mask_pad), base)

    def test_all_masked_rejected(self):
        with pytest.raises(AllMasked):
            masked_mean_pool(torch.randn(1, 3, 4), torch.zeros(1, 3, dtype=torch.bool))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            masked_mean_pool(torch.randn(1, 3, 4), torch.ones(1, 4, dtype=torch.bool))


class TestDecoderBlock:
    def test_causal_future_positions_do_not_leak(self):
        torch.manual_seed(6)
        block = DecoderBlock(8, 2, 16).double()
        memory = torch.randn(1, 5, 8, dtype=torch.float64)
        mmask = torch.ones(1, 5, dtype=torch.bool)
        x = torch.randn(1, 4, 8, dtype=torch.float64)
        out1 = block(x, memory, mmask)
        x2 = x.clone()
        x2[0, 3] += 100.0
        out2 = block(x2, memory, mmask)
        assert (out1[0, :3] - out2[0, :3]).abs().max().item() < 1e-12
        assert (out1[0, 3] - out2[0, 3]).abs().max().item() > 1e-6

    def test_cross_attention_sees_memory(self):
        torch.manual_seed(7)
        block = DecoderBlock(8, 2, 16).double()
        x = torch.randn(1, 2, 8, dtype=torch.float64)
        m1 = torch.randn(1, 3, 8, dtype=torch.float64)
        m2 = m1 + 1.0
        mask = torch.ones(1, 3, dtype=torch.bool)
        assert not torch.allclose(block(x, m1, mask), block(x, m2, mask))


class TestGradientCheck:
    def _check(self, fn, params, **kw):
        err = finite_difference_check(fn, params, **kw)
        assert err < 1e-4, f"relative error {err}"

    def test_linear_layer(self):
        torch.manual_seed(10)
        layer = torch.nn.Linear(6, 4).double()
        x = torch.randn(3, 6, dtype=torch.float64)
        self._check(lambda: layer(x).square().sum(), layer.parameters())

    def test_layer_norm(self):
        torch.manual_seed(11)
        ln = torch.nn.LayerNorm(6).double()
        x = torch.randn(4, 6, dtype=torch.float64, requires_grad=True)
        self._check(lambda: ln(x).square().sum(), list(ln.parameters()) + [x])

    def test_attention(self):
        torch.manual_seed(12)
        attn = MultiHeadAttention(8, 2).double()
        x = torch.randn(2, 4, 8, dtype=torch.float64)
        mask = torch.tensor([[True, True, True, False], [True, True, False, False]])
        self._check(
            lambda: attn(x, key_mask=mask).square().sum(),
            attn.parameters(),
            max_elements_per_tensor=8,
        )

    def test_encoder_block(self):
        torch.manual_seed(13)
        block = EncoderBlock(8, 2, 16).double()
        x = torch.randn(2, 3, 8, dtype=torch.float64)
        mask = torch.ones(2, 3, dtype=torch.bool)
        self._check(
            lambda: block(x, mask).square().sum(),
            block.parameters(),
            max_elements_per_tensor=6,
        )

    def test_decoder_block(self):
        torch.manual_seed(14)
        block = DecoderBlock(8, 2, 16).double()
        x = torch.randn(1, 3, 8, dtype=torch.float64)
        memory = torch.randn(1, 4, 8, dtype=torch.float64)
        mask = torch.ones(1, 4, dtype=torch.bool)
        self._check(
            lambda: block(x, memory, mask).square().sum(),
            block.parameters(),
            max_elements_per_tensor=4,
        )

    def test_masked_mean_pool_gradient(self):
        torch.manual_seed(15)
        H = torch.randn(2, 4, 6, dtype=torch.float64, requires_grad=True)
        mask = torch.tensor([[True, True, False, False], [True, True, True, False]])
        self._check(lambda: masked_mean_pool(H, mask).square().sum(), [H])

    def test_constant_loss_zero_gradient(self):
        w = torch.randn(3, 3, dtype=torch.float64, requires_grad=True)
        err = finite_difference_check(lambda: (w * 0.0).sum(), [w])
        assert err == 0.0

    def test_rejects_nonscalar_loss(self):
        w = torch.randn(3, dtype=torch.float64, requires_grad=True)
        with pytest.raises(ValueError):
            finite_difference_check(lambda: w * 2, [w])


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        torch.manual_seed(20)
        state = {
            "enc.weight": torch.randn(4, 8),
            "enc.bias": torch.randn(4),
            "steps": torch.arange(10),
            "flag": torch.tensor([True, False]),
        }
        config = {"seq_model_dim": 8, "heads": 2}
        extra = {"classes": [0, 1, 2]}
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, config, state, extra)
        config2, state2, extra2 = load_checkpoint(path)
        assert config2 == config
        assert extra2 == extra
        assert set(state2) == set(state)
        for name in state:
            assert torch.equal(state[name], state2[name]), name
            assert state[name].dtype == state2[name].dtype

    def test_shape_validation(self, tmp_path):
        import json
        import zipfile

        path = tmp_path / "bad.ckpt"
        save_checkpoint(path, {}, {"w": torch.randn(3, 3)})
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            blob = zf.read("tensors/w.bin")
        manifest["tensors"]["w"]["shape"] = [4, 4]
        bad = tmp_path / "tampered.ckpt"
        with zipfile.ZipFile(bad, "w") as zf:
            zf.writestr("manifest.json", json.dumps(manifest))
            zf.writestr("tensors/w.bin", blob)
        with pytest.raises(ShapeMismatch):
            load_checkpoint(bad)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingCheckpoint):
            load_checkpoint(tmp_path / "nope.ckpt")

    def test_float64_and_int_payloads_survive(self, tmp_path):
        state = {"w64": torch.randn(5, dtype=torch.float64), "i32": torch.zeros(3, dtype=torch.int32)}
        path = tmp_path / "dtypes.ckpt"
        save_checkpoint(path, {}, state)
        _, loaded, _ = load_checkpoint(path)
        assert loaded["w64"].dtype == torch.float64
        assert loaded["i32"].dtype == torch.int32
        np.testing.assert_array_equal(loaded["w64"].numpy(), state["w64"].numpy())

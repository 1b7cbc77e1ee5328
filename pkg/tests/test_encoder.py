import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evsc.embed.state import clip_states
from evsc.model.encoder import (VARIANTS, EncoderConfig, EventEncoder, TokenSequence, VerbHead, classify_verb,
                                topk_verbs, variant_flags)
from evsc.model.verb import VerbModel
from evsc.synth import render_grid_features
from evsc.tensor import ParamStore, Tensor, cross_entropy, finite_diff_check, finite_diff_check_params, reshape

from toy import toy_config, toy_states


def _encoder(seed=0, **kw):
    params = ParamStore(seed)
    return EventEncoder(toy_config(**kw), params), params


def _random_tokens(rng, n_objects, d_m=16, oie=True):
    kinds = ["video"] + ["object"] * n_objects + (["interaction"] if oie else [])
    return TokenSequence(Tensor(rng.normal(size=(len(kinds), d_m))), kinds, list(range(n_objects)))


class TestAssembly:
    def test_lengths(self):
        enc, _ = _encoder()
        g = np.zeros(12)
        assert len(enc.assemble_tokens(g, [], None).kinds) == 1
        m = [Tensor(np.ones(28)) for _ in range(8)]
        toks = enc.assemble_tokens(g, m, Tensor(np.ones(28)))
        assert toks.kinds == ["video"] + ["object"] * 8 + ["interaction"]
        assert toks.vectors.shape == (10, 16)

    def test_truncates_to_o_max(self):
        enc, _ = _encoder(o_max=2)
        toks = enc.assemble_tokens(np.zeros(12), [Tensor(np.ones(28))] * 5, None, [4, 3, 2, 1, 0])
        assert toks.labels == ["video", "object4", "object3"]

    def test_zero_projections_give_zero_tokens(self):
        enc, params = _encoder()
        for name in params.names():
            if name.startswith(("enc.proj_video", "enc.proj_object", "enc.proj_inter")):
                params[name].data[...] = 0
        rng = np.random.default_rng(0)
        toks = enc.assemble_tokens(rng.normal(size=12), [Tensor(rng.normal(size=28))] * 3,
                                   Tensor(rng.normal(size=28)))
        assert not toks.vectors.data.any()

    def test_interaction_rejected_without_oie(self):
        enc, _ = _encoder(variant="OSE-pixel/disp+OME")
        with pytest.raises(ValueError, match="no interaction token"):
            enc.assemble_tokens(np.zeros(12), [], Tensor(np.ones(28)))


class TestEncodeEvent:
    def test_single_token_attention(self):
        enc, _ = _encoder()
        e, att = enc.encode_event(_random_tokens(np.random.default_rng(0), 0, oie=False))
        assert e.shape == (12,)
        assert att.tolist() == [[1.0]]

    def test_attention_rows_sum_to_one(self):
        enc, _ = _encoder()
        rng = np.random.default_rng(1)
        for _ in range(100):
            _, att = enc.encode_event(_random_tokens(rng, int(rng.integers(0, 9))))
            np.testing.assert_allclose(att.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_object_permutation_invariance(self):
        enc, _ = _encoder()
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(2, 9))
            toks = _random_tokens(rng, n)
            perm = np.concatenate([[0], 1 + rng.permutation(n), [n + 1]])
            shuffled = TokenSequence(Tensor(toks.vectors.data[perm]), toks.kinds, toks.object_ids)
            e1, a1 = enc.encode_event(toks)
            e2, a2 = enc.encode_event(shuffled)
            np.testing.assert_allclose(e1.data, e2.data, rtol=0, atol=1e-9)
            np.testing.assert_allclose(np.sort(a1[0]), np.sort(a2[0]), rtol=0, atol=1e-9)

    def test_identity_ablated_layer(self):
        """With attention values and the FFN output zeroed, only the two layer norms act."""
        enc, params = _encoder()
        for name in params.names():
            if name.startswith(("enc.layer.attn.v.", "enc.layer.attn.o.", "enc.layer.ffn.l2.")):
                params[name].data[...] = 0
        rng = np.random.default_rng(3)
        toks = _random_tokens(rng, 3)
        e, _ = enc.encode_event(toks)

        def ln(x):
            return (x - x.mean()) / np.sqrt(x.var() + 1e-5)

        x0 = toks.vectors.data[0]
        w, b = params["enc.proj_out.W"].data, params["enc.proj_out.b"].data
        np.testing.assert_allclose(e.data, w @ ln(ln(x0)) + b, rtol=0, atol=1e-12)


class TestClipEncoding:
    @pytest.mark.parametrize("variant", VARIANTS)
    @pytest.mark.parametrize("aggregator", ["mean", "lstm"])
    def test_event_shape_for_every_variant(self, variant, aggregator):
        enc, _ = _encoder(variant=variant, aggregator=aggregator)
        out = enc.encode_clip(toy_states())
        assert out.e.shape == (12,)
        assert (out.interaction is not None) == variant_flags(variant)[1]

    def test_motion_permutation(self):
        enc, _ = _encoder()
        states = toy_states(n_objects=4)
        base = enc.encode_clip(states).e.data
        perm = [2, 0, 3, 1]
        shuffled = dataclasses.replace(states, objects=[states.objects[i] for i in perm], object_ids=perm)
        np.testing.assert_allclose(enc.encode_clip(shuffled).e.data, base, rtol=0, atol=1e-9)

    def test_truncation_ignores_low_confidence_object(self, small_clips, small_packs):
        model = VerbModel(EncoderConfig(o_max=2), seed=0)
        for clip in small_clips[:10]:
            pack = small_packs[clip.clip_id]
            extra = dataclasses.replace(clip.objects[1], object_id=9, detector_confidence=0.01)
            bigger = dataclasses.replace(clip, objects=clip.objects + [extra])
            a = model.encode(clip_states(clip, pack, o_max=2)).e.data
            b = model.encode(clip_states(bigger, pack, o_max=2)).e.data
            assert np.array_equal(a, b)

    def test_pixel_variant_ignores_coordinates(self):
        enc, _ = _encoder(variant="OSE-pixel+OME")
        states = toy_states()
        moved = toy_states()
        for per in moved.objects:
            for seq in per.values():
                seq.coords = np.random.default_rng(9).uniform(size=seq.coords.shape)
        assert np.array_equal(enc.encode_clip(states).e.data, enc.encode_clip(moved).e.data)


class TestVerbHead:
    def test_bottleneck(self):
        params = ParamStore(0)
        VerbHead(params, 40, 8)
        assert params["head.W1"].shape == (20, 40) and params["head.W2"].shape == (8, 20)

    def test_zero_weights_uniform(self):
        params = ParamStore(0)
        head = VerbHead(params, 12, 8)
        for name in params.names():
            params[name].data[...] = 0
        p = classify_verb(Tensor(np.random.default_rng(0).normal(size=12)), head).data
        np.testing.assert_allclose(p, 1 / 8, rtol=0, atol=1e-15)
        loss = cross_entropy(reshape(head.logits(Tensor(np.ones(12))), (1, 8)), [3])
        assert abs(loss.item() - np.log(8)) <= 1e-9

    def test_head_gradients(self):
        params = ParamStore(0)
        head = VerbHead(params, 12, 8)
        e = Tensor(np.random.default_rng(0).normal(size=(5, 12)))
        errs = finite_diff_check_params(lambda: cross_entropy(head.logits(e), [0, 3, 7, 1, 1]), params)
        assert max(errs.values()) <= 1e-6

    def test_head_forward_gradient_in_input(self):
        params = ParamStore(0)
        head = VerbHead(params, 12, 8)
        assert finite_diff_check(lambda e: cross_entropy(head.logits(e), [2, 5]),
                                 Tensor(np.random.default_rng(1).normal(size=(2, 12)))) <= 1e-4


class TestTopK:
    def test_examples(self):
        assert topk_verbs(np.eye(8)[5], 1) == [5]
        assert topk_verbs(np.full(8, 1 / 8), 3) == [0, 1, 2]
        assert topk_verbs(np.array([0.1, 0.5, 0.4]), 2) == [1, 2]

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            topk_verbs(np.ones(3) / 3, 4)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 5), min_size=1, max_size=10), st.data())
    def test_descending_with_id_tiebreak(self, ints, data):
        probs = np.array(ints, dtype=float)
        k = data.draw(st.integers(1, len(ints)))
        top = topk_verbs(probs, k)
        keys = [(-probs[i], i) for i in top]
        assert keys == sorted(keys)
        assert all((-probs[j], j) > keys[-1] for j in range(len(ints)) if j not in top)


class TestVerbModel:
    def test_save_load(self, tmp_path):
        model = VerbModel(toy_config(), seed=3)
        model.save(tmp_path / "m")
        back = VerbModel.load(tmp_path / "m")
        states = toy_states()
        assert np.array_equal(model.predict_probs(states), back.predict_probs(states))

    def test_load_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="not a verb model"):
            VerbModel.load(tmp_path)

    def test_real_clip_probabilities(self, small_clips):
        clip = small_clips[0]
        model = VerbModel(EncoderConfig(), seed=0)
        p = model.predict_probs(clip_states(clip, render_grid_features(clip)))
        assert p.shape == (8,) and abs(p.sum() - 1) <= 1e-12

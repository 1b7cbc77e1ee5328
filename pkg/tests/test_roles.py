import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evsc.model.encoder import EncoderConfig
from evsc.model.roles import (CachedClip, CachedVideo, RoleConfig, RoleDecoder, RoleVocab, augmented_embedding,
                              cache_video, greedy_decode, parse_decoded, read_predictions, serialize_target,
                              teacher_forced_loss, write_predictions, prediction_records)
from evsc.model.verb import VerbModel
from evsc.harness.train import train_role
from evsc.synth import ROLES, default_ontology
from evsc.synth.generate import EventAnnotation
from evsc.synth.ontology import PHRASE_TOKENS
from evsc.tensor import finite_diff_check_params

from toy import toy_config, toy_states

TOY_ROLE = RoleConfig(d_event=12, d_object=28, d_m=8, heads=2, ffn_mult=2, max_len=10)


@pytest.fixture(scope="module")
def vocab():
    return RoleVocab()


def cached_video(rng, d_event=12, d_object=28, n_objects=2, oie=True, vid="v0"):
    clips = [CachedClip(f"{vid}_c{i + 1}", rng.normal(size=d_event), rng.normal(size=(n_objects, d_object)),
                        rng.normal(size=d_object) if oie else None) for i in range(5)]
    return CachedVideo(vid, clips, True, oie)


def annotation(verb, **roles):
    return EventAnnotation(verb, [(r, roles[r]) for r in ROLES if r in roles])


annotations = st.builds(
    lambda verb, picks, phrases: EventAnnotation(
        verb, [(r, " ".join(p)) for r, keep, p in zip(ROLES, picks, phrases) if keep]),
    st.integers(0, 7),
    st.lists(st.booleans(), min_size=5, max_size=5),
    st.lists(st.lists(st.sampled_from(PHRASE_TOKENS), min_size=1, max_size=3), min_size=5, max_size=5),
)


class TestVocab:
    def test_layout(self, vocab):
        assert vocab.tokens[:3] == ["<pad>", "<bos>", "<eos>"]
        assert len(vocab) == 3 + 8 + 5 + 40
        assert RoleVocab().ids == vocab.ids

    def test_out_of_vocab(self, vocab):
        with pytest.raises(ValueError, match="not in the role vocabulary"):
            serialize_target(annotation(0, Arg0="unicorn"), vocab)


class TestSerialize:
    def test_verb_only(self, vocab):
        assert serialize_target(annotation(2), vocab) == [vocab.bos, vocab.verb_id(2), vocab.eos]

    def test_agent_target_sequence(self, vocab):
        seq = serialize_target(annotation(0, Arg0="gray bull", Arg1="man"), vocab)
        assert vocab.decode(seq) == ["<bos>", "approach-hit", "[Arg0]", "gray", "bull", "[Arg1]", "man", "<eos>"]

    def test_canonical_order_regardless_of_input(self, vocab):
        ann = EventAnnotation(0, [("AScn", "in the park"), ("Arg0", "man")])
        assert vocab.decode(serialize_target(ann, vocab))[2:5] == ["[Arg0]", "man", "[AScn]"]

    @settings(max_examples=500, deadline=None)
    @given(annotations)
    def test_round_trip(self, ann):
        vocab = RoleVocab()
        seq = serialize_target(ann, vocab)
        parsed = parse_decoded(seq[2:], vocab)
        assert parsed == {r: ann.role_dict().get(r, "") for r in ROLES}


class TestParse:
    def test_examples(self, vocab):
        assert parse_decoded("[Arg0] a b [Arg1] c".split(), vocab)["Arg0"] == "a b"
        assert parse_decoded("[Arg0] a b [Arg1] c".split(), vocab)["Arg1"] == "c"
        assert parse_decoded([], vocab) == {r: "" for r in ROLES}
        assert parse_decoded("[Arg0] x [Arg0] y".split(), vocab)["Arg0"] == "x"

    def test_prefix_ignored_and_eos_stops(self, vocab):
        out = parse_decoded("man [Arg1] ball <eos> [Arg0] dog".split(), vocab)
        assert out == {"Arg0": "", "Arg1": "ball", "Arg2": "", "ALoc": "", "AScn": ""}

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-3, 70), max_size=30))
    def test_never_raises(self, ids):
        vocab = RoleVocab()
        assert set(parse_decoded(ids, vocab)) == set(ROLES)


class TestContextualize:
    def _clip(self, motions, inter):
        return CachedClip("c", np.arange(3.0), np.asarray(motions, dtype=float).reshape(-1, 2),
                          None if inter is None else np.asarray(inter, dtype=float))

    def test_zero_inputs(self):
        out = augmented_embedding(self._clip([[0, 0]], [0, 0]), True)
        assert out.tolist() == [0, 1, 2, 0, 0]

    def test_single_object_without_oie(self):
        out = augmented_embedding(self._clip([[3, 4]], [9, 9]), False)
        assert out[3:].tolist() == [3, 4]

    def test_two_objects_with_oie(self):
        m0, m1, i = np.array([1.0, 2.0]), np.array([4.0, -1.0]), np.array([0.5, 0.25])
        out = augmented_embedding(self._clip([m0, m1], i), True)
        np.testing.assert_allclose(out[3:], (m0 + m1 + i) / 3, rtol=0, atol=1e-12)

    def test_variant_consistency(self):
        """Without the interaction term the mean equals the with-term mean at i = 0, rescaled."""
        rng = np.random.default_rng(0)
        m = rng.normal(size=(3, 4))
        with_zero = augmented_embedding(CachedClip("c", np.zeros(2), m, np.zeros(4)), True)[2:]
        without = augmented_embedding(CachedClip("c", np.zeros(2), m, rng.normal(size=4)), False)[2:]
        np.testing.assert_allclose(without, with_zero * 4 / 3, rtol=0, atol=1e-12)

    def test_five_clip_rule(self, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab)
        video = cached_video(np.random.default_rng(0))
        video.clips = video.clips[:4]
        with pytest.raises(ValueError, match="expected 5"):
            dec.contextualize(video)


class TestDecoder:
    def _targets(self, vocab, rng):
        anns = [annotation(int(rng.integers(8)), Arg0="gray bull", Arg1="man", AScn="in the park")
                for _ in range(5)]
        return anns, [serialize_target(a, vocab) for a in anns]

    def test_uniform_decoder_loss(self, vocab):
        dec = RoleDecoder(RoleConfig(), vocab)
        dec.params["dec.out.W"].data[...] = 0
        rng = np.random.default_rng(0)
        _, targets = self._targets(vocab, rng)
        loss = teacher_forced_loss(dec, cached_video(rng, 40, 296), targets)
        assert abs(loss.item() - np.log(len(vocab))) <= 0.05

    def test_pad_positions_do_not_count(self, vocab):
        dec = RoleDecoder(RoleConfig(d_event=12, d_object=28, d_m=8, heads=2, ffn_mult=2), vocab)
        rng = np.random.default_rng(1)
        video = cached_video(rng)
        _, targets = self._targets(vocab, rng)
        a = teacher_forced_loss(dec, video, targets).item()
        longer = [targets[0] + [vocab.pad] * 4] + targets[1:]
        assert abs(teacher_forced_loss(dec, video, longer).item() - a) <= 1e-12

    def test_gradients(self, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab, seed=3)
        rng = np.random.default_rng(2)
        video = cached_video(rng)
        _, targets = self._targets(vocab, rng)
        errs = finite_diff_check_params(lambda: teacher_forced_loss(dec, video, targets), dec.params)
        assert max(errs.values()) <= 1e-4

    def test_causality(self, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab)
        rng = np.random.default_rng(3)
        ctx = dec.contextualize(cached_video(rng))
        inputs = rng.integers(3, len(vocab), size=(5, 8))
        base = dec.logits(ctx, inputs).data
        for t in range(7):
            changed = inputs.copy()
            changed[:, t + 1:] = rng.integers(3, len(vocab), size=(5, 7 - t))
            np.testing.assert_array_equal(dec.logits(ctx, changed).data[:, : t + 1], base[:, : t + 1])

    def test_rigged_logit_repeats_until_max_len(self, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab)
        dec.params["dec.out.W"].data[...] = 0
        dec.params["dec.out.b"].data[vocab.encode("ball")] = 10.0
        out = greedy_decode(dec, cached_video(np.random.default_rng(4)), [0, 1, 2, 3, 4], max_len=10)
        for k, clip in enumerate(out):
            assert clip.truncated
            assert clip.tokens == [vocab.verb_id(k)] + [vocab.encode("ball")] * 9

    def test_greedy_is_deterministic(self, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab, seed=5)
        video = cached_video(np.random.default_rng(5))
        a = greedy_decode(dec, video, [0] * 5)
        b = greedy_decode(dec, video, [0] * 5)
        assert [c.tokens for c in a] == [c.tokens for c in b]

    def test_unfrozen_flag_refused(self, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab)
        video = cached_video(np.random.default_rng(6))
        video.encoder_frozen = False
        with pytest.raises(RuntimeError, match="not frozen"):
            teacher_forced_loss(dec, video, [[vocab.bos, vocab.eos]] * 5)

    def test_cache_refuses_unfrozen_model(self):
        model = VerbModel(toy_config(), seed=0)
        with pytest.raises(RuntimeError, match="frozen"):
            cache_video(model, "v", [toy_states(i) for i in range(5)])
        model.freeze()
        with pytest.raises(ValueError, match="expected 5"):
            cache_video(model, "v", [toy_states(i) for i in range(4)])
        video = cache_video(model, "v", [toy_states(i) for i in range(5)])
        assert video.encoder_frozen and video.clips[0].motions.shape == (2, 28)

    def test_loss_falls_on_average(self, vocab):
        rng = np.random.default_rng(7)
        dec = RoleDecoder(TOY_ROLE, vocab, seed=1)
        videos, targets = [], []
        for v in range(10):
            videos.append(cached_video(rng, vid=f"v{v}"))
            targets.append(self._targets(vocab, rng)[1])
        curve = train_role(dec, videos, targets, lr=1e-3, steps=50)
        first, last = np.mean(curve.steps[:10]), np.mean(curve.steps[-10:])
        slope = np.polyfit(np.arange(50), curve.steps, 1)[0]
        assert last < first and slope < 0

    def test_save_load(self, tmp_path, vocab):
        dec = RoleDecoder(TOY_ROLE, vocab, seed=9)
        dec.save(tmp_path)
        back = RoleDecoder.load(tmp_path, vocab)
        video = cached_video(np.random.default_rng(8))
        assert [c.tokens for c in greedy_decode(dec, video, [1] * 5)] == \
               [c.tokens for c in greedy_decode(back, video, [1] * 5)]


def test_predictions_jsonl_round_trip(tmp_path, vocab):
    dec = RoleDecoder(TOY_ROLE, vocab)
    video = cached_video(np.random.default_rng(0))
    decoded = greedy_decode(dec, video, [0, 1, 2, 3, 4])
    records = prediction_records(video, [1, 2, 3, 4, 5], [0, 1, 2, 3, 4], decoded, vocab)
    write_predictions(tmp_path / "p.jsonl", records)
    back = read_predictions(tmp_path / "p.jsonl")
    assert back == records
    assert set(back[0]) == {"video_id", "clip_index", "verb", "roles"}
    assert back[2]["verb"] == default_ontology().names[2]

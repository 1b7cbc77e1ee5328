import dataclasses
import hashlib
import math
from collections import Counter

import numpy as np
import pytest

from evsc.embed.geometry import project_bbox_to_grid
from evsc.synth import (DatasetConfig, Dims, EVGFError, ROLES, default_ontology, generate_dataset,
                        read_dataset, read_evgf, render_grid_features, write_dataset, write_evgf)
from evsc.synth.generate import ClipRecord, EventAnnotation, ObjectScript
from evsc.synth.io import clip_from_json, clip_to_json


def _script(oid=0, texture=None, keyframes=None, size=(12.0, 12.0), conf=0.9, d=32):
    sig = np.zeros(d)
    sig[oid % d] = 1.0
    return ObjectScript(
        object_id=oid, noun_phrase="man", t_start=0, t_end=15,
        keyframes=keyframes or [[0.0, 20.0, 30.0], [15.0, 20.0, 30.0]],
        size=size, texture=texture or {"mode": "static"}, base_signature=sig.tolist(),
        detector_confidence=conf)


def _clip(objects, sigma=0.0):
    return ClipRecord(clip_id="x_c1", video_id="x", clip_index=1, split="train", dims=Dims(),
                      sigma_bg=sigma, noise_seed=3, objects=objects,
                      annotation=EventAnnotation(verb=7, roles=[]), gt_verbs=[7], references={})


class TestGenerate:
    def test_balanced_counts(self):
        clips = generate_dataset(DatasetConfig(clips_per_verb=25, val_clips_per_verb=0, seed=1))
        assert len(clips) == 200
        assert set(Counter(c.annotation.verb for c in clips).values()) == {25}

    def test_five_clips_per_video(self, small_clips):
        per_video = Counter(c.video_id for c in small_clips)
        assert set(per_video.values()) == {5}
        for c in small_clips:
            assert c.clip_id == f"{c.video_id}_c{c.clip_index}"

    def test_same_seed_byte_identical(self, tmp_path, small_config):
        def digest(root):
            h = hashlib.sha256()
            for p in sorted(root.rglob("*")):
                if p.is_file():
                    h.update(p.relative_to(root).as_posix().encode())
                    h.update(p.read_bytes())
            return h.hexdigest()

        cfg = dataclasses.replace(small_config, clips_per_verb=5, val_clips_per_verb=5)
        a = write_dataset(tmp_path / "a", generate_dataset(cfg))
        b = write_dataset(tmp_path / "b", generate_dataset(cfg))
        assert (a / "clips.jsonl").read_bytes() == (b / "clips.jsonl").read_bytes()
        assert digest(a) == digest(b)

    def test_different_seed_differs(self, small_config):
        a = generate_dataset(dataclasses.replace(small_config, clips_per_verb=5, val_clips_per_verb=0))
        b = generate_dataset(dataclasses.replace(small_config, clips_per_verb=5, val_clips_per_verb=0, seed=8))
        assert [clip_to_json(c) for c in a] != [clip_to_json(c) for c in b]

    def test_verb_decidability(self, small_clips):
        onto = default_ontology()
        for c in small_clips:
            assert onto.classify(c.objects) == [c.annotation.verb], c.clip_id

    def test_roles_follow_verb_role_set(self, small_clips):
        onto = default_ontology()
        for c in small_clips:
            names = [r for r, _ in c.annotation.roles]
            assert set(names) <= set(onto.role_set(c.annotation.verb))
            assert len(names) >= 3
            assert names == [r for r in ROLES if r in names]

    def test_script_invariants(self, small_clips):
        for c in small_clips:
            d = c.dims
            sigs = [np.asarray(o.base_signature) for o in c.objects]
            for i in range(len(sigs)):
                assert abs(np.linalg.norm(sigs[i]) - 1) < 1e-12
                for j in range(i):
                    assert sigs[i] @ sigs[j] < 0.5
            for o in c.objects:
                assert 0 <= o.t_start <= o.t_end < d.F2
                for t in range(o.t_start, o.t_end + 1):
                    b = o.bbox(t)
                    assert 0 <= b.x0 < b.x1 <= d.W and 0 <= b.y0 < b.y1 <= d.H
            confs = [o.detector_confidence for o in c.ranked_objects()]
            assert all(0 < x <= 1 for x in confs) and confs == sorted(confs, reverse=True)

    def test_approach_hit_geometry(self, small_clips):
        """Independent re-check: centre gap shrinks until the boxes first overlap."""
        v = default_ontology().index("approach-hit")
        seen = 0
        for c in small_clips:
            if c.annotation.verb != v:
                continue
            a, b = c.ranked_objects()[:2]
            overlap = []
            gaps = []
            for t in range(c.dims.F2):
                ba, bb = a.bbox(t), b.bbox(t)
                overlap.append(min(ba.x1, bb.x1) > max(ba.x0, bb.x0) and min(ba.y1, bb.y1) > max(ba.y0, bb.y0))
                gaps.append(math.dist(((ba.x0 + ba.x1) / 2, (ba.y0 + ba.y1) / 2),
                                      ((bb.x0 + bb.x1) / 2, (bb.y0 + bb.y1) / 2)))
            assert not overlap[0] and any(overlap)
            first = overlap.index(True)
            assert all(gaps[t + 1] < gaps[t] for t in range(first))
            seen += 1
        assert seen == 30

    def test_channel_separation_pairs(self):
        onto = default_ontology()
        report = onto.check_channel_separation()
        assert report["displacement"] and report["texture"] and report["interaction"]
        for a, b in report["texture"]:
            assert onto.verbs[onto.index(a)].trajectory_program == onto.verbs[onto.index(b)].trajectory_program
        for a, b in report["displacement"]:
            assert onto.verbs[onto.index(a)].texture_program == onto.verbs[onto.index(b)].texture_program

    def test_near_pairs_do_not_share_grid_columns(self, small_clips):
        v = default_ontology().index("chew-interaction-oscillate")
        for c in (c for c in small_clips if c.annotation.verb == v):
            d = c.dims
            a, b = (project_bbox_to_grid(o.bbox(0), d.W, d.H, d.Wg, d.Hg) for o in c.ranked_objects()[:2])
            assert a.x1 <= b.x0 or b.x1 <= a.x0

    def test_val_gt_carries_two_synonyms(self, small_clips):
        onto = default_ontology()
        for c in small_clips:
            if c.split == "val":
                assert c.gt_verbs == [c.annotation.verb, *onto.synonym_ids(c.annotation.verb)]
                assert all(len(refs) == 3 for refs in c.references.values())
            else:
                assert c.gt_verbs == [c.annotation.verb]

    def test_unsatisfiable_dims_name_verb(self):
        cfg = DatasetConfig(clips_per_verb=5, val_clips_per_verb=0, dims=Dims(Wg=1, Hg=1))
        with pytest.raises(ValueError, match="verb"):
            generate_dataset(cfg)

    def test_bad_frame_counts(self):
        with pytest.raises(ValueError, match="F1 < F2"):
            Dims(F1=16, F2=4).validate()


class TestRender:
    def test_empty_scene_is_zero(self):
        pack = render_grid_features(_clip([]))
        assert pack.slow.shape == (4, 8, 8, 32) and pack.fast.shape == (16, 8, 8, 8)
        assert not pack.slow.any() and not pack.fast.any()

    def test_static_object_constant_in_box(self):
        pack = render_grid_features(_clip([_script()]))
        for grid in (pack.slow, pack.fast):
            assert np.array_equal(grid, np.broadcast_to(grid[0], grid.shape))
            assert grid[0].any()

    def test_oscillate_trace(self):
        tex = {"mode": "oscillate", "omega": 1.3, "amplitude": 0.9}
        clip = _clip([_script(texture=tex)])
        pack = render_grid_features(clip)
        obj = clip.objects[0]
        b = project_bbox_to_grid(obj.bbox(0), 64, 64, 8, 8)
        for t in range(16):
            cell_mean = pack.fast[t, int(b.x0):int(b.x1), int(b.y0):int(b.y1), 0].mean()
            assert abs(cell_mean - 0.9 * math.sin(1.3 * t)) <= 1e-9

    def test_overlap_superposes(self):
        a = _script(0)
        b = _script(1, conf=0.5)
        pack = render_grid_features(_clip([a, b]))
        cell = pack.fast[0, 2, 3]
        assert cell[0] == 1.0 and cell[1] == 1.0

    def test_slow_is_strided_fast(self, small_clips, small_packs):
        for c in small_clips[:40]:
            clip = dataclasses.replace(c, sigma_bg=0.0)
            pack = render_grid_features(clip)
            d = clip.dims
            k = min(d.d1, d.d2)
            for f in range(d.F1):
                np.testing.assert_allclose(pack.slow[f, ..., :k], pack.fast[f * d.stride, ..., :k], rtol=0, atol=1e-12)

    def test_noise_level(self, small_clips):
        clip = dataclasses.replace(small_clips[0], objects=[])
        pack = render_grid_features(clip)
        assert abs(pack.fast.std() - clip.sigma_bg) < 0.005


class TestIO:
    def test_clip_json_round_trip(self, small_clips):
        for c in small_clips:
            assert clip_from_json(clip_to_json(c)) == c

    def test_dataset_round_trip(self, tmp_path, small_config):
        clips = generate_dataset(dataclasses.replace(small_config, clips_per_verb=25, val_clips_per_verb=0))
        root = write_dataset(tmp_path / "ds", clips)
        back, packs = read_dataset(root)
        assert back == clips
        for c in clips:
            ref = render_grid_features(c).as_storage()
            assert np.max(np.abs(packs[c.clip_id].slow - ref.slow)) == 0
            assert np.max(np.abs(packs[c.clip_id].fast - ref.fast)) == 0

    def test_evgf_round_trip(self, tmp_path):
        arr = np.random.default_rng(0).normal(size=(2, 3, 4)).astype(np.float32)
        write_evgf(tmp_path / "a.evgf", arr, "fast")
        back, header = read_evgf(tmp_path / "a.evgf")
        assert np.array_equal(back, arr)
        assert header == {"shape": [2, 3, 4], "dtype": "f32", "order": "row-major", "pathway": "fast"}

    def test_evgf_bytes_layout(self, tmp_path):
        write_evgf(tmp_path / "a.evgf", np.ones((1,), dtype=np.float32), "slow")
        raw = (tmp_path / "a.evgf").read_bytes()
        n = int.from_bytes(raw[5:9], "little")
        assert raw[:5] == b"EVGF1" and raw[9 + n:] == np.float32(1).tobytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "a.evgf"
        write_evgf(p, np.ones((2,), dtype=np.float32), "slow")
        p.write_bytes(b"XXXX1" + p.read_bytes()[5:])
        with pytest.raises(EVGFError, match="bad EVGF magic"):
            read_evgf(p)

    def test_truncated_payload_reports_offset(self, tmp_path):
        p = tmp_path / "a.evgf"
        write_evgf(p, np.ones((4,), dtype=np.float32), "slow")
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(EVGFError, match="byte offset"):
            read_evgf(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "a.evgf"
        p.write_bytes(b"EVGF1\x40\x00\x00\x00{")
        with pytest.raises(EVGFError, match="byte offset 9"):
            read_evgf(p)

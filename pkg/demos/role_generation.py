"""
Generating semantic roles
=========================

Freeze a verb model, cache its clip embeddings, fit the role decoder on a
handful of videos and read the generated roles back out of the token stream.
"""

from collections import defaultdict

import numpy as np

from evsc.embed.state import clip_states
from evsc.harness.train import train_role
from evsc.metrics import RoleEvalRecord, cider_d, rouge_l
from evsc.model.encoder import EncoderConfig
from evsc.model.roles import (RoleConfig, RoleDecoder, RoleVocab, cache_video, greedy_decode, serialize_target)
from evsc.model.verb import VerbModel
from evsc.synth import DatasetConfig, default_ontology, generate_dataset, render_grid_features

onto = default_ontology()
vocab = RoleVocab()
clips = generate_dataset(DatasetConfig(clips_per_verb=10, val_clips_per_verb=0, seed=3))
videos = defaultdict(list)
for c in clips:
    videos[c.video_id].append(c)
chosen = sorted(videos)[:6]

# an untrained encoder is enough to show the plumbing; it must be frozen first
verb_model = VerbModel(EncoderConfig(), seed=0)
verb_model.freeze()

cached, targets = [], []
for vid in chosen:
    cs = sorted(videos[vid], key=lambda c: c.clip_index)
    cached.append(cache_video(verb_model, vid, [clip_states(c, render_grid_features(c)) for c in cs]))
    targets.append([serialize_target(c.annotation, vocab) for c in cs])

print("target:", " ".join(vocab.decode(targets[0][0])))

decoder = RoleDecoder(RoleConfig(), vocab, seed=17)
curve = train_role(decoder, cached, targets, lr=1e-3, steps=200, batch_videos=len(cached))
print("loss", np.round(curve.steps[::40], 3), "->", round(curve.steps[-1], 4))

records = []
for vid, video in zip(chosen, cached):
    cs = sorted(videos[vid], key=lambda c: c.clip_index)
    outputs = greedy_decode(decoder, video, [c.annotation.verb for c in cs])
    if vid == chosen[0]:
        print(onto.names[cs[0].annotation.verb], outputs[0].roles)
    for c, out in zip(cs, outputs):
        for role, phrase in c.annotation.roles:
            records.append(RoleEvalRecord(c.clip_id, role, out.roles[role], tuple(c.references[role]),
                                          c.annotation.verb))

# training-set phrases, so these numbers only show the metrics run end to end
print(f"CIDEr-D {cider_d(records):.3f}  CIDEr-Verb {cider_d(records, 'by-verb'):.3f}  "
      f"CIDEr-Arg {cider_d(records, 'by-arg'):.3f}  ROUGE-L {rouge_l(records):.3f}")

"""
Saving and loading models
=========================

A model file is plain text: a header (level, topology, sizes, config,
dictionary) followed by every parameter tensor written with 17 significant
digits, so loading restores the exact floats.
"""

import os
import tempfile

from prosodynn.corpus import synth_toy_corpus
from prosodynn.features import tag_names
from prosodynn.modelio import load_model, save_model
from prosodynn.training import TrainConfig, train_level

train, valid = synth_toy_corpus(1, 30), synth_toy_corpus(2, 10)
best, _ = train_level(train, valid, TrainConfig(topology="FB", hidden=6, learning_rate=3e-3, max_epochs=30))

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "pw.model")
    save_model(best, path)
    with open(path, encoding="utf-8") as fh:
        header = [next(fh).rstrip() for _ in range(10)]
    print("\n".join(line[:70] for line in header))

    loaded = load_model(path)
    sentence = list("天地花人木")
    print("original:", tag_names(best.predict([sentence])[0]))
    print("loaded:  ", tag_names(loaded.predict([sentence])[0]))
    same = all(a.tobytes() == b.tobytes()
               for (_, a), (_, b) in zip(best.named_parameters(), loaded.named_parameters()))
    print("parameters identical:", same)

"""
Character embeddings
====================

A small skip-gram trainer produces character vectors in the word2vec text
format. Characters that keep appearing next to each other end up with
similar vectors.
"""

import os
import tempfile

import numpy as np

from prosodynn.embeddings import cosine, load_embeddings_text, save_embeddings_text, train_skipgram

rng = np.random.default_rng(0)
lines = []
for _ in range(60):
    kind = rng.integers(3)
    if kind == 0:
        lines.append("XY" * int(rng.integers(2, 6)))
    elif kind == 1:
        lines.append("ZW" * int(rng.integers(2, 6)))
    else:
        lines.append("".join(rng.choice(list("abcdefgh"), 8)))

with tempfile.TemporaryDirectory() as tmp:
    raw = os.path.join(tmp, "raw.txt")
    with open(raw, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    table = train_skipgram(raw, dim=16, window=2, negatives=5, epochs=5, seed=0)
    print("vocabulary (most frequent first):", "".join(table.tokens))
    print("cos(X, Y) =", round(cosine(table.row("X"), table.row("Y")), 3))
    print("cos(X, W) =", round(cosine(table.row("X"), table.row("W")), 3))

    # the text format round-trips every value exactly
    path = os.path.join(tmp, "vectors.txt")
    save_embeddings_text(table, path)
    print("round trip exact:", load_embeddings_text(path) == table)
    with open(path, encoding="utf-8") as fh:
        print(fh.readline().strip(), "| first row starts", fh.readline()[:40])

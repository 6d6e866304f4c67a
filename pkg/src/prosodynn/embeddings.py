"""Character embeddings: word2vec text-format I/O and a small skip-gram trainer.

The text format is the one written by the original word2vec tool::

    <vocab_count> <dim>
    <token> <v_1> ... <v_dim>
    ...

Tokens here are single characters. The trainer is skip-gram with negative
sampling (noise distribution proportional to count**0.75), no subsampling.
"""
from __future__ import annotations

import hashlib
from collections import Counter

import numpy as np

from .numerics import DTYPE, NonFiniteError


class EmbeddingFormatError(ValueError):
    pass


class EmbeddingTable:
    def __init__(self, tokens, vectors):
        tokens = list(tokens)
        vectors = np.asarray(vectors, dtype=DTYPE)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise ValueError(f"{len(tokens)} tokens but vectors of shape {vectors.shape}")
        self.tokens = tokens
        self.vectors = vectors
        self._index = {t: i for i, t in enumerate(tokens)}
        if len(self._index) != len(tokens):
            raise ValueError("duplicate tokens in embedding table")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self._index

    def __eq__(self, other) -> bool:
        return (isinstance(other, EmbeddingTable) and self.tokens == other.tokens
                and self.vectors.shape == other.vectors.shape
                and np.array_equal(self.vectors, other.vectors))

    def row(self, token):
        i = self._index.get(token)
        return None if i is None else self.vectors[i]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self.tokens).encode("utf-8"))
        h.update(np.ascontiguousarray(self.vectors).tobytes())
        return h.hexdigest()[:16]


def load_embeddings_text(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise EmbeddingFormatError(f"{path}:1: header must be '<vocab_count> <dim>'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise EmbeddingFormatError(f"{path}:1: non-integer header {header.strip()!r}") from None
        if count < 0 or dim <= 0:
            raise EmbeddingFormatError(f"{path}:1: bad header values {count} {dim}")
        tokens, rows, seen = [], [], set()
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            # the token may itself be a space, so split the values off the right
            fields = line.rsplit(" ", dim)
            if len(fields) != dim + 1 or fields[0] == "":
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected a token and {dim} values, got {len(line.split()) - 1} values")
            token = fields[0]
            try:
                vals = [float(v) for v in fields[1:]]
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: non-numeric value in row for {token!r}") from None
            if token in seen:
                raise EmbeddingFormatError(f"{path}:{lineno}: duplicate token {token!r}")
            seen.add(token)
            tokens.append(token)
            rows.append(vals)
    if len(tokens) != count:
        raise EmbeddingFormatError(f"{path}: header announces {count} rows, file has {len(tokens)}")
    return EmbeddingTable(tokens, np.array(rows, dtype=DTYPE).reshape(count, dim))


def save_embeddings_text(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for tok, vec in zip(table.tokens, table.vectors):
            fh.write(tok + " " + " ".join(format(float(v), ".17g") for v in vec) + "\n")


def _read_lines(raw_text_path) -> list[str]:
    with open(raw_text_path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def train_skipgram(raw_text_path, dim: int = 100, window: int = 5, negatives: int = 5,
                   epochs: int = 5, lr: float = 0.025, seed: int = 1) -> EmbeddingTable:
    """Train character vectors on a raw text file (one sentence per line).

    Context windows do not cross line ends. The learning rate decays
    linearly to ``lr * 1e-4`` over the run, as in word2vec.
    """
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if window < 1 or negatives < 0 or epochs < 1:
        raise ValueError("window and epochs must be >= 1, negatives >= 0")
    lines = [[c for c in line if not c.isspace()] for line in _read_lines(raw_text_path)]
    lines = [l for l in lines if l]
    if not lines:
        raise ValueError(f"{raw_text_path}: empty corpus")

    counts = Counter(c for l in lines for c in l)
    vocab = sorted(counts, key=lambda c: (-counts[c], c))
    index = {c: i for i, c in enumerate(vocab)}
    V = len(vocab)
    noise = np.array([counts[c] for c in vocab], dtype=DTYPE) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    noise_cdf[-1] = 1.0

    rng = np.random.default_rng(seed)
    w_in = (rng.random((V, dim)) - 0.5) / dim
    w_out = np.zeros((V, dim), dtype=DTYPE)

    encoded = [np.array([index[c] for c in l]) for l in lines]
    pairs = []
    for ids in encoded:
        n = len(ids)
        for t in range(n):
            for j in range(max(0, t - window), min(n, t + window + 1)):
                if j != t:
                    pairs.append((ids[t], ids[j]))
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    total = max(1, epochs * len(pairs))
    labels = np.zeros(1 + negatives)
    labels[0] = 1.0

    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(pairs))
        negs = np.searchsorted(noise_cdf, rng.random((len(pairs), negatives)), side="right")
        for k in order:
            center, ctx = pairs[k]
            alpha = max(lr * (1.0 - step / total), lr * 1e-4)
            step += 1
            targets = np.concatenate(([ctx], negs[k]))
            v = w_in[center]
            u = w_out[targets]
            score = 1.0 / (1.0 + np.exp(-np.clip(u @ v, -30.0, 30.0)))
            g = alpha * (labels - score)
            w_in[center] = v + g @ u
            np.add.at(w_out, targets, np.outer(g, v))
    if not np.all(np.isfinite(w_in)):
        raise NonFiniteError("skip-gram training diverged")
    return EmbeddingTable(vocab, w_in)


def cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))

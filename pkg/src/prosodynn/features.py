"""Character dictionary and per-character feature vectors.

Each character is encoded on its own (no context window). Two encodings are
supported:

* one-hot over a dictionary built from the training set, with a reserved
  unknown symbol appended last;
* a dense embedding looked up in an :class:`~prosodynn.embeddings.EmbeddingTable`.

For the phrase and intonation levels the previous level's predicted tag is
appended as one extra scalar dimension (B -> 1.0, NB -> 0.0, O -> -1.0).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .numerics import DTYPE, DimensionError

TAGS = ("B", "NB", "O")
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}
N_TAGS = len(TAGS)
LEVELS = ("PW", "PPH", "IPH")

UNK = "<UNK>"
CASCADE_CODE = {"B": 1.0, "NB": 0.0, "O": -1.0}


def tag_indices(tags: Sequence) -> np.ndarray:
    """Map tag strings (or already-integer tags) to an int array."""
    out = np.empty(len(tags), dtype=np.int64)
    for i, t in enumerate(tags):
        if isinstance(t, str):
            try:
                out[i] = TAG_INDEX[t]
            except KeyError:
                raise ValueError(f"unknown tag {t!r}; expected one of {TAGS}") from None
        else:
            if not 0 <= int(t) < N_TAGS:
                raise ValueError(f"tag index {t} out of range")
            out[i] = int(t)
    return out


def tag_names(idx: Sequence[int]) -> list[str]:
    return [TAGS[int(i)] for i in idx]


class CharDictionary:
    """Character -> index map in first-seen order, UNK always last."""

    def __init__(self, chars: Sequence[str]):
        chars = list(chars)
        if UNK in chars:
            chars.remove(UNK)
        self._chars = chars + [UNK]
        self._index = {c: i for i, c in enumerate(self._chars)}
        if len(self._index) != len(self._chars):
            raise ValueError("duplicate characters in dictionary")

    def __len__(self) -> int:
        return len(self._chars)

    def __contains__(self, ch: str) -> bool:
        return ch in self._index and ch != UNK

    def __eq__(self, other) -> bool:
        return isinstance(other, CharDictionary) and self._chars == other._chars

    def __repr__(self) -> str:
        return f"CharDictionary(size={len(self)})"

    @property
    def unk_index(self) -> int:
        return len(self._chars) - 1

    @property
    def chars(self) -> list[str]:
        """Known characters in index order, excluding UNK."""
        return self._chars[:-1]

    def index(self, ch: str) -> int:
        return self._index.get(ch, self.unk_index) if ch != UNK else self.unk_index

    def lookup(self, sentence: Sequence[str]) -> np.ndarray:
        return np.fromiter((self.index(c) for c in sentence), dtype=np.int64, count=len(sentence))


def build_dictionary(training_sentences: Sequence[Sequence[str]]) -> CharDictionary:
    seen: dict[str, None] = {}
    n = 0
    for sent in training_sentences:
        n += 1
        for ch in sent:
            seen.setdefault(ch, None)
    if n == 0 or not seen:
        raise ValueError("cannot build a dictionary from an empty corpus")
    return CharDictionary(list(seen))


@dataclass(frozen=True)
class EncodedSentence:
    """Feature vectors for one sentence.

    In one-hot mode the vectors are kept sparse: ``indices`` holds the hot
    position for each character and ``dense`` holds only the trailing dense
    columns (the cascade code, if any). In embedding mode ``indices`` is
    None and ``dense`` holds the whole (T, M) matrix.
    """

    mode: str
    cascade: bool
    dim: int
    dense: np.ndarray
    indices: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.dense.shape[0]

    @property
    def onehot_size(self) -> int:
        return self.dim - self.dense.shape[1] if self.indices is not None else 0

    def vectors(self) -> np.ndarray:
        """Materialise the full (T, M) feature matrix."""
        if self.indices is None:
            return self.dense.copy()
        T = len(self)
        out = np.zeros((T, self.dim), dtype=DTYPE)
        out[np.arange(T), self.indices] = 1.0
        out[:, self.onehot_size:] = self.dense
        return out


def _cascade_column(prev_tags, T: int) -> np.ndarray:
    if prev_tags is None:
        return np.zeros((T, 0), dtype=DTYPE)
    if len(prev_tags) != T:
        raise DimensionError(f"previous-level tags have length {len(prev_tags)}, sentence has {T}")
    codes = [CASCADE_CODE[TAGS[i]] for i in tag_indices(prev_tags)]
    return np.asarray(codes, dtype=DTYPE).reshape(T, 1)


def encode_onehot(sentence: Sequence[str], dictionary: CharDictionary, prev_tags=None) -> EncodedSentence:
    T = len(sentence)
    extra = _cascade_column(prev_tags, T)
    return EncodedSentence("onehot", prev_tags is not None, len(dictionary) + extra.shape[1],
                           extra, dictionary.lookup(sentence))


def encode_embedding(sentence: Sequence[str], table, prev_tags=None) -> EncodedSentence:
    T = len(sentence)
    extra = _cascade_column(prev_tags, T)
    base = np.zeros((T, table.dim), dtype=DTYPE)
    for t, ch in enumerate(sentence):
        row = table.row(ch)
        if row is not None:
            base[t] = row
    return EncodedSentence("embedding", prev_tags is not None, table.dim + extra.shape[1],
                           np.hstack([base, extra]))

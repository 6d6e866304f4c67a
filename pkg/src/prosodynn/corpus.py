"""Annotated corpus I/O, seeded splitting and a synthetic toy corpus.

The on-disk format is UTF-8 TSV, one character per line::

    char<TAB>pw<TAB>pph<TAB>iph

with blank lines between sentences. Tags are ``B``, ``NB`` or ``O``; a ``B``
marks the last character of a prosodic unit (the boundary falls after it).
Prediction output may carry ``-`` for levels that were not predicted.
"""
from __future__ import annotations

import unicodedata
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .features import LEVELS, TAGS

MISSING = "-"


class CorpusFormatError(ValueError):
    def __init__(self, message: str, path=None, line: Optional[int] = None, column: Optional[int] = None):
        loc = ""
        if path is not None:
            loc += f"{path}:"
        if line is not None:
            loc += f"{line}:"
        if column is not None:
            loc += f"{column}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.line, self.column = line, column


@dataclass
class AnnotatedSentence:
    chars: list
    pw: Optional[list]
    pph: Optional[list]
    iph: Optional[list]

    def __post_init__(self):
        for level in LEVELS:
            tags = self.tags(level)
            if tags is not None and len(tags) != len(self.chars):
                raise ValueError(f"{level} tags have length {len(tags)}, sentence has {len(self.chars)}")

    def __len__(self) -> int:
        return len(self.chars)

    def tags(self, level: str):
        return getattr(self, level.lower())

    def has_level(self, level: str) -> bool:
        return self.tags(level) is not None


def normalize_text(text: str) -> str:
    """Text normalization hook. Currently a pass-through."""
    return text


def _is_punct(ch: str) -> bool:
    return all(unicodedata.category(c).startswith("P") for c in ch)


def parse_corpus(path, allow_missing: bool = False) -> list[AnnotatedSentence]:
    """Read the TSV corpus format.

    With ``allow_missing`` a ``-`` in a tag column means that level is absent
    for the whole sentence (as written by prediction with fewer models).
    """
    sentences = []
    rows: list = []
    start_line = None

    def flush():
        if not rows:
            return
        chars = [r[0] for r in rows]
        cols = []
        for k, level in enumerate(LEVELS, start=1):
            col = [r[k] for r in rows]
            if MISSING in col:
                if not allow_missing or any(c != MISSING for c in col):
                    raise CorpusFormatError(f"missing {level} tags in sentence", path, start_line)
                cols.append(None)
            else:
                cols.append(col)
        for ch, *tags in rows:
            if "O" in tags and not _is_punct(ch):
                warnings.warn(f"{path}: non-punctuation character {ch!r} tagged O", stacklevel=3)
                break
        sentences.append(AnnotatedSentence(chars, *cols))
        rows.clear()

    allowed = set(TAGS) | ({MISSING} if allow_missing else set())
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusFormatError(f"expected 4 tab-separated columns, got {len(parts)}", path, lineno)
            if not parts[0]:
                raise CorpusFormatError("empty character column", path, lineno, 1)
            for col, tag in enumerate(parts[1:], start=2):
                if tag not in allowed:
                    raise CorpusFormatError(f"unknown tag {tag!r}", path, lineno, col)
            if not rows:
                start_line = lineno
            rows.append(parts)
    flush()
    return sentences


def parse_plain(path) -> list[list[str]]:
    """Characters only, one sentence per blank-line separated block.

    Each line contributes the characters of its first tab-separated column,
    so both a corpus TSV and plain lines of text are accepted.
    """
    out, cur = [], []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if cur:
                    out.append(cur)
                    cur = []
                continue
            cur.extend(c for c in normalize_text(line.split("\t")[0]) if not c.isspace())
    if cur:
        out.append(cur)
    return out


def write_corpus(sentences, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for n, s in enumerate(sentences):
            if n:
                fh.write("\n")
            for t, ch in enumerate(s.chars):
                tags = [s.tags(lv)[t] if s.has_level(lv) else MISSING for lv in LEVELS]
                fh.write("\t".join([ch] + tags) + "\n")


def split_corpus(sentences, n_train: int, n_valid: int, n_test: int, seed: int = 0):
    need = n_train + n_valid + n_test
    if min(n_train, n_valid, n_test) < 0:
        raise ValueError("split sizes must be non-negative")
    if need > len(sentences):
        raise ValueError(f"asked for {need} sentences, corpus has {len(sentences)}")
    perm = np.random.default_rng(seed).permutation(len(sentences))
    pick = [sentences[i] for i in perm]
    return pick[:n_train], pick[n_train:n_train + n_valid], pick[n_train + n_valid:need]


# 19 ordinary characters plus a comma. The first nine only start or continue a
# word, the last ten only end one.
TOY_INNER = list("天地人山水风云日月")
TOY_FINAL = list("花草木石田火土金星雨")
TOY_COMMA = "，"
TOY_ALPHABET = TOY_INNER + TOY_FINAL + [TOY_COMMA]


def synth_toy_corpus(seed: int, n_sentences: int) -> list[AnnotatedSentence]:
    """Rule-generated sentences with nested, learnable boundaries.

    A sentence is 1-3 clauses joined by a comma. A clause is 1-4 words of 2 or
    3 characters; a word ends with a character from ``TOY_FINAL`` and uses
    ``TOY_INNER`` before that, so every word end is a PW boundary. Counting
    word ends within a clause, every 2nd is also PPH and every 4th also IPH.
    The comma is ``O`` at every level.
    """
    if n_sentences < 1:
        raise ValueError("n_sentences must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sentences):
        rows = []  # (char, pw, pph, iph)
        for k in range(int(rng.integers(1, 4))):
            if k:
                rows.append((TOY_COMMA, "O", "O", "O"))
            for w in range(1, int(rng.integers(1, 5)) + 1):
                for _ in range(int(rng.integers(2, 4)) - 1):
                    rows.append((TOY_INNER[int(rng.integers(len(TOY_INNER)))], "NB", "NB", "NB"))
                rows.append((TOY_FINAL[int(rng.integers(len(TOY_FINAL)))], "B",
                             "B" if w % 2 == 0 else "NB", "B" if w % 4 == 0 else "NB"))
        chars, pw, pph, iph = (list(col) for col in zip(*rows))
        out.append(AnnotatedSentence(chars, pw, pph, iph))
    return out


def raw_text(sentences) -> str:
    """Plain text, one sentence per line, for embedding training."""
    return "".join("".join(s.chars) + "\n" for s in sentences)

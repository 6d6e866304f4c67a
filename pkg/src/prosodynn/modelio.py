"""Model files: a line-oriented, self-describing text format.

Layout (``schema_version 1``)::

    prosodynn-model
    schema_version 1
    level PW
    topology FBB
    hidden 32
    input_dim 4030
    feature_mode onehot
    cascade 0
    tags B NB O
    config {"batch_size": 32, ...}
    dictionary 4030
    "<JSON-quoted character>"        # one per line, UNK last
    ...
    tensors 29
    tensor <name> <dim_1> [<dim_2>]
    <row-major values, one matrix row per line>
    ...
    end

Embedding-feature models replace the dictionary block with::

    embedding_ref <path or ->
    embedding_dim <d>
    embedding_fingerprint <hex>

Values are written with 17 significant digits, so a save/load round trip
restores every float exactly.
"""
from __future__ import annotations

import json
import os

from .features import TAGS, UNK, CharDictionary
from .inference import TransitionMatrix
from .layers import NetworkModel

MAGIC = "prosodynn-model"
SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    pass


class SchemaVersionError(ModelFormatError):
    pass


class ModelMismatchError(ValueError):
    """The model does not fit the data or resources it is used with."""


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def dumps_model(bundle) -> str:
    net = bundle.network
    lines = [MAGIC, f"schema_version {SCHEMA_VERSION}", f"level {net.level}",
             f"topology {net.topology or '-'}", f"hidden {net.hidden}", f"input_dim {net.input_dim}",
             f"feature_mode {net.feature_mode}", f"cascade {int(net.cascade)}", "tags " + " ".join(TAGS),
             "config " + json.dumps(vars(bundle.config), sort_keys=True)]
    if net.feature_mode == "onehot":
        d = bundle.dictionary
        lines.append(f"dictionary {len(d)}")
        lines += [json.dumps(c, ensure_ascii=False) for c in d.chars + [UNK]]
    else:
        table = bundle.embeddings
        lines.append(f"embedding_ref {bundle.embedding_ref or '-'}")
        lines.append(f"embedding_dim {table.dim}")
        lines.append(f"embedding_fingerprint {table.fingerprint()}")
    params = bundle.named_parameters()
    lines.append(f"tensors {len(params)}")
    for name, a in params:
        lines.append(f"tensor {name} " + " ".join(str(n) for n in a.shape))
        if a.ndim == 1:
            lines.append(_fmt(a))
        else:
            lines += [_fmt(row) for row in a]
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(bundle, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(bundle))


class _Reader:
    def __init__(self, text: str, path):
        self.lines = text.split("\n")
        self.pos = 0
        self.path = path

    def error(self, msg):
        return ModelFormatError(f"{self.path}:{self.pos}: {msg}")

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise self.error("unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def field(self, key: str) -> str:
        line = self.next()
        k, _, v = line.partition(" ")
        if k != key:
            raise self.error(f"expected field {key!r}, found {line[:40]!r}")
        return v

    def floats(self, n: int):
        line = self.next()
        try:
            vals = [float(v) for v in line.split()]
        except ValueError:
            raise self.error("non-numeric tensor value") from None
        if len(vals) != n:
            raise self.error(f"expected {n} values, found {len(vals)}")
        return vals


def load_model(path, embeddings=None):
    """Read a model file back into a :class:`~prosodynn.training.ModelBundle`.

    Embedding-feature models need their table: pass it as ``embeddings`` or
    leave it to be loaded from the recorded reference (relative paths are
    resolved against the model file's directory).
    """
    from .embeddings import load_embeddings_text
    from .training import ModelBundle, TrainConfig

    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    r = _Reader(text, path)
    if r.next() != MAGIC:
        raise ModelFormatError(f"{path}: not a prosodynn model file")
    try:
        version = int(r.field("schema_version"))
    except ValueError:
        raise r.error("schema_version is not an integer") from None
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema_version {version} is not supported (expected {SCHEMA_VERSION})")
    try:
        level = r.field("level")
        topology = r.field("topology")
        topology = "" if topology == "-" else topology
        hidden = int(r.field("hidden"))
        input_dim = int(r.field("input_dim"))
        mode = r.field("feature_mode")
        cascade = bool(int(r.field("cascade")))
        tags = tuple(r.field("tags").split())
        config = TrainConfig(**json.loads(r.field("config")))
    except (ValueError, TypeError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise r.error(f"bad header: {e}") from None
    if tags != TAGS:
        raise ModelFormatError(f"{path}: tag order {tags} differs from {TAGS}")

    dictionary = table = ref = None
    if mode == "onehot":
        n = int(r.field("dictionary"))
        try:
            chars = [json.loads(r.next()) for _ in range(n)]
        except json.JSONDecodeError:
            raise r.error("bad dictionary entry") from None
        dictionary = CharDictionary(chars)
        if len(dictionary) != n:
            raise ModelFormatError(f"{path}: dictionary block is inconsistent")
        base = n
    elif mode == "embedding":
        ref = r.field("embedding_ref")
        ref = None if ref == "-" else ref
        dim = int(r.field("embedding_dim"))
        fp = r.field("embedding_fingerprint")
        table = embeddings
        if table is None:
            if ref is None:
                raise ModelMismatchError(f"{path}: embedding table required but none given or referenced")
            ref_path = ref if os.path.isabs(ref) else os.path.join(os.path.dirname(os.path.abspath(path)), ref)
            if not os.path.exists(ref_path) and os.path.exists(ref):
                ref_path = ref
            table = load_embeddings_text(ref_path)
        if table.dim != dim or table.fingerprint() != fp:
            raise ModelMismatchError(f"{path}: embedding table does not match the one used in training")
        base = dim
    else:
        raise ModelFormatError(f"{path}: unknown feature mode {mode!r}")
    if input_dim != base + int(cascade):
        raise ModelFormatError(f"{path}: input_dim {input_dim} inconsistent with features ({base}, cascade={cascade})")

    net = NetworkModel(topology, input_dim, hidden, seed=None, level=level, feature_mode=mode, cascade=cascade)
    bundle = ModelBundle(net, TransitionMatrix.zeros(), config, dictionary, table, ref)
    params = dict(bundle.named_parameters())
    count = int(r.field("tensors"))
    if count != len(params):
        raise ModelFormatError(f"{path}: {count} tensors listed, model needs {len(params)}")
    for _ in range(count):
        head = r.field("tensor").split()
        name, shape = head[0], tuple(int(x) for x in head[1:])
        if name not in params:
            raise r.error(f"unexpected tensor {name!r}")
        target = params[name]
        if shape != target.shape:
            raise r.error(f"tensor {name} has shape {shape}, expected {target.shape}")
        if target.ndim == 1:
            target[...] = r.floats(shape[0])
        else:
            for i in range(shape[0]):
                target[i] = r.floats(shape[1])
    if r.next() != "end":
        raise r.error("missing end marker")
    return bundle

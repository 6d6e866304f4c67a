"""Training: sentence-level likelihood, minibatch SGD, early stopping, cascade.

The loss for one sentence is ``logZ - score(gold path)``: the negative
log-probability of the gold tag path under the lattice distribution.
Batch gradients are sums over the sentences in the batch.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .features import (LEVELS, N_TAGS, CharDictionary, EncodedSentence, build_dictionary,
                       encode_embedding, encode_onehot, tag_indices)
from .inference import (TransitionMatrix, forward_backward, pairwise_marginals, sentence_score,
                        viterbi_decode)
from .layers import InputBatch, NetworkModel, backward_batch, check_topology, forward_batch, forward_from
from .numerics import DTYPE, DimensionError, as_float, OptimizerState, check_finite, sgd_momentum_step

log = logging.getLogger(__name__)

DEFAULT_LR = {"PW": 1e-3, "PPH": 1e-4, "IPH": 1e-4}
PREDICT_CHUNK = 64


@dataclass
class TrainConfig:
    level: str = "PW"
    topology: str = "FBB"
    hidden: int = 32
    feature_mode: str = "onehot"
    learning_rate: Optional[float] = None  # None -> per-level default
    momentum: float = 0.9
    batch_size: int = 32
    patience: int = 10
    max_epochs: int = 500
    seed: int = 1
    cascade: bool = True
    criterion: str = "error"

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        check_topology(self.topology)
        if self.feature_mode not in ("onehot", "embedding"):
            raise ValueError("feature_mode must be 'onehot' or 'embedding'")
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LR[self.level]
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ValueError("learning_rate must be >= 0 and momentum in [0, 1)")
        if self.hidden <= 0 or self.batch_size <= 0 or self.patience <= 0 or self.max_epochs <= 0:
            raise ValueError("hidden, batch_size, patience and max_epochs must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.criterion not in ("error", "fscore"):
            raise ValueError("criterion must be 'error' or 'fscore'")

    @property
    def uses_cascade(self) -> bool:
        return self.cascade and self.level != "PW"


@dataclass
class ModelBundle:
    network: NetworkModel
    transitions: TransitionMatrix
    config: TrainConfig
    dictionary: Optional[CharDictionary] = None
    embeddings: object = None
    embedding_ref: Optional[str] = None

    @property
    def level(self) -> str:
        return self.network.level

    @property
    def cascade(self) -> bool:
        return self.network.cascade

    @classmethod
    def create(cls, config: TrainConfig, dictionary=None, embeddings=None, embedding_ref=None):
        if config.feature_mode == "onehot":
            if dictionary is None:
                raise ValueError("one-hot features need a dictionary")
            base = len(dictionary)
        else:
            if embeddings is None:
                raise ValueError("embedding features need an embedding table")
            base = embeddings.dim
        cascade = config.uses_cascade
        net = NetworkModel(config.topology, base + int(cascade), config.hidden, seed=config.seed,
                           level=config.level, feature_mode=config.feature_mode, cascade=cascade)
        return cls(net, TransitionMatrix.zeros(), copy.deepcopy(config), dictionary, embeddings, embedding_ref)

    def named_parameters(self):
        return self.network.named_parameters() + self.transitions.named_parameters()

    def encode(self, chars, prev_tags=None) -> EncodedSentence:
        if self.cascade and prev_tags is None:
            raise ValueError(f"{self.level} model needs previous-level tags")
        if not self.cascade:
            prev_tags = None
        if self.network.feature_mode == "onehot":
            return encode_onehot(chars, self.dictionary, prev_tags)
        return encode_embedding(chars, self.embeddings, prev_tags)

    def scores(self, encoded: Sequence[EncodedSentence]) -> list:
        """Network score matrices for many sentences, batched."""
        out = []
        for k in range(0, len(encoded), PREDICT_CHUNK):
            chunk = encoded[k:k + PREDICT_CHUNK]
            s, _ = forward_batch(self.network, InputBatch(chunk))
            out += [s[:len(e), j] for j, e in enumerate(chunk)]
        return out

    def predict_encoded(self, encoded: Sequence[EncodedSentence]) -> list:
        return [viterbi_decode(f, self.transitions)[0] for f in self.scores(encoded)]

    def predict(self, sentences, prev_tags=None) -> list:
        if prev_tags is None:
            prev_tags = [None] * len(sentences)
        return self.predict_encoded([self.encode(s, p) for s, p in zip(sentences, prev_tags)])


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_error: float


def sll_loss_and_grads(f, tr: TransitionMatrix, gold):
    """Negative gold-path log-likelihood and its gradients.

    Returns ``(loss, dF, dS, dS_init)`` where ``dF`` has the shape of ``f``.
    """
    f = as_float(f)
    y = tag_indices(gold)
    if len(y) != f.shape[0]:
        raise DimensionError(f"{len(y)} gold tags for {f.shape[0]} positions")
    alpha, beta, logz = forward_backward(f, tr)
    marg = np.exp(alpha + beta - logz)
    loss = logz - sentence_score(f, tr, y)
    dF = marg.copy()
    dF[np.arange(len(y)), y] -= 1.0
    dS = pairwise_marginals(f, tr, alpha, beta, logz)
    np.add.at(dS, (y[:-1], y[1:]), -1.0)
    dS_init = marg[0].copy()
    dS_init[y[0]] -= 1.0
    return (loss if loss > 0 else loss * 0), dF, dS, dS_init


def batch_loss_and_grads(bundle: ModelBundle, batch: Sequence[tuple]):
    """Summed loss and gradients over ``(encoded, gold)`` pairs, keyed by parameter name."""
    encs = [e for e, _ in batch]
    ib = InputBatch(encs)
    scores, cache = forward_batch(bundle.network, ib)
    dscores = np.zeros_like(scores)
    dS = np.zeros((N_TAGS, N_TAGS))
    dS_init = np.zeros(N_TAGS)
    total = 0.0
    for j, (enc, gold) in enumerate(batch):
        n = len(enc)
        loss, dF, ds, dsi = sll_loss_and_grads(scores[:n, j], bundle.transitions, gold)
        total += loss
        dscores[:n, j] = dF
        dS += ds
        dS_init += dsi
    grads = backward_batch(bundle.network, cache, dscores)
    grads["trans.S"] = dS
    grads["trans.S_init"] = dS_init
    return total, grads


def sentence_loss(bundle: ModelBundle, enc: EncodedSentence, gold) -> float:
    (f,) = bundle.scores([enc])
    return sll_loss_and_grads(f, bundle.transitions, gold)[0]


def make_optimizer(bundle: ModelBundle, config: TrainConfig) -> OptimizerState:
    return OptimizerState.for_params([p for _, p in bundle.named_parameters()],
                                     config.learning_rate, config.momentum)


def train_epoch(bundle: ModelBundle, train_data, config: TrainConfig, state: OptimizerState, epoch: int = 0):
    """One pass over ``train_data`` (list of ``(encoded, gold)``); updates in place.

    Returns ``(bundle, mean per-sentence loss)``. ``state`` is updated in place.
    """
    if not train_data:
        raise ValueError("no training data")
    perm = np.random.default_rng([config.seed, epoch]).permutation(len(train_data))
    names = [n for n, _ in bundle.named_parameters()]
    total = 0.0
    for k in range(0, len(perm), config.batch_size):
        batch = [train_data[i] for i in perm[k:k + config.batch_size]]
        loss, grads = batch_loss_and_grads(bundle, batch)
        total += loss
        params = [p for _, p in bundle.named_parameters()]
        new_params, new_state = sgd_momentum_step(params, [grads[n] for n in names], state)
        for p, q in zip(params, new_params):
            p[...] = q
        state.velocity = new_state.velocity
    for n, p in bundle.named_parameters():
        check_finite(p, n)
    return bundle, total / len(train_data)


def tag_error_rate(pred, gold) -> float:
    wrong = total = 0
    for p, g in zip(pred, gold):
        p, g = np.asarray(p), tag_indices(g)
        wrong += int((p != g).sum())
        total += len(g)
    return wrong / total if total else 0.0


def validation_error(bundle: ModelBundle, valid_data, criterion: str = "error") -> float:
    from .evaluation import score_prf

    pred = bundle.predict_encoded([e for e, _ in valid_data])
    gold = [g for _, g in valid_data]
    if criterion == "fscore":
        return 1.0 - score_prf(pred, gold).f_score
    return tag_error_rate(pred, gold)


def fit(bundle: ModelBundle, train_data, valid_data, config: TrainConfig,
        evaluate: Optional[Callable] = None, on_epoch: Optional[Callable] = None):
    """Train until the validation error stops improving for ``patience`` epochs.

    ``evaluate(bundle, epoch)`` may replace the default validation error.
    Returns a copy of the bundle from the best epoch and the epoch records.
    """
    if not train_data or not valid_data:
        raise ValueError("fit needs non-empty training and validation data")
    if evaluate is None:
        def evaluate(b, epoch):
            return validation_error(b, valid_data, config.criterion)
    state = make_optimizer(bundle, config)
    records = []
    best_err, best_epoch, best = np.inf, 0, copy.deepcopy(bundle)
    for epoch in range(1, config.max_epochs + 1):
        _, loss = train_epoch(bundle, train_data, config, state, epoch)
        err = float(evaluate(bundle, epoch))
        rec = EpochRecord(epoch, float(loss), err)
        records.append(rec)
        log.info("%s epoch %d loss %.6f valid %.6f", config.level, epoch, loss, err)
        if on_epoch is not None:
            on_epoch(rec)
        if err < best_err:
            best_err, best_epoch, best = err, epoch, copy.deepcopy(bundle)
        elif epoch - best_epoch >= config.patience:
            break
    return best, records


def level_data(bundle: ModelBundle, sentences, level: str, prev_tags=None):
    prev_tags = prev_tags if prev_tags is not None else [None] * len(sentences)
    return [(bundle.encode(s.chars, p), tag_indices(s.tags(level))) for s, p in zip(sentences, prev_tags)]


def train_level(train, valid, config: TrainConfig, dictionary=None, embeddings=None,
                embedding_ref=None, prev_train=None, prev_valid=None, on_epoch=None):
    """Build a bundle for ``config.level`` and fit it on annotated sentences."""
    for s in list(train) + list(valid):
        if not s.has_level(config.level):
            raise ValueError(f"sentence lacks {config.level} annotation")
    if config.feature_mode == "onehot" and dictionary is None:
        dictionary = build_dictionary([s.chars for s in train])
    bundle = ModelBundle.create(config, dictionary, embeddings, embedding_ref)
    if bundle.cascade and (prev_train is None or prev_valid is None):
        raise ValueError(f"{config.level} with cascade needs previous-level predictions")
    tr = level_data(bundle, train, config.level, prev_train)
    va = level_data(bundle, valid, config.level, prev_valid)
    return fit(bundle, tr, va, config, on_epoch=on_epoch)


def predict_cascade(bundles: Sequence[ModelBundle], sentences) -> list:
    """Run PW, then PPH, then IPH models, feeding each level's output forward.

    Returns one dict per sentence mapping level -> tag index array.
    """
    out = [dict() for _ in sentences]
    prev = None
    for b in bundles:
        tags = b.predict(sentences, prev if b.cascade else None)
        for d, t in zip(out, tags):
            d[b.level] = t
        prev = tags
    return out


def cascade_run(train, valid, configs: dict, embeddings=None, embedding_ref=None, on_epoch=None):
    """Train PW, PPH and IPH in order; later levels see earlier predictions.

    ``configs`` maps level name to :class:`TrainConfig`. Returns a dict of
    level -> best bundle, and a dict of level -> epoch records.
    """
    for s in list(train) + list(valid):
        for lv in LEVELS:
            if not s.has_level(lv):
                raise ValueError(f"cascade training needs all three levels; a sentence lacks {lv}")
    dictionary = build_dictionary([s.chars for s in train])
    bundles, history = {}, {}
    prev_train = prev_valid = None
    for lv in LEVELS:
        cfg = configs[lv]
        if cfg.level != lv:
            raise ValueError(f"config for {lv} says level {cfg.level}")
        best, recs = train_level(train, valid, cfg, dictionary, embeddings, embedding_ref,
                                 prev_train, prev_valid, on_epoch)
        bundles[lv], history[lv] = best, recs
        prev_train = best.predict([s.chars for s in train], prev_train if best.cascade else None)
        prev_valid = best.predict([s.chars for s in valid], prev_valid if best.cascade else None)
    return bundles, history


GRADCHECK_MAX_HIDDEN = 16
GRADCHECK_MAX_T = 8


def extended_precision_copy(bundle: ModelBundle) -> ModelBundle:
    """Deep copy with every parameter in extended precision."""
    b = copy.deepcopy(bundle)
    owners = [b.network, b.transitions]
    for layer in b.network.layers:
        owners += [layer.forward_cell, layer.backward_cell] if layer.kind == "B" else [layer]
    for obj in owners:
        for k, v in vars(obj).items():
            if isinstance(v, np.ndarray) and v.dtype == DTYPE:
                setattr(obj, k, v.astype(np.longdouble))
    return b


def gradient_check_errors(bundle: ModelBundle, enc: EncodedSentence, gold, epsilon: float = 1e-5,
                          names=None) -> dict:
    """Worst relative error per parameter tensor, analytic vs central differences.

    The finite differences are taken on an extended-precision copy of the
    model so that round-off in the loss does not swamp small gradient entries.
    """
    if bundle.network.hidden > GRADCHECK_MAX_HIDDEN or len(enc) > GRADCHECK_MAX_T:
        raise ValueError(f"gradient check limited to H <= {GRADCHECK_MAX_HIDDEN} and T <= {GRADCHECK_MAX_T}")
    names = [n for n, _ in bundle.named_parameters()] if names is None else list(names)
    if not names:
        raise ValueError("no parameters to perturb")
    gold = tag_indices(gold)
    _, grads = batch_loss_and_grads(bundle, [(enc, gold)])
    ext = extended_precision_copy(bundle)
    params = dict(ext.named_parameters())
    eps = np.longdouble(epsilon)

    # layer inputs from the unperturbed model; perturbing layer n only
    # requires recomputing from layer n upward
    batch = InputBatch([enc])
    _, cache = forward_batch(ext.network, batch)
    inputs = [batch] + [None] * len(ext.network.layers)
    X = batch
    for n, layer in enumerate(ext.network.layers):
        X, _ = layer.forward(X, batch.mask)
        inputs[n + 1] = X
    base_scores = forward_from(ext.network, X, batch.mask, len(ext.network.layers))[:, 0]

    def start_layer(name):
        if name.startswith("layer"):
            return int(name[5:name.index(".")])
        return len(ext.network.layers) if name.startswith("out.") else None

    def loss_at(start):
        if start is None:
            f = base_scores
        else:
            f = forward_from(ext.network, inputs[start], batch.mask, start)[:, 0]
        return sll_loss_and_grads(f, ext.transitions, gold)[0]

    errors = {}
    for name in names:
        start = start_layer(name)
        flat = params[name].reshape(-1)
        num = np.empty(flat.size, dtype=np.longdouble)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + eps
            lp = loss_at(start)
            flat[k] = keep - eps
            lm = loss_at(start)
            flat[k] = keep
            num[k] = (lp - lm) / (2 * eps)
        num = num.astype(DTYPE)
        ana = grads[name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
        errors[name] = float(np.max(np.abs(ana - num) / denom)) if flat.size else 0.0
    return errors


def gradient_check(bundle: ModelBundle, enc: EncodedSentence, gold, epsilon: float = 1e-5, names=None) -> float:
    return max(gradient_check_errors(bundle, enc, gold, epsilon, names).values())


def random_gradcheck_case(topology: str, hidden: int = 8, input_dim: int = 12, length: int = 5, seed: int = 1):
    """A random model, dense input sentence and gold path for gradient checking."""
    rng = np.random.default_rng(seed)
    config = TrainConfig(topology=topology, hidden=hidden, feature_mode="embedding", seed=seed)
    net = NetworkModel(topology, input_dim, hidden, seed=seed, feature_mode="embedding")
    tr = TransitionMatrix(rng.normal(size=(N_TAGS, N_TAGS)), rng.normal(size=N_TAGS))
    bundle = ModelBundle(net, tr, config)
    enc = EncodedSentence("embedding", False, input_dim, rng.normal(size=(length, input_dim)))
    gold = rng.integers(0, N_TAGS, size=length)
    return bundle, enc, gold

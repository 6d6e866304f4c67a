"""Character-level prosodic boundary prediction with stacked FFNN/BLSTM layers."""

from .corpus import AnnotatedSentence, parse_corpus, split_corpus, synth_toy_corpus, write_corpus
from .embeddings import EmbeddingTable, load_embeddings_text, save_embeddings_text, train_skipgram
from .evaluation import PrfMetrics, emit_report, f_score, score_prf
from .features import LEVELS, TAGS, CharDictionary, build_dictionary, encode_embedding, encode_onehot
from .inference import TransitionMatrix, brute_force_paths, log_partition, sentence_score, viterbi_decode
from .layers import NetworkModel, network_backward, network_forward
from .modelio import load_model, save_model
from .training import (ModelBundle, TrainConfig, cascade_run, fit, gradient_check, predict_cascade,
                       sll_loss_and_grads, train_epoch, train_level)

__version__ = "0.1.0"

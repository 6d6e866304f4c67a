"""
Decoding a tag lattice
======================

Network scores plus transition scores define a score for every tag path.
Viterbi finds the best one; forward-backward gives log Z and per-position
tag probabilities. For short sentences we can check both by enumeration.
"""

import numpy as np

from prosodynn.features import tag_names
from prosodynn.inference import TransitionMatrix, brute_force_paths, log_partition, viterbi_decode

rng = np.random.default_rng(0)
f = rng.normal(size=(5, 3))  # positions x tags (B, NB, O)
tr = TransitionMatrix(rng.normal(size=(3, 3)), rng.normal(size=3))

path, best = viterbi_decode(f, tr)
print("best path:", tag_names(path), "score", round(float(best), 4))

# the same answer by brute force over 3**5 paths
paths = brute_force_paths(f, tr)
print("enumerated best:", round(float(max(s for _, s in paths)), 4))

logz, marg = log_partition(f, tr)
print("log Z:", round(float(logz), 6))
print("P(tag_t = g):")
print(np.round(marg, 3))

# a large transition bonus for B -> B pulls the whole path toward B
tr.S[0, 0] += 5.0
print("with B->B bonus:", tag_names(viterbi_decode(f, tr)[0]))

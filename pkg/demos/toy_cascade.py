"""
Training the three-level cascade on the toy corpus
==================================================

The toy corpus marks word ends as PW boundaries, every second word end in a
clause as PPH and every fourth as IPH. We train PW first, then PPH and IPH
with the previous level's predicted tag as one extra input dimension.
"""

from prosodynn.corpus import synth_toy_corpus
from prosodynn.evaluation import format_report, score_prf
from prosodynn.features import LEVELS, tag_names
from prosodynn.training import TrainConfig, cascade_run, predict_cascade

train, valid = synth_toy_corpus(1, 120), synth_toy_corpus(2, 30)
test = synth_toy_corpus(3, 30)

s = train[0]
print("".join(s.chars))
for lv in LEVELS:
    print(f"  {lv:3s}", " ".join(s.tags(lv)))

# small models and a short schedule keep this demo under a minute
configs = {lv: TrainConfig(level=lv, topology="FB", hidden=12, learning_rate=3e-3,
                           max_epochs=40, patience=10) for lv in LEVELS}
bundles, history = cascade_run(train, valid, configs,
                               on_epoch=lambda r: print(f"epoch {r.epoch:3d} valid error {r.valid_error:.3f}")
                               if r.epoch % 10 == 0 else None)

for lv in LEVELS:
    print(lv, "input dim", bundles[lv].network.input_dim, "epochs", len(history[lv]))

preds = predict_cascade([bundles[lv] for lv in LEVELS], [s.chars for s in test])
metrics = {lv: score_prf([p[lv] for p in preds], [s.tags(lv) for s in test]) for lv in LEVELS}
print(format_report(metrics))
print("first test sentence, predicted PPH:", tag_names(preds[0]["PPH"]))

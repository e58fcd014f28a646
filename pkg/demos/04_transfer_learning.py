#!/usr/bin/env python3
"""Label-budget transfer curves on a coupled synthetic corpus.

The generator couples the two label sequences: agreements are positive
reactions, disagreements negative ones, and both emit from one shared token
pool, so each task's evidence helps the other. We cap sentiment labels at a
small budget and let dialog-act labels grow: the sentiment score keeps
improving even though no extra sentiment label was added.

This is a scaled-down sketch; the full contrast (with both-poor baselines,
three seeds, and both directions) runs in tests/test_acceptance.py.
"""

import time

from sentact import analysis, training
from sentact.corpus import SplitSet
from sentact.model import ModelConfig
from sentact.training import TrainConfig

spec = analysis.transfer_synthetic_spec()
dialogs = analysis.generate_dialogs(spec, 120, seed=7)
splits = SplitSet(train=dialogs[:72], dev=dialogs[72:86], test=dialogs[86:])

mc = ModelConfig(vocab_size=1, embed_dim=16, lstm_hidden=16, dialog_hidden=16,
                 dropout_rate=0.0)
tc = TrainConfig(lr_grid=(0.04,), max_epochs=30, restarts=1, seed=0,
                 target_task="sentiment")

CAP = 10
print(f"sentiment labels capped at {CAP} dialogs; dialog-act budget grows")
print("budget  sent-F1  da-F1   (sentiment-poor regime)")
t0 = time.time()
reports = training.transfer_experiment(
    splits, "sentiment-poor", [CAP, 36, 72], mc, tc, cap=CAP)
for r in reports:
    print(f"{r.budget_point:6d}  {r.test_sentiment_f1:7.3f}  {r.test_da_f1:5.3f}")
print(f"({time.time() - t0:.0f}s)")

print("\nhow the regimes translate to per-task label budgets at budget 72:")
for regime in training.REGIMES:
    budget = training.regime_budget(regime, 72, CAP, "sentiment")
    print(f"  {regime:16s} sentiment={budget.n_sentiment_dialogs:<4} "
          f"dialog-act={budget.n_da_dialogs}")

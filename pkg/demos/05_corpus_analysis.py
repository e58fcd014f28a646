#!/usr/bin/env python3
"""Correlation analyses over a labeled dialog corpus.

Computes how sentiment moves from one post to the next conditioned on the
current dialog act, how often each label changes between adjacent posts,
and how sentiment is distributed at the start versus the end of dialogs.
"""

from sentact import analysis
from sentact.corpus import DA_LABELS, SENTIMENT_LABELS

spec = analysis.default_synthetic_spec()
dialogs = analysis.generate_dialogs(spec, 400, seed=23)
print(f"{len(dialogs)} dialogs, {sum(len(d) for d in dialogs)} posts")

rates = analysis.change_rates(dialogs)
print(f"\nadjacent-post change rates over {rates.n_pairs} pairs:")
print(f"  sentiment  {rates.sentiment:.3f}")
print(f"  dialog act {rates.dialog_act:.3f}")
print("(sentiment is the stickier annotation: it changes less often)")

table = analysis.transition_log_probs(dialogs)
print("\nmost likely next sentiment per (previous sentiment, dialog act),")
print("for conditions with at least 25 observations:")
print(analysis.polarity_pattern_table(table, min_count=25))

pos = analysis.positional_sentiment(dialogs)
names = [lab.name.lower() for lab in SENTIMENT_LABELS]
print("\nsentiment at dialog boundaries:")
print(f"  first post: " + "  ".join(f"{n}={v:.2f}" for n, v in zip(names, pos.first)))
print(f"  last post:  " + "  ".join(f"{n}={v:.2f}" for n, v in zip(names, pos.last)))

# the raw table behind transition plots: log p(s_t | d_t, s_{t-1} = neutral)
neutral_row = 1 + 2
log_p = table.log_probs()
print("\nlog p(next sentiment | dialog act, previous = neutral):")
print(f"{'act':<14}" + "".join(f"{n:>10}" for n in names))
for di, da in enumerate(DA_LABELS):
    if table.counts[neutral_row, di].sum() == 0:
        continue
    row = log_p[neutral_row, di]
    cells = "".join(f"{v:10.2f}" for v in row)
    print(f"{da.name:<14}{cells}")

#!/usr/bin/env python3
"""Walk through the corpus pipeline on a small threaded dialog.

A reply forest arrives as tree-TSV (one post per line); we parse it into
trees, expand every root-to-leaf branch into its own dialog, normalize the
27-code annotation alphabet down to the 15 retained dialog-act labels, and
build a vocabulary from the training side of a leak-free split.
"""

import tempfile
from pathlib import Path

from sentact import corpus

# Two trees: a chain, and a root with two replies (so it has two branches).
# Note p4 carries the code Y (confirm answer): it normalizes to A (agreement).
# Post p6 carries U (too ambiguous): it is dropped and the thread re-chained.
RAW = """\
# tree_id  post_id  reply_to  sentiment  dialog_act  tokens
t1\tp1\t-\t*\tQ\tis the new release out yet ?
t1\tp2\tp1\t+\tW\tyes , shipped this morning !
t1\tp3\tp2\t+\tT\tthanks , downloading now
t2\tp4\t-\t-\tI\tthe upgrade broke my setup again
t2\tp5\tp4\t-\tY\tsame here , second time this month
t2\tp6\tp4\t*\tU\t( deleted )
t2\tp7\tp6\t+\tS\ttry rolling back the config first
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.tsv"
    path.write_text(RAW, encoding="utf-8")
    trees = corpus.parse_corpus(path)

print(f"parsed {len(trees)} trees")
for tree in trees:
    print(f"  {tree.tree_id}: root {tree.root_id}, {len(tree.posts)} posts")

print("\nnormalization examples:")
for code in ("Y", "N", "G", "I", "U"):
    print(f"  {code} -> {corpus.normalize_da_code(code)}")

dialogs = corpus.linearize_forest(trees)
print(f"\n{len(dialogs)} branch dialogs after linearization:")
for d in dialogs:
    chain = " -> ".join(p.post_id for p in d.posts)
    print(f"  {d.branch_id}: {chain}")
print("(p7 now replies to p4: the removed post was spliced out)")

splits = corpus.make_splits(trees, ratios=(0.5, 0.25, 0.25), seed=1)
print(f"\nsplit sizes in branch dialogs (whole trees stay together): "
      f"train={len(splits.train)} dev={len(splits.dev)} test={len(splits.test)}")

vocab = corpus.build_vocabulary(dialogs, min_count=1)
print(f"\nvocabulary of {vocab.size} entries (index 0 reserved for unknowns)")
sample = dialogs[0]
print(f"encoded {sample.branch_id!r}: {corpus.encode_dialog(sample, vocab)}")

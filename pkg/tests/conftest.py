import numpy as np
import pytest

from sentact.corpus import (
    DA_LABELS,
    SENTIMENT_LABELS,
    DialogTree,
    LabeledPost,
    LinearDialog,
)

# The running example dialog: a 12-post chain with its gold labels.
TABLE1_ROWS = [
    ("-", "I", "because this is getting way too much attention it wasn't even that funny URL"),
    ("+", "I", "LMAO"),
    ("*", "O", "why you still on twitter though ?"),
    ("-", "W", "i'm trying to get all my other friends to get on here before i deactivate !"),
    ("-", "I", "I might have to do that too . Some ain't migrated yet . It's an issue ."),
    ("-", "I", "some of my mutuals are waiting for more leftists go get on here"),
    ("*", "O", "and i'm like \U0001f644 what are you waiting for ? ? ?"),
    ("-", "I", "then again i did have to spend hours to figure out how to work this site haha"),
    ("-", "Q", "lol was it that hard ? ?"),
    ("-", "W", "i'm not that good with technology or websites"),
    ("-", "A", "so yeah .."),
    ("-", "A", "well yeah , the whole instances thing is kind of confusing tbh ."),
]


def table1_tsv() -> str:
    lines = []
    for i, (sent, da, text) in enumerate(TABLE1_ROWS):
        reply = "-" if i == 0 else f"p{i - 1}"
        lines.append(f"t1\tp{i}\t{reply}\t{sent}\t{da}\t{text}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def table1_path(tmp_path):
    path = tmp_path / "table1.tsv"
    path.write_text(table1_tsv(), encoding="utf-8")
    return path


def make_tree(parents, tree_id="t", rng=None):
    """Build a DialogTree from a parent array (parents[0] must be None)."""
    rng = rng or np.random.default_rng(0)
    posts = {}
    children = {}
    for i, parent in enumerate(parents):
        pid = f"{tree_id}n{i}"
        reply = None if parent is None else f"{tree_id}n{parent}"
        posts[pid] = LabeledPost(
            post_id=pid,
            reply_to=reply,
            tokens=(f"tok{int(rng.integers(5))}",),
            sentiment=SENTIMENT_LABELS[int(rng.integers(3))],
            dialog_act=DA_LABELS[int(rng.integers(15))],
        )
        children[pid] = []
    for i, parent in enumerate(parents):
        if parent is not None:
            children[f"{tree_id}n{parent}"].append(f"{tree_id}n{i}")
    return DialogTree(
        tree_id=tree_id,
        posts=posts,
        root_id=f"{tree_id}n0",
        children={k: tuple(v) for k, v in children.items()},
    )


def random_parents(rng, n_nodes):
    return [None] + [int(rng.integers(i)) for i in range(1, n_nodes)]


def chain_dialog(labels, dialog_id="d", tokens=("hello", "there")):
    """A LinearDialog from a list of (sentiment, dialog_act) pairs."""
    posts = []
    for i, (sent, da) in enumerate(labels):
        posts.append(
            LabeledPost(
                post_id=f"{dialog_id}p{i}",
                reply_to=None if i == 0 else f"{dialog_id}p{i - 1}",
                tokens=tuple(tokens),
                sentiment=sent,
                dialog_act=da,
            )
        )
    return LinearDialog(posts=tuple(posts), source_tree_id=dialog_id, leaf_id=posts[-1].post_id)

"""Threaded-dialog corpus handling.

Parses tree-TSV corpora into reply trees, linearizes each tree into one
dialog per root-to-leaf branch, normalizes the 27-code annotation alphabet
down to the 15 retained dialog-act labels, builds vocabularies from the
training split only, and produces splits that never share a post.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np


class CorpusError(Exception):
    """Base class for corpus parsing and structure problems."""


class CorpusFormatError(CorpusError):
    """A line that does not conform to the tree-TSV format."""

    def __init__(self, message, path=None, line_no=None):
        loc = f"{path}:{line_no}: " if line_no is not None else ""
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line_no = line_no


class CorpusStructureError(CorpusError):
    """Reply links that do not form a forest (dangling ids, cycles, duplicates)."""


class SentimentLabel(Enum):
    POSITIVE = "+"
    NEGATIVE = "-"
    NEUTRAL = "*"

    @property
    def code(self) -> str:
        return self.value


SENTIMENT_LABELS: tuple[SentimentLabel, ...] = (
    SentimentLabel.POSITIVE,
    SentimentLabel.NEGATIVE,
    SentimentLabel.NEUTRAL,
)

_SENTIMENT_BY_CODE = {lab.value: lab for lab in SentimentLabel}


class DialogActLabel(Enum):
    """The 15 retained dialog-act labels, in canonical report order."""

    QUESTION_YN = "Q"
    QUESTION_OPEN = "O"
    STATEMENT = "I"
    AGREEMENT = "A"
    DISAGREEMENT = "D"
    ANSWER = "W"
    OFFER = "E"
    REQUEST = "R"
    SUGGEST = "S"
    ACKNOWLEDGE = "F"
    GREETING = "H"
    THANKING = "T"
    EXCLAMATION = "J"
    PERFORMATIVE = "V"
    SYMPATHY = "M"

    @property
    def code(self) -> str:
        return self.value


DA_LABELS: tuple[DialogActLabel, ...] = tuple(DialogActLabel)

_DA_BY_CODE = {lab.value: lab for lab in DialogActLabel}

# Rare-label merges applied after annotation; each maps onto a retained label.
DA_MERGES = {
    "Y": "A",  # confirm answer -> agreement
    "N": "D",  # disconfirm answer -> disagreement
    "P": "A",  # accept offer/request/suggest -> agreement
    "L": "D",  # decline offer/request/suggest -> disagreement
    "B": "F",  # negative acknowledgement -> acknowledgement
    "G": "H",  # goodbye -> greeting
    "X": "M",  # apology -> sympathy
    "C": "A",  # accept apology -> agreement
    "K": "A",  # accept thanking -> agreement
}

# Codes whose posts are dropped outright: too ambiguous, malformed, misc.
DA_REMOVED_CODES = frozenset({"U", "Z", "*"})

RAW_DA_CODES = frozenset(_DA_BY_CODE) | frozenset(DA_MERGES) | DA_REMOVED_CODES

WITHHELD = "?"  # label hidden from training (transfer regimes)


class _Removed:
    """Sentinel for annotation codes whose posts are removed from dialogs."""

    def __repr__(self):
        return "Removed"


REMOVED = _Removed()


def normalize_da_code(raw: str):
    """Map one 27-alphabet annotator code to a retained label or REMOVED."""
    if raw in _DA_BY_CODE:
        return _DA_BY_CODE[raw]
    if raw in DA_MERGES:
        return _DA_BY_CODE[DA_MERGES[raw]]
    if raw in DA_REMOVED_CODES:
        return REMOVED
    raise ValueError(f"unknown dialog-act code {raw!r}")


@dataclass(frozen=True)
class LabeledPost:
    post_id: str
    reply_to: str | None
    tokens: tuple[str, ...]
    sentiment: SentimentLabel | None = None
    dialog_act: DialogActLabel | None = None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"post {self.post_id!r} has no tokens")


@dataclass(frozen=True)
class DialogTree:
    tree_id: str
    posts: dict  # post_id -> LabeledPost
    root_id: str
    children: dict  # post_id -> tuple of child ids, input order

    def leaf_ids(self) -> list[str]:
        return [pid for pid in self.posts if not self.children.get(pid)]


@dataclass(frozen=True)
class LinearDialog:
    """One root-to-leaf branch of a tree, root first."""

    posts: tuple[LabeledPost, ...]
    source_tree_id: str
    leaf_id: str

    def __len__(self):
        return len(self.posts)

    @property
    def branch_id(self) -> str:
        return f"{self.source_tree_id}:{self.leaf_id}"

    def post_ids(self) -> set[str]:
        return {p.post_id for p in self.posts}


@dataclass
class SplitSet:
    train: list
    dev: list
    test: list

    def all_dialogs(self):
        return self.train + self.dev + self.test


@dataclass
class ParseReport:
    n_lines: int = 0
    n_posts: int = 0
    n_removed_posts: int = 0
    n_trees: int = 0


def _parse_line(line, path, line_no):
    cols = line.split("\t")
    if len(cols) != 6:
        raise CorpusFormatError(
            f"expected 6 tab-separated columns, got {len(cols)}", path, line_no
        )
    tree_id, post_id, reply_to, sent_code, da_code, text = cols
    if not tree_id or not post_id:
        raise CorpusFormatError("empty tree_id or post_id", path, line_no)
    if sent_code == WITHHELD:
        sentiment = None
    elif sent_code in _SENTIMENT_BY_CODE:
        sentiment = _SENTIMENT_BY_CODE[sent_code]
    else:
        raise CorpusFormatError(f"bad sentiment code {sent_code!r}", path, line_no)
    if da_code == WITHHELD:
        da = None
    elif da_code in RAW_DA_CODES:
        da = normalize_da_code(da_code)
    else:
        raise CorpusFormatError(f"bad dialog-act code {da_code!r}", path, line_no)
    tokens = tuple(text.split())
    if not tokens:
        raise CorpusFormatError("post has no tokens", path, line_no)
    return tree_id, post_id, reply_to if reply_to != "-" else None, sentiment, da, tokens


def _check_acyclic(parent_of, tree_id):
    seen_done = set()
    for start in parent_of:
        path = []
        node = start
        while node is not None and node not in seen_done:
            if node in path:
                cycle = path[path.index(node) :] + [node]
                raise CorpusStructureError(
                    f"cycle in tree {tree_id!r}: {' -> '.join(cycle)}"
                )
            path.append(node)
            node = parent_of.get(node)
        seen_done.update(path)


def _drop_removed(order, parent_of, removed_ids):
    """Re-chain replies across removed posts; removed roots split the tree."""
    new_parent = {}
    for pid in order:
        if pid in removed_ids:
            continue
        anc = parent_of.get(pid)
        while anc is not None and anc in removed_ids:
            anc = parent_of.get(anc)
        new_parent[pid] = anc
    return new_parent


def _build_trees(tree_id, order, records):
    """Assemble DialogTrees for one tree_id worth of parsed records."""
    parent_of = {pid: records[pid][0] for pid in order}
    for pid in order:
        parent = parent_of[pid]
        if parent is not None and parent not in records:
            raise CorpusStructureError(
                f"dangling reply_to {parent!r} (from post {pid!r} in tree {tree_id!r})"
            )
    _check_acyclic(parent_of, tree_id)

    removed = {pid for pid in order if records[pid][2] is REMOVED}
    parent_of = _drop_removed(order, parent_of, removed)
    kept = [pid for pid in order if pid not in removed]
    if not kept:
        return [], len(removed)

    child_ids = collections.defaultdict(list)  # input order preserved
    for pid in kept:
        if parent_of[pid] is not None:
            child_ids[parent_of[pid]].append(pid)

    trees = []
    roots = [pid for pid in kept if parent_of[pid] is None]
    for k, root in enumerate(roots):
        posts = {}
        queue = [root]
        while queue:
            pid = queue.pop(0)
            reply_to, sentiment, da, tokens = records[pid]
            posts[pid] = LabeledPost(pid, parent_of[pid], tokens, sentiment, da)
            queue.extend(child_ids.get(pid, ()))
        tid = tree_id if k == 0 else f"{tree_id}#{k}"
        trees.append(
            DialogTree(
                tree_id=tid,
                posts=posts,
                root_id=root,
                children={pid: tuple(child_ids.get(pid, ())) for pid in posts},
            )
        )
    return trees, len(removed)


def parse_corpus_with_report(path) -> tuple[list[DialogTree], ParseReport]:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    report = ParseReport()
    per_tree_order = collections.defaultdict(list)  # tree_id -> post ids
    per_tree_records = collections.defaultdict(dict)  # tree_id -> pid -> record
    tree_order = []
    seen_post_ids = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            report.n_lines += 1
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            tree_id, post_id, reply_to, sentiment, da, tokens = _parse_line(
                line, path, line_no
            )
            if post_id in seen_post_ids:
                raise CorpusStructureError(f"duplicate post_id {post_id!r}")
            seen_post_ids.add(post_id)
            if tree_id not in per_tree_records:
                tree_order.append(tree_id)
            per_tree_order[tree_id].append(post_id)
            per_tree_records[tree_id][post_id] = (reply_to, sentiment, da, tokens)
            report.n_posts += 1

    trees = []
    for tree_id in tree_order:
        built, n_removed = _build_trees(
            tree_id, per_tree_order[tree_id], per_tree_records[tree_id]
        )
        report.n_removed_posts += n_removed
        trees.extend(built)
    report.n_trees = len(trees)
    return trees, report


def parse_corpus(path) -> list[DialogTree]:
    """Parse a tree-TSV file into one DialogTree per connected reply component."""
    trees, _ = parse_corpus_with_report(path)
    return trees


def linearize(tree: DialogTree) -> list[LinearDialog]:
    """Expand a reply tree into one dialog per root-to-leaf branch."""
    dialogs = []
    stack = [(tree.root_id, [tree.root_id])]
    while stack:
        pid, trail = stack.pop()
        kids = tree.children.get(pid, ())
        if not kids:
            dialogs.append(
                LinearDialog(
                    posts=tuple(tree.posts[p] for p in trail),
                    source_tree_id=tree.tree_id,
                    leaf_id=pid,
                )
            )
            continue
        # push reversed so that the leftmost child is explored first
        for kid in reversed(kids):
            stack.append((kid, trail + [kid]))
    return dialogs


def linearize_forest(trees) -> list[LinearDialog]:
    out = []
    for tree in trees:
        out.extend(linearize(tree))
    return out


def chain_to_tree(dialog: LinearDialog) -> DialogTree:
    """View a branch dialog as its own single-chain tree (posts re-threaded
    in sequence order). Useful for writing generated dialogs as tree-TSV."""
    posts = {}
    children = {}
    prev = None
    for post in dialog.posts:
        if post.reply_to != prev:
            post = LabeledPost(post.post_id, prev, post.tokens,
                               post.sentiment, post.dialog_act)
        posts[post.post_id] = post
        if prev is not None:
            children[prev] = (post.post_id,)
        prev = post.post_id
    return DialogTree(
        tree_id=dialog.source_tree_id,
        posts=posts,
        root_id=dialog.posts[0].post_id,
        children=children,
    )


UNK_INDEX = 0
UNK_TOKEN = "<UNK>"


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-index map; index 0 is reserved for unknown tokens."""

    token_to_index: dict

    @property
    def size(self) -> int:
        return len(self.token_to_index) + 1

    def encode_token(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def decode_index(self, index: int) -> str:
        if index == UNK_INDEX:
            return UNK_TOKEN
        return self._index_to_token()[index]

    def _index_to_token(self):
        return {i: t for t, i in self.token_to_index.items()}


def build_vocabulary(train, min_count: int = 1) -> Vocabulary:
    """Count tokens over the training dialogs and keep those with count >= min_count.

    Indices are assigned by descending count, ties broken lexicographically,
    starting at 1 (0 stays reserved for UNK), so the mapping is deterministic.
    """
    if not train:
        raise ValueError("cannot build a vocabulary from an empty training set")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = collections.Counter()
    for dialog in train:
        for post in dialog.posts:
            counts.update(post.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(token_to_index={t: i for i, t in enumerate(kept, start=1)})


def encode_dialog(dialog: LinearDialog, vocab: Vocabulary) -> list[list[int]]:
    """Token index sequences per post, ragged; unknown tokens map to UNK."""
    return [[vocab.encode_token(t) for t in post.tokens] for post in dialog.posts]


def make_splits(trees, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitSet:
    """Split whole trees into train/dev/test and linearize each side.

    Assignment is per-tree, so every branch of a tree lands in the same split
    and no post id can appear on two sides.
    """
    if not trees:
        raise ValueError("no trees to split")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be 3 values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(trees))
    shuffled = [trees[i] for i in order]
    n = len(shuffled)
    cut1 = round(ratios[0] * n)
    cut2 = round((ratios[0] + ratios[1]) * n)
    return SplitSet(
        train=linearize_forest(shuffled[:cut1]),
        dev=linearize_forest(shuffled[cut1:cut2]),
        test=linearize_forest(shuffled[cut2:]),
    )


def _label_codes(post):
    sent = post.sentiment.code if post.sentiment is not None else WITHHELD
    da = post.dialog_act.code if post.dialog_act is not None else WITHHELD
    return sent, da


def write_tree_tsv(trees, path) -> None:
    """Write trees back out in the 6-column tree-TSV format."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for tree in trees:
            for pid, post in tree.posts.items():
                sent, da = _label_codes(post)
                reply = post.reply_to if post.reply_to is not None else "-"
                fh.write(
                    f"{tree.tree_id}\t{pid}\t{reply}\t{sent}\t{da}\t"
                    f"{' '.join(post.tokens)}\n"
                )


def write_linearized_tsv(dialogs, path, predictions=None) -> None:
    """Write branch dialogs as TSV: branch_id, turn_index, then the 6 tree-TSV
    columns. When predictions are given (one (sentiment, dialog_act) pair per
    post per dialog), two predicted-label columns are appended."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d_idx, dialog in enumerate(dialogs):
            for turn, post in enumerate(dialog.posts):
                sent, da = _label_codes(post)
                reply = post.reply_to if post.reply_to is not None else "-"
                row = (
                    f"{dialog.branch_id}\t{turn}\t{dialog.source_tree_id}\t"
                    f"{post.post_id}\t{reply}\t{sent}\t{da}\t{' '.join(post.tokens)}"
                )
                if predictions is not None:
                    pred_sent, pred_da = predictions[d_idx][turn]
                    row += f"\t{pred_sent.code}\t{pred_da.code}"
                fh.write(row + "\n")


def label_distributions(dialogs):
    """Empirical sentiment and dialog-act distributions over labeled posts."""
    sent_counts = collections.Counter()
    da_counts = collections.Counter()
    for dialog in dialogs:
        for post in dialog.posts:
            if post.sentiment is not None:
                sent_counts[post.sentiment] += 1
            if post.dialog_act is not None:
                da_counts[post.dialog_act] += 1
    sent_total = sum(sent_counts.values()) or 1
    da_total = sum(da_counts.values()) or 1
    return (
        {lab: sent_counts[lab] / sent_total for lab in SENTIMENT_LABELS},
        {lab: da_counts[lab] / da_total for lab in DA_LABELS},
    )


def convert_released_corpus(path):
    """Converter stub for an externally released annotated corpus.

    The engine consumes the local tree-TSV format only. Dropping in an
    external release requires mapping its files onto the 6 columns
    (tree id, post id, reply-to, sentiment code, dialog-act code, tokens)
    and feeding the result to parse_corpus. No such release ships with
    this package, so there is nothing to convert yet.
    """
    raise NotImplementedError(
        "no released-corpus layout is bundled; convert your corpus to tree-TSV "
        "(see README) and use parse_corpus instead"
    )

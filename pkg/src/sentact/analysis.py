"""Corpus analyses: sentiment-transition tables conditioned on the current
dialog act, label-change dynamics, positional sentiment trends, and a
synthetic-dialog generator driven by the same transition structure.

Transition estimates are p = (count + alpha) / (total + 3*alpha) per
(previous sentiment, current dialog act) row; alpha defaults to 0 so the
reported numbers are raw relative frequencies, and a log of 0 is carried
as -inf (rendered as the string "-inf" in CSV output).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    DA_LABELS,
    SENTIMENT_LABELS,
    DialogActLabel,
    LabeledPost,
    LinearDialog,
    SentimentLabel,
)

START = "START"
PREV_STATES = (START,) + SENTIMENT_LABELS

_SENT_IDX = {lab: i for i, lab in enumerate(SENTIMENT_LABELS)}
_DA_IDX = {lab: i for i, lab in enumerate(DA_LABELS)}


def _prev_name(prev) -> str:
    return prev if prev == START else prev.name


@dataclass
class TransitionTable:
    """Counts and probabilities of s_t given (s_{t-1} or START, d_t)."""

    counts: np.ndarray  # (4, 15, 3) int64
    alpha: float = 0.0

    @classmethod
    def empty(cls, alpha: float = 0.0):
        return cls(np.zeros((len(PREV_STATES), len(DA_LABELS), len(SENTIMENT_LABELS)),
                            dtype=np.int64), alpha)

    def observe(self, prev, da, sent):
        p = 0 if prev == START else 1 + _SENT_IDX[prev]
        self.counts[p, _DA_IDX[da], _SENT_IDX[sent]] += 1

    def probs(self) -> np.ndarray:
        """Smoothed conditional probabilities; rows with no mass and alpha=0
        are NaN (absent)."""
        counts = self.counts.astype(float)
        totals = counts.sum(axis=2, keepdims=True)
        k = counts.shape[2]
        num = counts + self.alpha
        den = totals + k * self.alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            p = num / den
        return p

    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.probs())


def transition_log_probs(dialogs, alpha: float = 0.0) -> TransitionTable:
    """Accumulate sentiment-transition counts over fully labeled dialogs."""
    table = TransitionTable.empty(alpha)
    for dialog in dialogs:
        prev = START
        for post in dialog.posts:
            if post.sentiment is None or post.dialog_act is None:
                raise ValueError(f"post {post.post_id!r} is missing a gold label")
            table.observe(prev, post.dialog_act, post.sentiment)
            prev = post.sentiment
    return table


@dataclass
class ChangeRates:
    sentiment: float
    dialog_act: float
    n_pairs: int


def change_rates(dialogs) -> ChangeRates:
    """Fraction of adjacent post pairs whose label differs, per task."""
    sent_changes = da_changes = pairs = 0
    for dialog in dialogs:
        for a, b in zip(dialog.posts, dialog.posts[1:]):
            for post in (a, b):
                if post.sentiment is None or post.dialog_act is None:
                    raise ValueError(f"post {post.post_id!r} is missing a gold label")
            pairs += 1
            sent_changes += a.sentiment != b.sentiment
            da_changes += a.dialog_act != b.dialog_act
    if pairs == 0:
        return ChangeRates(0.0, 0.0, 0)
    return ChangeRates(sent_changes / pairs, da_changes / pairs, pairs)


@dataclass
class PositionalSentiment:
    first: np.ndarray  # 3-way distribution at turn 0
    last: np.ndarray  # 3-way distribution at the final turn
    bin_counts: np.ndarray  # (10, 3) counts by relative position decile


def positional_sentiment(dialogs) -> PositionalSentiment:
    first = np.zeros(3)
    last = np.zeros(3)
    bins = np.zeros((10, 3))
    for dialog in dialogs:
        n = len(dialog.posts)
        for t, post in enumerate(dialog.posts):
            if post.sentiment is None:
                raise ValueError(f"post {post.post_id!r} is missing a sentiment label")
            s = _SENT_IDX[post.sentiment]
            if t == 0:
                first[s] += 1
            if t == n - 1:
                last[s] += 1
            rel = 0.0 if n == 1 else t / (n - 1)
            bins[min(int(rel * 10), 9), s] += 1
    def norm(v):
        total = v.sum()
        return v / total if total > 0 else v
    return PositionalSentiment(norm(first), norm(last), bins)


# ---------------------------------------------------------------------------
# CSV / report emitters
# ---------------------------------------------------------------------------

def _fmt_log(x) -> str:
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "-inf"
    return f"{x:.6f}"


def write_transition_csv(table: TransitionTable, path) -> None:
    """`prev_sent,da,sent,count,log_prob`, one row per defined cell."""
    log_p = table.log_probs()
    totals = table.counts.sum(axis=2)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prev_sent", "da", "sent", "count", "log_prob"])
        for pi, prev in enumerate(PREV_STATES):
            for di, da in enumerate(DA_LABELS):
                if totals[pi, di] == 0 and table.alpha == 0.0:
                    continue  # undefined-mass row
                for si, sent in enumerate(SENTIMENT_LABELS):
                    writer.writerow(
                        [
                            _prev_name(prev),
                            da.code,
                            sent.name,
                            int(table.counts[pi, di, si]),
                            _fmt_log(log_p[pi, di, si]),
                        ]
                    )


def write_transition_long_csv(table: TransitionTable, path) -> None:
    """Plot-ready long format: one row per (condition panel, da, sentiment)."""
    log_p = table.log_probs()
    totals = table.counts.sum(axis=2)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "da", "sent", "log_prob"])
        for pi, prev in enumerate(PREV_STATES):
            for di, da in enumerate(DA_LABELS):
                if totals[pi, di] == 0 and table.alpha == 0.0:
                    continue
                for si, sent in enumerate(SENTIMENT_LABELS):
                    writer.writerow(
                        [_prev_name(prev), da.code, sent.name, _fmt_log(log_p[pi, di, si])]
                    )


def polarity_pattern_table(table: TransitionTable, min_count: int = 1) -> str:
    """Most likely next sentiment for every observed (previous sentiment,
    dialog act) condition. These are empirical corpus patterns, not rules."""
    probs = table.probs()
    totals = table.counts.sum(axis=2)
    lines = [f"{'prev':<10}{'da':<16}{'n':>5}  most-likely next sentiment"]
    for pi, prev in enumerate(PREV_STATES):
        for di, da in enumerate(DA_LABELS):
            n = int(totals[pi, di])
            if n < min_count:
                continue
            si = int(np.argmax(probs[pi, di]))
            lines.append(
                f"{_prev_name(prev):<10}{da.name:<16}{n:>5}  "
                f"{SENTIMENT_LABELS[si].name} (p={probs[pi, di, si]:.2f})"
            )
    return "\n".join(lines)


def write_positional_csv(pos: PositionalSentiment, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["where", *[lab.name for lab in SENTIMENT_LABELS]])
        writer.writerow(["first", *[f"{v:.6f}" for v in pos.first]])
        writer.writerow(["last", *[f"{v:.6f}" for v in pos.last]])
        for b in range(10):
            row = pos.bin_counts[b]
            total = row.sum()
            dist = row / total if total > 0 else row
            writer.writerow([f"bin_{b * 10}_{b * 10 + 10}", *[f"{v:.6f}" for v in dist]])


def write_change_rates_json(rates: ChangeRates, path) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "sentiment_change_rate": rates.sentiment,
                "dialog_act_change_rate": rates.dialog_act,
                "n_adjacent_pairs": rates.n_pairs,
            },
            indent=2,
        ),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# synthetic corpus generator
# ---------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    """A dialog process with coupled sentiment/dialog-act structure.

    Dialog acts follow a first-order Markov chain; each post's sentiment is
    drawn conditioned on the current act and the previous sentiment (START
    at turn 0). Post text is emitted from small act- and sentiment-indexed
    token pools plus shared noise tokens, so both labels are recoverable
    from text to a degree controlled by the pool sizes.
    """

    da_labels: tuple
    da_start: np.ndarray
    da_trans: np.ndarray  # (k, k), rows sum to 1
    sent_table: np.ndarray  # (4, k, 3): START + 3 previous sentiments
    min_len: int = 2
    max_len: int = 8
    da_pool_size: int = 6
    sent_pool_size: int = 6
    noise_pool_size: int = 30
    n_da_tokens: int = 2
    n_sent_tokens: int = 2
    n_noise_tokens: int = 1
    # chance that a sentiment slot actually emits a sentiment token rather
    # than noise; below 1.0 the transition structure carries real weight
    sent_token_prob: float = 1.0
    # acts sharing a pool name emit indistinguishable tokens, so telling them
    # apart requires the sentiment-transition structure (and vice versa)
    da_pool_names: dict | None = None

    def __post_init__(self):
        k = len(self.da_labels)
        self.da_start = np.asarray(self.da_start, dtype=float)
        self.da_trans = np.asarray(self.da_trans, dtype=float)
        self.sent_table = np.asarray(self.sent_table, dtype=float)
        assert self.da_start.shape == (k,)
        assert self.da_trans.shape == (k, k)
        assert self.sent_table.shape == (4, k, 3)
        for name, arr in (("da_start", self.da_start[None, :]),
                          ("da_trans", self.da_trans),
                          ("sent_table", self.sent_table.reshape(-1, 3))):
            if not np.allclose(arr.sum(axis=-1), 1.0, atol=1e-9):
                raise ValueError(f"{name} rows must sum to 1")


_SENT_TAG = {SentimentLabel.POSITIVE: "pos", SentimentLabel.NEGATIVE: "neg",
             SentimentLabel.NEUTRAL: "neu"}


def _emit_tokens(spec: SyntheticSpec, da, sent, rng) -> tuple:
    pool = da.code.lower()
    if spec.da_pool_names is not None:
        pool = spec.da_pool_names.get(da, pool)
    toks = []
    for _ in range(spec.n_da_tokens):
        toks.append(f"w{pool}{rng.integers(spec.da_pool_size)}")
    for _ in range(spec.n_sent_tokens):
        if rng.random() < spec.sent_token_prob:
            toks.append(f"w{_SENT_TAG[sent]}{rng.integers(spec.sent_pool_size)}")
        else:
            toks.append(f"noise{rng.integers(spec.noise_pool_size)}")
    for _ in range(spec.n_noise_tokens):
        toks.append(f"noise{rng.integers(spec.noise_pool_size)}")
    order = rng.permutation(len(toks))
    return tuple(toks[i] for i in order)


def generate_dialogs(spec: SyntheticSpec, n_dialogs: int, seed: int,
                     id_prefix: str = "syn") -> list:
    """Sample chain dialogs (one branch per tree) from the spec's process."""
    rng = np.random.default_rng([seed, 0x5E17])
    dialogs = []
    k = len(spec.da_labels)
    for d_idx in range(n_dialogs):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        posts = []
        da_idx = None
        prev_row = 0  # START
        for t in range(length):
            if t == 0:
                da_idx = int(rng.choice(k, p=spec.da_start))
            else:
                da_idx = int(rng.choice(k, p=spec.da_trans[da_idx]))
            da = spec.da_labels[da_idx]
            s_idx = int(rng.choice(3, p=spec.sent_table[prev_row, da_idx]))
            sent = SENTIMENT_LABELS[s_idx]
            prev_row = 1 + s_idx
            pid = f"{id_prefix}{d_idx}p{t}"
            posts.append(
                LabeledPost(
                    post_id=pid,
                    reply_to=None if t == 0 else f"{id_prefix}{d_idx}p{t - 1}",
                    tokens=_emit_tokens(spec, da, sent, rng),
                    sentiment=sent,
                    dialog_act=da,
                )
            )
        dialogs.append(
            LinearDialog(
                posts=tuple(posts),
                source_tree_id=f"{id_prefix}{d_idx}",
                leaf_id=posts[-1].post_id,
            )
        )
    return dialogs


def default_synthetic_spec() -> SyntheticSpec:
    """A five-act process with strong act/sentiment coupling: agreements
    preserve polarity, disagreements flip it or turn it negative."""
    labels = (
        DialogActLabel.STATEMENT,
        DialogActLabel.QUESTION_YN,
        DialogActLabel.AGREEMENT,
        DialogActLabel.DISAGREEMENT,
        DialogActLabel.ANSWER,
    )
    da_start = [0.50, 0.30, 0.05, 0.05, 0.10]
    da_trans = [
        [0.35, 0.25, 0.15, 0.15, 0.10],  # after a statement
        [0.15, 0.05, 0.15, 0.15, 0.50],  # after a question
        [0.40, 0.20, 0.20, 0.05, 0.15],  # after an agreement
        [0.30, 0.15, 0.10, 0.30, 0.15],  # after a disagreement
        [0.35, 0.20, 0.15, 0.15, 0.15],  # after an answer
    ]
    #                 I                 Q                 A                 D                 W
    sent_table = [
        [[0.25, 0.30, 0.45], [0.15, 0.25, 0.60], [0.60, 0.15, 0.25], [0.10, 0.65, 0.25], [0.25, 0.35, 0.40]],  # START
        [[0.55, 0.15, 0.30], [0.35, 0.15, 0.50], [0.80, 0.05, 0.15], [0.10, 0.55, 0.35], [0.45, 0.20, 0.35]],  # prev positive
        [[0.15, 0.55, 0.30], [0.15, 0.35, 0.50], [0.05, 0.80, 0.15], [0.30, 0.45, 0.25], [0.20, 0.45, 0.35]],  # prev negative
        [[0.20, 0.25, 0.55], [0.15, 0.20, 0.65], [0.40, 0.15, 0.45], [0.10, 0.50, 0.40], [0.25, 0.30, 0.45]],  # prev neutral
    ]
    return SyntheticSpec(
        da_labels=labels,
        da_start=da_start,
        da_trans=da_trans,
        sent_table=sent_table,
    )


def recovery_synthetic_spec() -> SyntheticSpec:
    """Three acts drawn uniformly at every step, so every conditional cell
    collects enough mass for tight Monte Carlo recovery of the table."""
    labels = (
        DialogActLabel.STATEMENT,
        DialogActLabel.AGREEMENT,
        DialogActLabel.DISAGREEMENT,
    )
    uniform = np.full((3, 3), 1.0 / 3.0)
    #                 I                 A                 D
    sent_table = [
        [[0.30, 0.30, 0.40], [0.70, 0.10, 0.20], [0.10, 0.70, 0.20]],  # START
        [[0.60, 0.15, 0.25], [0.80, 0.10, 0.10], [0.10, 0.70, 0.20]],  # prev positive
        [[0.15, 0.60, 0.25], [0.10, 0.80, 0.10], [0.60, 0.20, 0.20]],  # prev negative
        [[0.25, 0.25, 0.50], [0.60, 0.20, 0.20], [0.10, 0.60, 0.30]],  # prev neutral
    ]
    return SyntheticSpec(
        da_labels=labels,
        da_start=np.full(3, 1.0 / 3.0),
        da_trans=uniform,
        sent_table=sent_table,
        min_len=4,
        max_len=8,
    )


def transfer_synthetic_spec() -> SyntheticSpec:
    """A process built so that each task leans on the other's evidence.

    Agreements and disagreements emit from one shared "reaction" pool, so
    separating them requires tracking polarity across turns: an agreement
    keeps the previous post's polarity, a disagreement flips it or turns it
    negative. Sentiment pools are large enough that a handful of dialogs
    cannot cover them, which is what makes label-budget contrasts visible.
    """
    labels = (
        DialogActLabel.STATEMENT,
        DialogActLabel.QUESTION_YN,
        DialogActLabel.AGREEMENT,
        DialogActLabel.DISAGREEMENT,
        DialogActLabel.ANSWER,
    )
    da_start = [0.40, 0.25, 0.125, 0.125, 0.10]
    da_trans = [
        [0.15, 0.15, 0.30, 0.30, 0.10],
        [0.10, 0.05, 0.10, 0.10, 0.65],
        [0.25, 0.15, 0.25, 0.25, 0.10],
        [0.20, 0.12, 0.24, 0.34, 0.10],
        [0.25, 0.13, 0.26, 0.26, 0.10],
    ]
    # each act has a sharp sentiment signature: agreements are positive
    # reactions, disagreements negative ones (both emitting from the shared
    # pool), questions neutralize, statements persist the previous polarity,
    # answers lean negative; so polarity and act identity carry each other
    #                 I                 Q                 A                 D                 W
    sent_table = [
        [[0.30, 0.30, 0.40], [0.06, 0.06, 0.88], [0.85, 0.05, 0.10], [0.05, 0.85, 0.10], [0.30, 0.45, 0.25]],  # START
        [[0.75, 0.05, 0.20], [0.06, 0.06, 0.88], [0.90, 0.04, 0.06], [0.05, 0.85, 0.10], [0.40, 0.35, 0.25]],  # prev positive
        [[0.05, 0.75, 0.20], [0.06, 0.06, 0.88], [0.04, 0.90, 0.06], [0.40, 0.45, 0.15], [0.15, 0.60, 0.25]],  # prev negative
        [[0.25, 0.25, 0.50], [0.05, 0.05, 0.90], [0.85, 0.05, 0.10], [0.05, 0.85, 0.10], [0.25, 0.45, 0.30]],  # prev neutral
    ]
    return SyntheticSpec(
        da_labels=labels,
        da_start=da_start,
        da_trans=da_trans,
        sent_table=sent_table,
        min_len=3,
        max_len=8,
        da_pool_size=20,
        sent_pool_size=30,
        noise_pool_size=30,
        n_da_tokens=2,
        n_sent_tokens=1,
        n_noise_tokens=1,
        sent_token_prob=0.65,
        da_pool_names={
            DialogActLabel.AGREEMENT: "react",
            DialogActLabel.DISAGREEMENT: "react",
        },
    )


def recovered_vs_true(table: TransitionTable, spec: SyntheticSpec) -> float:
    """Largest |estimated - true| transition probability over the spec's
    dialog acts, restricted to cells the estimate actually observed."""
    probs = table.probs()
    worst = 0.0
    for prev_row in range(4):
        for local_idx, da in enumerate(spec.da_labels):
            di = _DA_IDX[da]
            if table.counts[prev_row, di].sum() == 0:
                continue
            diff = np.abs(probs[prev_row, di] - spec.sent_table[prev_row, local_idx])
            worst = max(worst, float(diff.max()))
    return worst

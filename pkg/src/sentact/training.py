"""Multi-task training loop, model-selection protocol, and transfer harness.

Training is per-dialog SGD over both cross-entropy losses with equal weight
by default; posts missing a gold label contribute nothing for that task.
Model selection sweeps a learning-rate grid with a fixed number of random
restarts, tunes the epoch on the development set by checkpoint retention,
and only then touches the test set, exactly once per selected model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import model as model_mod
from .autodiff import Tape, Tensor
from .corpus import Vocabulary
from .model import DA_INDEX, SENT_INDEX, ModelConfig, ModelParams

REGIMES = ("both-rich", "sentiment-poor", "dialog-act-poor", "both-poor", "mono-task")

TARGET_TASKS = ("sentiment", "dialog_act")


class DivergenceError(RuntimeError):
    """Raised when every run of a protocol diverged."""


@dataclass(frozen=True)
class TrainConfig:
    lr_grid: tuple = (0.1, 0.01, 0.001)
    max_epochs: int = 500
    restarts: int = 2
    seed: int = 0
    target_task: str = "sentiment"
    loss_weight_sentiment: float = 1.0
    loss_weight_da: float = 1.0
    min_count: int = 1
    divergence_limit: float = 1e6

    def __post_init__(self):
        if not self.lr_grid:
            raise ValueError("lr_grid must be non-empty")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.target_task not in TARGET_TASKS:
            raise ValueError(f"target_task must be one of {TARGET_TASKS}")


@dataclass(frozen=True)
class Budget:
    """Per-task caps on the number of label-carrying training dialogs.

    None means unlimited. Dialogs beyond a task's cap have that task's gold
    labels physically removed, so a capped run cannot read them.
    """

    n_sentiment_dialogs: int | None = None
    n_da_dialogs: int | None = None


@dataclass
class RunReport:
    regime: str
    budget: Budget
    budget_point: int | None
    seed: int
    lr: float
    epoch: int
    dev_metric: float
    test_sentiment_f1: float | None
    test_da_f1: float | None
    n_runs: int
    diverged: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "budget_sentiment": self.budget.n_sentiment_dialogs,
            "budget_da": self.budget.n_da_dialogs,
            "budget_point": self.budget_point,
            "seed": self.seed,
            "lr": self.lr,
            "epoch": self.epoch,
            "dev_metric": self.dev_metric,
            "test_sentiment_f1": self.test_sentiment_f1,
            "test_da_f1": self.test_da_f1,
            "n_runs": self.n_runs,
            "diverged": self.diverged,
        }


@dataclass
class FitResult:
    params: ModelParams
    vocab: Vocabulary
    report: RunReport


def encode_set(dialogs, vocab: Vocabulary):
    """Pair each dialog with its ragged token-index sequences."""
    return [(d, corpus_mod.encode_dialog(d, vocab)) for d in dialogs]


def multitask_loss(tape, sent_logits, da_logits, posts, w_sent=1.0, w_da=1.0) -> Tensor:
    """Summed cross-entropy over both tasks; absent labels contribute zero."""
    if not (len(sent_logits) == len(da_logits) == len(posts)):
        raise ValueError("outputs are not aligned with the dialog's posts")
    total = None
    for s_log, d_log, post in zip(sent_logits, da_logits, posts):
        terms = []
        if post.sentiment is not None and w_sent != 0.0:
            ce = ad.softmax_cross_entropy(tape, s_log, SENT_INDEX[post.sentiment])
            if w_sent != 1.0:
                ce = ad.mul(tape, ce, Tensor(np.asarray(w_sent)))
            terms.append(ce)
        if post.dialog_act is not None and w_da != 0.0:
            ce = ad.softmax_cross_entropy(tape, d_log, DA_INDEX[post.dialog_act])
            if w_da != 1.0:
                ce = ad.mul(tape, ce, Tensor(np.asarray(w_da)))
            terms.append(ce)
        for term in terms:
            total = term if total is None else ad.add(tape, total, term)
    return total if total is not None else Tensor(np.zeros(()))


def train_one_epoch(params, encoded_train, lr, rng, w_sent=1.0, w_da=1.0,
                    divergence_limit=1e6) -> float:
    """One seeded-shuffle pass of per-dialog SGD; returns the mean dialog loss."""
    order = rng.permutation(len(encoded_train))
    losses = []
    for i in order:
        dialog, token_seqs = encoded_train[i]
        tape = Tape()
        sent_logits, da_logits = model_mod.forward(
            tape, params, token_seqs, rng=rng, training=True
        )
        loss = multitask_loss(tape, sent_logits, da_logits, dialog.posts, w_sent, w_da)
        value = float(loss.data)
        if not np.isfinite(value) or value > divergence_limit:
            raise DivergenceError(f"loss {value} exceeded divergence guard")
        if loss.size == 1 and len(tape) > 0:
            ad.backward(tape, loss)
            ad.sgd_step(params.parameters(), lr)
        losses.append(value)
    return float(np.mean(losses)) if losses else 0.0


def evaluate(params, encoded):
    """Inference-mode scoring of both tasks over a list of encoded dialogs."""
    gold, pred = [], []
    for dialog, token_seqs in encoded:
        decoded = model_mod.predict(params, token_seqs)
        for post, (ps, pd) in zip(dialog.posts, decoded):
            gold.append((post.sentiment, post.dialog_act))
            pred.append((ps, pd))
    return metrics_mod.score_predictions(gold, pred)


def _target_score(sent_report, da_report, target_task):
    return sent_report.score if target_task == "sentiment" else da_report.score


def fit(train, dev, model_config: ModelConfig, train_config: TrainConfig,
        test=None, regime="both-rich", budget=None, budget_point=None) -> FitResult:
    """Grid-search learning rate and restarts, tune the epoch on dev, keep the
    best checkpoint, and score the test set once at the end."""
    if not train or not dev:
        raise ValueError("train and dev must be non-empty")
    budget = budget if budget is not None else Budget()
    vocab = corpus_mod.build_vocabulary(train, min_count=train_config.min_count)
    mc = replace(model_config, vocab_size=vocab.size)
    enc_train = encode_set(train, vocab)
    enc_dev = encode_set(dev, vocab)

    w_sent = train_config.loss_weight_sentiment
    w_da = train_config.loss_weight_da

    root_seq = np.random.SeedSequence(train_config.seed)
    n_runs = len(train_config.lr_grid) * train_config.restarts
    run_seqs = root_seq.spawn(n_runs)

    best = None  # (metric, lr, epoch, snapshot)
    diverged = []
    run_idx = 0
    for lr in train_config.lr_grid:
        for restart in range(train_config.restarts):
            rng = np.random.default_rng(run_seqs[run_idx])
            run_idx += 1
            params = ModelParams(mc, rng)
            try:
                for epoch in range(1, train_config.max_epochs + 1):
                    train_one_epoch(
                        params, enc_train, lr, rng, w_sent, w_da,
                        train_config.divergence_limit,
                    )
                    sent_rep, da_rep = evaluate(params, enc_dev)
                    metric = _target_score(sent_rep, da_rep, train_config.target_task)
                    if best is None or metric > best[0]:
                        best = (metric, lr, epoch, params.snapshot())
                    if best[0] >= 1.0:
                        break  # no later epoch can improve the dev metric
            except (DivergenceError, ad.NonFiniteError) as exc:
                diverged.append({"lr": lr, "restart": restart, "reason": str(exc)})
                continue
    if best is None:
        raise DivergenceError(f"all {n_runs} runs diverged: {diverged}")

    metric, lr, epoch, snapshot = best
    final = ModelParams(mc, rng=None)
    final.restore(snapshot)

    test_sent = test_da = None
    if test:
        sent_rep, da_rep = evaluate(final, encode_set(test, vocab))
        test_sent, test_da = sent_rep.score, da_rep.score

    report = RunReport(
        regime=regime,
        budget=budget,
        budget_point=budget_point,
        seed=train_config.seed,
        lr=lr,
        epoch=epoch,
        dev_metric=metric,
        test_sentiment_f1=test_sent,
        test_da_f1=test_da,
        n_runs=n_runs,
        diverged=diverged,
    )
    return FitResult(params=final, vocab=vocab, report=report)


# ---------------------------------------------------------------------------
# label budgets and transfer regimes
# ---------------------------------------------------------------------------

def apply_budget(train, budget: Budget, seed: int):
    """Return a copy of the training dialogs with labels beyond the budget
    physically removed.

    Dialogs are shuffled once with the given seed; the first N dialogs of
    that order keep each task's labels, so the two tasks' labeled subsets
    are nested prefixes of the same order.
    """
    n = len(train)
    n_sent = n if budget.n_sentiment_dialogs is None else budget.n_sentiment_dialogs
    n_da = n if budget.n_da_dialogs is None else budget.n_da_dialogs
    if n_sent > n or n_da > n:
        raise ValueError(f"budget {budget} exceeds training-set size {n}")
    rng = np.random.default_rng([seed, 0xB0D6E7])
    order = rng.permutation(n)
    out = []
    for rank, i in enumerate(order):
        dialog = train[i]
        keep_sent = rank < n_sent
        keep_da = rank < n_da
        if keep_sent and keep_da:
            out.append(dialog)
            continue
        posts = tuple(
            replace(
                post,
                sentiment=post.sentiment if keep_sent else None,
                dialog_act=post.dialog_act if keep_da else None,
            )
            for post in dialog.posts
        )
        out.append(replace(dialog, posts=posts))
    return out


def regime_budget(regime: str, budget_point: int, cap: int,
                  target_task: str = "sentiment") -> Budget:
    """Translate a (regime, curve point) pair into per-task label budgets."""
    b = budget_point
    if regime == "both-rich":
        return Budget(b, b)
    if regime == "sentiment-poor":
        return Budget(min(b, cap), b)
    if regime == "dialog-act-poor":
        return Budget(b, min(b, cap))
    if regime == "both-poor":
        return Budget(min(b, cap), min(b, cap))
    if regime == "mono-task":
        if target_task == "sentiment":
            return Budget(b, 0)
        return Budget(0, b)
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def _has_any_label(dialog) -> bool:
    return any(
        p.sentiment is not None or p.dialog_act is not None for p in dialog.posts
    )


def transfer_experiment(splits, regime: str, budget_points, model_config: ModelConfig,
                        train_config: TrainConfig, cap: int = 38,
                        csv_path=None) -> list:
    """Train under a label-budget regime at each curve point and report test
    F1 for both tasks. Budgets must be ascending and within the training set."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    points = list(budget_points)
    if points != sorted(points):
        raise ValueError("budget points must be ascending")
    if points and points[-1] > len(splits.train):
        raise ValueError(
            f"budget {points[-1]} exceeds training-set size {len(splits.train)}"
        )
    reports = []
    for b in points:
        budget = regime_budget(regime, b, cap, train_config.target_task)
        tc = train_config
        if regime == "mono-task":
            if train_config.target_task == "sentiment":
                tc = replace(train_config, loss_weight_da=0.0)
            else:
                tc = replace(train_config, loss_weight_sentiment=0.0)
        budgeted = apply_budget(splits.train, budget, train_config.seed)
        # dialogs with no labels at all contribute no gradient; skip them
        budgeted = [d for d in budgeted if _has_any_label(d)]
        if not budgeted:
            raise ValueError(f"budget point {b} leaves no labeled training dialog")
        result = fit(
            budgeted, splits.dev, model_config, tc, test=splits.test,
            regime=regime, budget=budget, budget_point=b,
        )
        reports.append(result.report)
    if csv_path is not None:
        write_curve_csv(reports, csv_path)
    return reports


CURVE_FIELDS = ("regime", "budget", "seed", "lr", "epoch", "sent_f1", "da_f1")


def write_curve_csv(reports, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_FIELDS)
        for r in reports:
            writer.writerow(
                [
                    r.regime,
                    r.budget_point,
                    r.seed,
                    r.lr,
                    r.epoch,
                    f"{r.test_sentiment_f1:.6f}" if r.test_sentiment_f1 is not None else "",
                    f"{r.test_da_f1:.6f}" if r.test_da_f1 is not None else "",
                ]
            )


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CVReport:
    fold_sizes: list
    fold_metrics: list
    mean_metric: float
    mean_dev_size: float


def cv_folds(dialogs, folds: int, seed: int):
    """Partition dialogs into folds at the dialog-tree level (dev lists)."""
    groups = {}
    for d in dialogs:
        groups.setdefault(d.source_tree_id, []).append(d)
    keys = list(groups)
    if len(keys) < folds:
        raise ValueError(
            f"need at least {folds} distinct trees for {folds}-fold CV, got {len(keys)}"
        )
    rng = np.random.default_rng([seed, 0xCF01D])
    order = rng.permutation(len(keys))
    out = [[] for _ in range(folds)]
    for i, k in enumerate(order):
        out[int(i % folds)].extend(groups[keys[k]])
    return out


def cross_validate(dialogs, model_config: ModelConfig, train_config: TrainConfig,
                   folds: int = 10) -> CVReport:
    """K-fold cross-validation with folds drawn at the dialog-tree level, so
    branches sharing posts can never straddle a fold boundary."""
    partition = cv_folds(dialogs, folds, train_config.seed)
    fold_sizes = []
    fold_metrics = []
    for fold, dev in enumerate(partition):
        train = [d for other, lst in enumerate(partition) if other != fold for d in lst]
        result = fit(train, dev, model_config, train_config)
        fold_sizes.append(len(dev))
        fold_metrics.append(result.report.dev_metric)
    return CVReport(
        fold_sizes=fold_sizes,
        fold_metrics=fold_metrics,
        mean_metric=float(np.mean(fold_metrics)),
        mean_dev_size=float(np.mean(fold_sizes)),
    )
"""Command-line entry point for reproducible experiment runs.

Subcommands: ingest, train, eval, transfer, analyze, gradcheck. Every run
writes its primary artifacts plus a manifest and a config snapshot into the
output directory; with an identical config and seed the primary artifacts
are byte-identical across runs (timestamps live only in the manifest).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as analysis_mod
from . import autodiff as ad
from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import model as model_mod
from . import training as training_mod
from .corpus import CorpusError, SplitSet
from .model import ModelConfig
from .training import Budget, DivergenceError, TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3

ENV_PREFIX = "SENTACT_"


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Everything a run needs, assembled from file, environment, and flags."""

    corpus_train: str | None = None
    corpus_dev: str | None = None
    corpus_test: str | None = None
    split_ratios: tuple = (0.8, 0.1, 0.1)
    embed_dim: int = 100
    lstm_hidden: int = 100
    dialog_hidden: int = 100
    dropout: float = 0.4
    lr_grid: tuple = (0.1, 0.01, 0.001)
    max_epochs: int = 500
    restarts: int = 2
    target_task: str = "sentiment"
    loss_weight_sentiment: float = 1.0
    loss_weight_da: float = 1.0
    min_count: int = 1
    budget_sentiment: int | None = None
    budget_da: int | None = None
    regime: str = "both-rich"
    budgets: tuple = ()
    poor_cap: int = 38
    transfer_seeds: tuple = ()  # extra seeds for transfer curves; () = just `seed`
    seed: int = 0
    out: str = "runs/run"
    jobs: int = 1

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            vocab_size=1,  # filled in from the training vocabulary
            embed_dim=self.embed_dim,
            lstm_hidden=self.lstm_hidden,
            dialog_hidden=self.dialog_hidden,
            dropout_rate=self.dropout,
        )

    def train_config(self, seed=None) -> TrainConfig:
        return TrainConfig(
            lr_grid=self.lr_grid,
            max_epochs=self.max_epochs,
            restarts=self.restarts,
            seed=self.seed if seed is None else seed,
            target_task=self.target_task,
            loss_weight_sentiment=self.loss_weight_sentiment,
            loss_weight_da=self.loss_weight_da,
            min_count=self.min_count,
        )

    def to_text(self) -> str:
        lines = []
        for name, value in sorted(vars(self).items()):
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{name}={'' if value is None else value}")
        return "\n".join(lines) + "\n"


_INT_FIELDS = {"embed_dim", "lstm_hidden", "dialog_hidden", "max_epochs",
               "restarts", "min_count", "seed", "jobs", "poor_cap"}
_OPT_INT_FIELDS = {"budget_sentiment", "budget_da"}
_FLOAT_FIELDS = {"dropout", "loss_weight_sentiment", "loss_weight_da"}
_TUPLE_FLOAT_FIELDS = {"lr_grid", "split_ratios"}
_TUPLE_INT_FIELDS = {"budgets", "transfer_seeds"}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name in _INT_FIELDS:
        return int(raw)
    if name in _OPT_INT_FIELDS:
        return None if raw in ("", "unlimited", "none") else int(raw)
    if name in _FLOAT_FIELDS:
        return float(raw)
    if name in _TUPLE_FLOAT_FIELDS:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if name in _TUPLE_INT_FIELDS:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    return None if raw == "" else raw


def load_experiment_config(path=None, env=None, overrides=None) -> ExperimentConfig:
    """Layer key=value file, SENTACT_* environment, then explicit overrides."""
    config = ExperimentConfig()
    known = set(vars(config))

    def apply(name, raw, origin):
        if name not in known:
            raise UsageError(f"unknown config key {name!r} (from {origin})")
        setattr(config, name, _coerce(name, raw))

    if path is not None:
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            apply(key.strip(), raw, f"{path}:{line_no}")
    env = os.environ if env is None else env
    for key, raw in sorted(env.items()):
        if key.startswith(ENV_PREFIX):
            apply(key[len(ENV_PREFIX):].lower(), raw, f"environment {key}")
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)
    return config


# ---------------------------------------------------------------------------
# run directory plumbing
# ---------------------------------------------------------------------------

def _prepare_run_dir(config: ExperimentConfig, command: str):
    run_dir = Path(config.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(config.to_text(), encoding="utf-8")
    manifest = {
        "command": command,
        "version": __version__,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": "config.txt",
        "outputs": [],
    }
    return run_dir, manifest


def _finish(run_dir, manifest, outputs):
    manifest["outputs"] = sorted(outputs)
    manifest["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def _load_splits(config: ExperimentConfig) -> SplitSet:
    if config.corpus_train is None:
        raise UsageError("corpus_train is required (config key or --train)")
    if bool(config.corpus_dev) != bool(config.corpus_test):
        raise UsageError("give both corpus_dev and corpus_test, or neither "
                         "(a single corpus is split by split_ratios)")
    if config.corpus_dev:
        train = corpus_mod.linearize_forest(corpus_mod.parse_corpus(config.corpus_train))
        dev = corpus_mod.linearize_forest(corpus_mod.parse_corpus(config.corpus_dev))
        test = corpus_mod.linearize_forest(corpus_mod.parse_corpus(config.corpus_test))
        return SplitSet(train=train, dev=dev, test=test)
    trees = corpus_mod.parse_corpus(config.corpus_train)
    return corpus_mod.make_splits(trees, config.split_ratios, config.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(config: ExperimentConfig, args) -> int:
    run_dir, manifest = _prepare_run_dir(config, "ingest")
    trees, report = corpus_mod.parse_corpus_with_report(args.corpus)
    if not trees:
        raise CorpusError(f"no dialogs found in {args.corpus}")
    dialogs = corpus_mod.linearize_forest(trees)
    corpus_mod.write_tree_tsv(trees, run_dir / "trees.tsv")
    corpus_mod.write_linearized_tsv(dialogs, run_dir / "branches.tsv")
    sent_dist, da_dist = corpus_mod.label_distributions(dialogs)
    vocab = corpus_mod.build_vocabulary(dialogs, config.min_count)
    stats = {
        "lines": report.n_lines,
        "posts": report.n_posts,
        "posts_removed": report.n_removed_posts,
        "trees": report.n_trees,
        "branch_dialogs": len(dialogs),
        "vocabulary_size": vocab.size - 1,  # real tokens, UNK excluded
        "sentiment_distribution": {lab.name: p for lab, p in sent_dist.items()},
        "dialog_act_distribution": {lab.name: p for lab, p in da_dist.items()},
    }
    (run_dir / "stats.json").write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    print(f"ingested {report.n_trees} trees / {len(dialogs)} branch dialogs / "
          f"{report.n_posts - report.n_removed_posts} posts "
          f"({report.n_removed_posts} removed)")
    for lab, p in da_dist.items():
        print(f"  {lab.name:<14}{100 * p:5.1f}%")
    _finish(run_dir, manifest, ["trees.tsv", "branches.tsv", "stats.json"])
    return EXIT_OK


def _write_vocab(vocab, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for token, idx in sorted(vocab.token_to_index.items(), key=lambda kv: kv[1]):
            fh.write(f"{token}\t{idx}\n")


def _read_vocab(path):
    mapping = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            token, idx = line.rstrip("\n").split("\t")
            mapping[token] = int(idx)
    return corpus_mod.Vocabulary(token_to_index=mapping)


def cmd_train(config: ExperimentConfig, args) -> int:
    run_dir, manifest = _prepare_run_dir(config, "train")
    splits = _load_splits(config)
    budget = Budget(config.budget_sentiment, config.budget_da)
    train = training_mod.apply_budget(splits.train, budget, config.seed)
    result = training_mod.fit(
        train, splits.dev, config.model_config(), config.train_config(),
        test=splits.test, budget=budget,
    )
    model_mod.save_model(result.params, run_dir / "model.ckpt", run_dir / "model.config")
    _write_vocab(result.vocab, run_dir / "vocab.tsv")
    (run_dir / "report.json").write_text(
        json.dumps(result.report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    r = result.report
    print(f"selected lr={r.lr} epoch={r.epoch} dev {config.target_task} metric={r.dev_metric:.4f}")
    if r.test_sentiment_f1 is not None:
        print(f"test sentiment F1 {r.test_sentiment_f1:.4f}  dialog-act wF1 {r.test_da_f1:.4f}")
    _finish(run_dir, manifest, ["model.ckpt", "model.config", "vocab.tsv", "report.json"])
    return EXIT_OK


def cmd_eval(config: ExperimentConfig, args) -> int:
    run_dir, manifest = _prepare_run_dir(config, "eval")
    params = model_mod.load_model(args.checkpoint, args.model_config)
    vocab = _read_vocab(args.vocab)
    dialogs = corpus_mod.linearize_forest(corpus_mod.parse_corpus(args.test))
    encoded = training_mod.encode_set(dialogs, vocab)
    predictions = [model_mod.predict(params, seqs) for _, seqs in encoded]
    corpus_mod.write_linearized_tsv(dialogs, run_dir / "predictions.tsv", predictions)
    sent_rep, da_rep = metrics_mod.score_prediction_file(run_dir / "predictions.tsv")
    (run_dir / "metrics_sentiment.json").write_text(sent_rep.to_json() + "\n", encoding="utf-8")
    (run_dir / "metrics_dialog_act.json").write_text(da_rep.to_json() + "\n", encoding="utf-8")
    print(sent_rep.to_table())
    print()
    print(da_rep.to_table())
    _finish(run_dir, manifest,
            ["predictions.tsv", "metrics_sentiment.json", "metrics_dialog_act.json"])
    return EXIT_OK


def _transfer_one(payload):
    splits, regime, points, mc, tc, cap = payload
    return training_mod.transfer_experiment(splits, regime, points, mc, tc, cap=cap)


def cmd_transfer(config: ExperimentConfig, args) -> int:
    run_dir, manifest = _prepare_run_dir(config, "transfer")
    splits = _load_splits(config)
    if not config.budgets:
        raise UsageError("transfer needs --budgets (ascending dialog counts)")
    seeds = config.transfer_seeds or (config.seed,)
    jobs = []
    for seed in seeds:
        jobs.append((splits, config.regime, list(config.budgets),
                     config.model_config(), config.train_config(seed), config.poor_cap))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_transfer_one, jobs))
    else:
        results = [_transfer_one(j) for j in jobs]
    reports = [r for runs in results for r in runs]
    reports.sort(key=lambda r: (r.regime, r.budget_point, r.seed))
    csv_path = run_dir / "curve.csv"
    training_mod.write_curve_csv(reports, csv_path)
    for r in reports:
        print(f"{r.regime} budget={r.budget_point} seed={r.seed}: "
              f"sent F1 {r.test_sentiment_f1:.4f}  da wF1 {r.test_da_f1:.4f}")
    _finish(run_dir, manifest, ["curve.csv"])
    return EXIT_OK


def cmd_analyze(config: ExperimentConfig, args) -> int:
    run_dir, manifest = _prepare_run_dir(config, "analyze")
    dialogs = corpus_mod.linearize_forest(corpus_mod.parse_corpus(args.corpus))
    table = analysis_mod.transition_log_probs(dialogs, alpha=args.alpha)
    analysis_mod.write_transition_csv(table, run_dir / "transitions.csv")
    analysis_mod.write_transition_long_csv(table, run_dir / "transitions_long.csv")
    (run_dir / "polarity_patterns.txt").write_text(
        analysis_mod.polarity_pattern_table(table) + "\n", encoding="utf-8"
    )
    rates = analysis_mod.change_rates(dialogs)
    analysis_mod.write_change_rates_json(rates, run_dir / "change_rates.json")
    pos = analysis_mod.positional_sentiment(dialogs)
    analysis_mod.write_positional_csv(pos, run_dir / "positional_sentiment.csv")
    print(f"sentiment change rate {rates.sentiment:.3f}, "
          f"dialog-act change rate {rates.dialog_act:.3f} over {rates.n_pairs} pairs")
    _finish(run_dir, manifest, [
        "transitions.csv", "transitions_long.csv", "polarity_patterns.txt",
        "change_rates.json", "positional_sentiment.csv",
    ])
    return EXIT_OK


def _gradcheck_suite(seed: int):
    """Finite-difference checks over every op and the full model."""
    rng = np.random.default_rng(seed)
    checks = []

    def reduce_scalar(tape, t):
        # u^T t v squeezes any (m, n) output to a checkable scalar
        u = ad.Tensor(rng_consts[0][: t.shape[0]].reshape(1, -1))
        v = ad.Tensor(rng_consts[1][: t.shape[1]].reshape(-1, 1))
        return ad.matmul(tape, ad.matmul(tape, u, t), v)

    rng_consts = (rng.normal(size=16), rng.normal(size=16))

    def op_check(name, make):
        checks.append((name, make))

    a_mat = ad.Parameter("a", rng.uniform(-2, 2, (3, 4)))
    b_mat = ad.Parameter("b", rng.uniform(-2, 2, (4, 2)))
    op_check("matmul", lambda tape: reduce_scalar(tape, ad.matmul(tape, a_mat.value, b_mat.value)))

    c_mat = ad.Parameter("c", rng.uniform(-2, 2, (3, 4)))
    bias = ad.Parameter("bias", rng.uniform(-2, 2, (4,)))
    op_check("add_bias", lambda tape: reduce_scalar(tape, ad.add(tape, c_mat.value, bias.value)))

    d_mat = ad.Parameter("d", rng.uniform(-2, 2, (3, 4)))
    e_mat = ad.Parameter("e", rng.uniform(-2, 2, (3, 4)))
    op_check("mul", lambda tape: reduce_scalar(tape, ad.mul(tape, d_mat.value, e_mat.value)))
    op_check("sigmoid", lambda tape: reduce_scalar(tape, ad.sigmoid(tape, d_mat.value)))
    op_check("tanh", lambda tape: reduce_scalar(tape, ad.tanh(tape, d_mat.value)))

    relu_in = rng.uniform(-2, 2, (3, 4))
    relu_in[np.abs(relu_in) < 1e-2] = 0.5  # keep clear of the kink
    f_mat = ad.Parameter("f", relu_in)
    op_check("relu", lambda tape: reduce_scalar(tape, ad.relu(tape, f_mat.value)))

    g_mat = ad.Parameter("g", rng.uniform(-2, 2, (2, 4)))
    h_mat = ad.Parameter("h", rng.uniform(-2, 2, (3, 4)))
    op_check("concat", lambda tape: reduce_scalar(tape, ad.concat(tape, g_mat.value, h_mat.value, axis=0)))

    emb = ad.Parameter("emb", rng.uniform(-2, 2, (5, 4)))
    op_check("embedding", lambda tape: reduce_scalar(
        tape, ad.embedding_lookup(tape, emb.value, [0, 2, 2])))

    logits = ad.Parameter("logits", rng.uniform(-2, 2, (6,)))
    op_check("softmax_ce", lambda tape: ad.softmax_cross_entropy(tape, logits.value, 2))

    results = []
    for name, make in checks:
        params = [p for p in (a_mat, b_mat, c_mat, bias, d_mat, e_mat, f_mat,
                              g_mat, h_mat, emb, logits)]
        err, pname, coord = ad.grad_check(make, params, eps=1e-3)
        results.append((name, err, pname, coord))

    # full hierarchical model on a 2-post dialog
    cfg = model_mod.ModelConfig(vocab_size=9, embed_dim=4, lstm_hidden=3,
                                dialog_hidden=3, dropout_rate=0.0)
    params = model_mod.ModelParams(cfg, np.random.default_rng(seed + 1))
    posts = (
        corpus_mod.LabeledPost("gc0", None, ("a", "b", "c"),
                               corpus_mod.SentimentLabel.POSITIVE,
                               corpus_mod.DialogActLabel.STATEMENT),
        corpus_mod.LabeledPost("gc1", "gc0", ("b", "d"),
                               corpus_mod.SentimentLabel.NEGATIVE,
                               corpus_mod.DialogActLabel.AGREEMENT),
    )
    seqs = [[1, 2, 3], [2, 4]]

    def full_model(tape):
        s, d = model_mod.forward(tape, params, seqs)
        return training_mod.multitask_loss(tape, s, d, posts)

    err, pname, coord = ad.grad_check(full_model, params.parameters(), eps=1e-3)
    results.append(("full_model", err, pname, coord))
    return results


def cmd_gradcheck(config: ExperimentConfig, args) -> int:
    results = _gradcheck_suite(config.seed)
    tol = args.tolerance
    worst = max(results, key=lambda r: r[1])
    failed = [r for r in results if not r[1] < tol]
    for name, err, pname, coord in results:
        status = "ok" if err < tol else "FAIL"
        print(f"{status:>4}  {name:<12} max rel err {err:.3e}  ({pname}[{coord}])")
    print(f"worst: {worst[0]} at {worst[2]}[{worst[3]}] -> {worst[1]:.3e} (tolerance {tol})")
    return EXIT_OK if not failed else EXIT_DIVERGENCE


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="sentact", description=__doc__,
                     epilog="Any config key can also be set through the "
                            "environment as SENTACT_<KEY> (flags beat the "
                            "environment, which beats the config file).",
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value experiment config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="run output directory")
        p.add_argument("--jobs", type=int, help="parallel workers for independent runs")

    p = sub.add_parser("ingest", help="parse a tree-TSV corpus, linearize, report stats")
    p.add_argument("corpus", help="tree-TSV input file")
    common(p)

    p = sub.add_parser("train", help="run the selection protocol, save a checkpoint")
    p.add_argument("--train", dest="corpus_train", help="training tree-TSV")
    p.add_argument("--dev", dest="corpus_dev", help="development tree-TSV")
    p.add_argument("--test", dest="corpus_test", help="test tree-TSV")
    common(p)

    p = sub.add_parser("eval", help="score a checkpoint on a test corpus")
    p.add_argument("checkpoint", help="model.ckpt from a train run")
    p.add_argument("model_config", help="model.config from the same run")
    p.add_argument("vocab", help="vocab.tsv from the same run")
    p.add_argument("test", help="tree-TSV corpus to score")
    common(p)

    p = sub.add_parser("transfer", help="label-budget transfer curves")
    p.add_argument("--train", dest="corpus_train", help="training tree-TSV")
    p.add_argument("--dev", dest="corpus_dev", help="development tree-TSV")
    p.add_argument("--test", dest="corpus_test", help="test tree-TSV")
    p.add_argument("--regime", choices=training_mod.REGIMES, help="label-budget regime")
    p.add_argument("--budgets", help="comma-separated ascending dialog counts")
    common(p)

    p = sub.add_parser("analyze", help="transition tables and dynamics of a labeled corpus")
    p.add_argument("corpus", help="fully labeled tree-TSV corpus")
    p.add_argument("--alpha", type=float, default=0.0, help="additive smoothing")
    common(p)

    p = sub.add_parser("gradcheck", help="finite-difference checks of all ops and the model")
    p.add_argument("--tolerance", type=float, default=1e-4)
    common(p)

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "analyze": cmd_analyze,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {
            key: getattr(args, key, None)
            for key in ("seed", "out", "jobs", "corpus_train", "corpus_dev",
                        "corpus_test", "regime")
        }
        if getattr(args, "budgets", None):
            overrides["budgets"] = tuple(int(b) for b in args.budgets.split(","))
        config = load_experiment_config(getattr(args, "config", None),
                                        overrides=overrides)
        return _COMMANDS[args.command](config, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, ad.NonFiniteError) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())

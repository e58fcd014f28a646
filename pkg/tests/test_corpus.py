import numpy as np
import pytest

from sentact import corpus
from sentact.corpus import (
    DA_LABELS,
    REMOVED,
    SENTIMENT_LABELS,
    CorpusFormatError,
    CorpusStructureError,
    DialogActLabel,
    SentimentLabel,
    build_vocabulary,
    encode_dialog,
    linearize,
    make_splits,
    normalize_da_code,
    parse_corpus,
)

from conftest import TABLE1_ROWS, make_tree, random_parents


def write(tmp_path, text, name="c.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_singleton_tree(tmp_path):
    trees = parse_corpus(write(tmp_path, "d1\tp1\t-\t-\tI\thello world\n"))
    assert len(trees) == 1
    tree = trees[0]
    assert tree.root_id == "p1"
    post = tree.posts["p1"]
    assert post.tokens == ("hello", "world")
    assert post.sentiment is SentimentLabel.NEGATIVE
    assert post.dialog_act is DialogActLabel.STATEMENT


def test_parse_table1_chain(table1_path):
    trees = parse_corpus(table1_path)
    assert len(trees) == 1
    tree = trees[0]
    assert len(tree.posts) == 12
    dialogs = linearize(tree)
    assert len(dialogs) == 1
    got = [(p.sentiment.code, p.dialog_act.code) for p in dialogs[0].posts]
    assert got == [(sent, da) for sent, da, _ in TABLE1_ROWS]


def test_parse_dangling_reply(tmp_path):
    text = "t\tp1\t-\t+\tI\ta\nt\tp3\tp9\t+\tI\tb\n"
    with pytest.raises(CorpusStructureError, match="dangling reply_to 'p9'"):
        parse_corpus(write(tmp_path, text))


def test_parse_cycle(tmp_path):
    text = "t\tp1\tp2\t+\tI\ta\nt\tp2\tp1\t+\tI\tb\n"
    with pytest.raises(CorpusStructureError, match="cycle"):
        parse_corpus(write(tmp_path, text))


def test_parse_duplicate_post_id(tmp_path):
    text = "t\tp1\t-\t+\tI\ta\nu\tp1\t-\t+\tI\tb\n"
    with pytest.raises(CorpusStructureError, match="duplicate post_id"):
        parse_corpus(write(tmp_path, text))


def test_parse_malformed_line_reports_location(tmp_path):
    path = write(tmp_path, "t\tp1\t-\t+\tI\ta\nt\tp2\tp1\t+\tI\n")
    with pytest.raises(CorpusFormatError, match=r":2: expected 6"):
        parse_corpus(path)


@pytest.mark.parametrize("sent,da", [("!", "I"), ("+", "%"), ("", "I")])
def test_parse_bad_codes(tmp_path, sent, da):
    with pytest.raises(CorpusFormatError):
        parse_corpus(write(tmp_path, f"t\tp1\t-\t{sent}\t{da}\ta\n"))


def test_parse_skips_blank_and_comment_lines(tmp_path):
    text = "# header\n\nt\tp1\t-\t+\tI\ta\n   \n"
    assert len(parse_corpus(write(tmp_path, text))) == 1


def test_withheld_labels_parse_to_none(tmp_path):
    trees = parse_corpus(write(tmp_path, "t\tp1\t-\t?\t?\ta b\n"))
    post = trees[0].posts["p1"]
    assert post.sentiment is None and post.dialog_act is None


def test_removed_post_rechains_dialog(tmp_path):
    # p2 carries U (too ambiguous): dropped, p3 re-attaches to p1
    text = (
        "t\tp1\t-\t+\tI\ta\n"
        "t\tp2\tp1\t+\tU\tb\n"
        "t\tp3\tp2\t+\tA\tc\n"
    )
    trees = parse_corpus(write(tmp_path, text))
    assert len(trees) == 1
    tree = trees[0]
    assert set(tree.posts) == {"p1", "p3"}
    assert tree.posts["p3"].reply_to == "p1"
    assert tree.children["p1"] == ("p3",)


def test_removed_root_splits_tree(tmp_path):
    text = (
        "t\tp1\t-\t+\tZ\ta\n"
        "t\tp2\tp1\t+\tI\tb\n"
        "t\tp3\tp1\t+\tI\tc\n"
    )
    trees = parse_corpus(write(tmp_path, text))
    assert len(trees) == 2
    assert sorted(t.root_id for t in trees) == ["p2", "p3"]
    assert sorted(t.tree_id for t in trees) == ["t", "t#1"]


def test_parse_report_counts(table1_path):
    trees, report = corpus.parse_corpus_with_report(table1_path)
    assert report.n_posts == 12
    assert report.n_removed_posts == 0
    assert report.n_trees == 1


# ---------------------------------------------------------------------------
# label normalization
# ---------------------------------------------------------------------------

def test_normalize_merges():
    assert normalize_da_code("Y") is DialogActLabel.AGREEMENT
    assert normalize_da_code("N") is DialogActLabel.DISAGREEMENT
    assert normalize_da_code("P") is DialogActLabel.AGREEMENT
    assert normalize_da_code("L") is DialogActLabel.DISAGREEMENT
    assert normalize_da_code("B") is DialogActLabel.ACKNOWLEDGE
    assert normalize_da_code("G") is DialogActLabel.GREETING
    assert normalize_da_code("X") is DialogActLabel.SYMPATHY
    assert normalize_da_code("C") is DialogActLabel.AGREEMENT
    assert normalize_da_code("K") is DialogActLabel.AGREEMENT


def test_normalize_identity_on_retained():
    for lab in DA_LABELS:
        assert normalize_da_code(lab.code) is lab


def test_normalize_removed_codes():
    for code in ("U", "Z", "*"):
        assert normalize_da_code(code) is REMOVED


def test_normalize_unknown_code():
    with pytest.raises(ValueError):
        normalize_da_code("%")


def test_normalize_total_on_27_codes():
    assert len(corpus.RAW_DA_CODES) == 27
    image = {normalize_da_code(c) for c in corpus.RAW_DA_CODES}
    assert image == set(DA_LABELS) | {REMOVED}


def test_da_label_count():
    assert len(DA_LABELS) == 15
    assert len(SENTIMENT_LABELS) == 3


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

def test_linearize_chain():
    tree = make_tree([None, 0, 1])
    dialogs = linearize(tree)
    assert len(dialogs) == 1
    assert [p.post_id for p in dialogs[0].posts] == ["tn0", "tn1", "tn2"]


def test_linearize_two_children_share_root():
    tree = make_tree([None, 0, 0])
    dialogs = linearize(tree)
    assert len(dialogs) == 2
    assert all(len(d) == 2 for d in dialogs)
    assert all(d.posts[0].post_id == "tn0" for d in dialogs)
    # sibling order follows input order
    assert [d.leaf_id for d in dialogs] == ["tn1", "tn2"]


def test_linearize_random_trees_leaf_count_oracle():
    rng = np.random.default_rng(11)
    for trial in range(30):
        parents = random_parents(rng, 20)
        tree = make_tree(parents, tree_id=f"t{trial}")
        # independent oracle: leaves are nodes that never appear as a parent
        leaves = set(range(20)) - {p for p in parents if p is not None}
        dialogs = linearize(tree)
        assert len(dialogs) == len(leaves)
        assert {d.leaf_id for d in dialogs} == {f"t{trial}n{i}" for i in leaves}
        for d in dialogs:
            assert d.posts[0].post_id == tree.root_id
            for a, b in zip(d.posts, d.posts[1:]):
                assert b.reply_to == a.post_id


def test_linearize_branch_multiset_oracle():
    # every post appears in exactly as many branches as it has leaves below it
    rng = np.random.default_rng(12)
    parents = random_parents(rng, 15)
    tree = make_tree(parents)

    def leaves_below(node):
        kids = [i for i, p in enumerate(parents) if p == node]
        if not kids:
            return 1
        return sum(leaves_below(k) for k in kids)

    from collections import Counter
    seen = Counter()
    for d in linearize(tree):
        seen.update(p.post_id for p in d.posts)
    for i in range(15):
        assert seen[f"tn{i}"] == leaves_below(i)


# ---------------------------------------------------------------------------
# vocabulary and encoding
# ---------------------------------------------------------------------------

def test_vocabulary_sort_rule():
    d = corpus.LinearDialog(
        posts=(corpus.LabeledPost("p", None, ("a", "a", "b")),),
        source_tree_id="t",
        leaf_id="p",
    )
    vocab = build_vocabulary([d], min_count=1)
    assert vocab.token_to_index == {"a": 1, "b": 2}
    assert vocab.size == 3


def test_vocabulary_min_count_filter():
    posts = (
        corpus.LabeledPost("p1", None, ("a", "b")),
        corpus.LabeledPost("p2", "p1", ("b",)),
    )
    d = corpus.LinearDialog(posts=posts, source_tree_id="t", leaf_id="p2")
    vocab = build_vocabulary([d], min_count=2)
    assert vocab.token_to_index == {"b": 1}


def test_vocabulary_deterministic(table1_path):
    dialogs = corpus.linearize_forest(parse_corpus(table1_path))
    v1 = build_vocabulary(dialogs)
    v2 = build_vocabulary(list(dialogs))
    assert v1.token_to_index == v2.token_to_index


def test_vocabulary_empty_and_bad_min_count():
    with pytest.raises(ValueError):
        build_vocabulary([])
    d = corpus.LinearDialog(
        posts=(corpus.LabeledPost("p", None, ("a",)),), source_tree_id="t", leaf_id="p"
    )
    with pytest.raises(ValueError):
        build_vocabulary([d], min_count=0)


def test_encode_dialog_known_and_unk():
    vocab = corpus.Vocabulary(token_to_index={"a": 1, "b": 2})
    posts = (
        corpus.LabeledPost("p1", None, ("a", "b")),
        corpus.LabeledPost("p2", "p1", ("a", "zzz")),
    )
    d = corpus.LinearDialog(posts=posts, source_tree_id="t", leaf_id="p2")
    assert encode_dialog(d, vocab) == [[1, 2], [1, 0]]


def test_encode_decode_roundtrip_for_known_tokens(table1_path):
    dialogs = corpus.linearize_forest(parse_corpus(table1_path))
    vocab = build_vocabulary(dialogs)
    for d in dialogs:
        for post, idxs in zip(d.posts, encode_dialog(d, vocab)):
            decoded = [vocab.decode_index(i) for i in idxs]
            assert decoded == list(post.tokens)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def test_splits_keep_tree_together():
    tree = make_tree([None, 0, 0, 0])  # three branches
    for seed in range(5):
        splits = make_splits([tree], (0.34, 0.33, 0.33), seed=seed)
        sizes = [len(splits.train), len(splits.dev), len(splits.test)]
        assert sorted(sizes) == [0, 0, 3]


def test_splits_exact_ratios_on_divisible_counts():
    trees = [make_tree([None], tree_id=f"t{i}") for i in range(100)]
    splits = make_splits(trees, (0.5, 0.25, 0.25), seed=3)
    assert (len(splits.train), len(splits.dev), len(splits.test)) == (50, 25, 25)


def test_splits_disjoint_post_ids_random_forests():
    rng = np.random.default_rng(21)
    for trial in range(20):
        trees = [
            make_tree(random_parents(rng, int(rng.integers(1, 12))), tree_id=f"f{trial}t{i}")
            for i in range(int(rng.integers(3, 15)))
        ]
        splits = make_splits(trees, (0.6, 0.2, 0.2), seed=trial)
        ids = [set().union(*(d.post_ids() for d in part)) if part else set()
               for part in (splits.train, splits.dev, splits.test)]
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])


def test_splits_errors():
    with pytest.raises(ValueError):
        make_splits([], (0.8, 0.1, 0.1))
    with pytest.raises(ValueError):
        make_splits([make_tree([None])], (0.8, 0.1, 0.2))


def test_splits_deterministic():
    trees = [make_tree([None, 0], tree_id=f"t{i}") for i in range(20)]
    a = make_splits(trees, seed=9)
    b = make_splits(trees, seed=9)
    assert [d.branch_id for d in a.train] == [d.branch_id for d in b.train]


# ---------------------------------------------------------------------------
# TSV round trips
# ---------------------------------------------------------------------------

def test_tree_tsv_roundtrip(tmp_path, table1_path):
    trees = parse_corpus(table1_path)
    out = tmp_path / "again.tsv"
    corpus.write_tree_tsv(trees, out)
    trees2 = parse_corpus(out)
    assert len(trees2) == 1
    assert trees2[0].posts == trees[0].posts
    assert trees2[0].children == trees[0].children


def test_linearized_tsv_with_predictions(tmp_path, table1_path):
    dialogs = corpus.linearize_forest(parse_corpus(table1_path))
    preds = [[(p.sentiment, p.dialog_act) for p in d.posts] for d in dialogs]
    out = tmp_path / "pred.tsv"
    corpus.write_linearized_tsv(dialogs, out, preds)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 12
    first = lines[0].split("\t")
    assert len(first) == 10
    assert first[0] == "t1:p11" and first[1] == "0"
    assert first[8] == "-" and first[9] == "I"


def test_chain_to_tree_roundtrip(table1_path):
    dialogs = corpus.linearize_forest(parse_corpus(table1_path))
    tree = corpus.chain_to_tree(dialogs[0])
    assert linearize(tree)[0].posts == dialogs[0].posts


def test_converter_stub_raises():
    with pytest.raises(NotImplementedError):
        corpus.convert_released_corpus("anything")

"""Two-level hierarchical recurrent network with two classifier heads.

A bi-LSTM reads each post's word embeddings and emits one vector per post
(concatenation of the two directions' final hidden states). A vanilla tanh
RNN runs left-to-right over the post vectors, and each of its hidden states
feeds two small MLPs: one producing sentiment logits, one dialog-act logits.
Posts and dialogs of any length are handled as-is, with no padding.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .corpus import DA_LABELS, SENTIMENT_LABELS

SENT_INDEX = {lab: i for i, lab in enumerate(SENTIMENT_LABELS)}
DA_INDEX = {lab: i for i, lab in enumerate(DA_LABELS)}


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 100
    lstm_hidden: int = 100
    dialog_hidden: int = 100
    dropout_rate: float = 0.4
    n_sentiment: int = 3
    n_da: int = 15

    def __post_init__(self):
        if min(self.vocab_size, self.embed_dim, self.lstm_hidden, self.dialog_hidden) < 1:
            raise ValueError("all model dimensions must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if rng is None:
        return np.zeros(shape)
    return rng.uniform(-limit, limit, size=shape)


class LSTMCell:
    """One direction's gate parameters; each gate sees [x, h_prev] concatenated."""

    GATES = ("i", "f", "o", "c")

    def __init__(self, prefix, in_dim, hidden, rng):
        self.hidden = hidden
        for gate in self.GATES:
            w = Parameter(
                f"{prefix}.W_{gate}", _glorot(rng, in_dim + hidden, hidden, (in_dim + hidden, hidden))
            )
            # forget-gate bias starts at 1 to keep early memory open
            b0 = np.ones(hidden) if gate == "f" else np.zeros(hidden)
            b = Parameter(f"{prefix}.b_{gate}", b0)
            setattr(self, f"W_{gate}", w)
            setattr(self, f"b_{gate}", b)

    def parameters(self):
        out = []
        for gate in self.GATES:
            out.append(getattr(self, f"W_{gate}"))
            out.append(getattr(self, f"b_{gate}"))
        return out


class MLPHead:
    """Affine -> ReLU -> affine classifier head."""

    def __init__(self, prefix, in_dim, hidden, n_classes, rng):
        self.W1 = Parameter(f"{prefix}.W1", _glorot(rng, in_dim, hidden, (in_dim, hidden)))
        self.b1 = Parameter(f"{prefix}.b1", np.zeros(hidden))
        self.W2 = Parameter(f"{prefix}.W2", _glorot(rng, hidden, n_classes, (hidden, n_classes)))
        self.b2 = Parameter(f"{prefix}.b2", np.zeros(n_classes))

    def parameters(self):
        return [self.W1, self.b1, self.W2, self.b2]


class ModelParams:
    """All trainable weights of the hierarchical model."""

    def __init__(self, config: ModelConfig, rng=None):
        self.config = config
        v, d, h, g = config.vocab_size, config.embed_dim, config.lstm_hidden, config.dialog_hidden
        self.embeddings = Parameter("embeddings", _glorot(rng, v, d, (v, d)))
        self.lstm_fwd = LSTMCell("lstm_fwd", d, h, rng)
        self.lstm_bwd = LSTMCell("lstm_bwd", d, h, rng)
        self.dialog_W_h = Parameter("dialog.W_h", _glorot(rng, g, g, (g, g)))
        self.dialog_W_x = Parameter("dialog.W_x", _glorot(rng, 2 * h, g, (2 * h, g)))
        self.dialog_b = Parameter("dialog.b", np.zeros(g))
        self.head_sent = MLPHead("head_sent", g, g, config.n_sentiment, rng)
        self.head_da = MLPHead("head_da", g, g, config.n_da, rng)

    def parameters(self) -> list:
        return (
            [self.embeddings]
            + self.lstm_fwd.parameters()
            + self.lstm_bwd.parameters()
            + [self.dialog_W_h, self.dialog_W_x, self.dialog_b]
            + self.head_sent.parameters()
            + self.head_da.parameters()
        )

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()

    def snapshot(self) -> dict:
        return {p.name: p.value.data.copy() for p in self.parameters()}

    def restore(self, snap: dict) -> None:
        for p in self.parameters():
            src = snap[p.name]
            if src.shape != p.value.shape:
                raise ValueError(
                    f"{p.name}: snapshot shape {src.shape} != model shape {p.value.shape}"
                )
            p.value.data[...] = src


def parameter_count(config: ModelConfig) -> int:
    """Closed-form count of trainable scalars:

        V*d                                   embeddings
      + 2 * 4 * ((d + h)*h + h)               bi-LSTM gates, both directions
      + g*g + 2h*g + g                        dialog-level RNN
      + sum_K (g*g + g + g*K + K)             the two heads, K in {3, 15}
    """
    v, d = config.vocab_size, config.embed_dim
    h, g = config.lstm_hidden, config.dialog_hidden
    total = v * d
    total += 2 * 4 * ((d + h) * h + h)
    total += g * g + 2 * h * g + g
    for k in (config.n_sentiment, config.n_da):
        total += g * g + g + g * k + k
    return total


def _run_lstm(tape, cell: LSTMCell, xs) -> Tensor:
    """Run the LSTM recurrence over a list of (1, d) rows; return final h."""
    h = Tensor(np.zeros((1, cell.hidden)))
    c = Tensor(np.zeros((1, cell.hidden)))
    for x in xs:
        z = ad.concat(tape, x, h, axis=1)
        i = ad.sigmoid(tape, ad.add(tape, ad.matmul(tape, z, cell.W_i.value), cell.b_i.value))
        f = ad.sigmoid(tape, ad.add(tape, ad.matmul(tape, z, cell.W_f.value), cell.b_f.value))
        o = ad.sigmoid(tape, ad.add(tape, ad.matmul(tape, z, cell.W_o.value), cell.b_o.value))
        cand = ad.tanh(tape, ad.add(tape, ad.matmul(tape, z, cell.W_c.value), cell.b_c.value))
        c = ad.add(tape, ad.mul(tape, f, c), ad.mul(tape, i, cand))
        h = ad.mul(tape, o, ad.tanh(tape, c))
    return h


def encode_post(tape, params: ModelParams, token_ids) -> Tensor:
    """Bi-LSTM over one post's embeddings -> (1, 2*lstm_hidden) post vector."""
    if not token_ids:
        raise ValueError("cannot encode an empty post")
    xs = [ad.embedding_lookup(tape, params.embeddings.value, [t]) for t in token_ids]
    h_fwd = _run_lstm(tape, params.lstm_fwd, xs)
    h_bwd = _run_lstm(tape, params.lstm_bwd, list(reversed(xs)))
    return ad.concat(tape, h_fwd, h_bwd, axis=1)


def encode_dialog(tape, params: ModelParams, post_vectors) -> list:
    """Left-to-right tanh RNN over post vectors; one hidden state per post."""
    if not post_vectors:
        raise ValueError("dialog has no posts")
    g = params.dialog_b.value.shape[0]
    h = Tensor(np.zeros((1, g)))
    states = []
    for x in post_vectors:
        pre = ad.add(
            tape,
            ad.add(
                tape,
                ad.matmul(tape, h, params.dialog_W_h.value),
                ad.matmul(tape, x, params.dialog_W_x.value),
            ),
            params.dialog_b.value,
        )
        h = ad.tanh(tape, pre)
        states.append(h)
    return states


def _head_logits(tape, head: MLPHead, h) -> Tensor:
    hid = ad.relu(tape, ad.add(tape, ad.matmul(tape, h, head.W1.value), head.b1.value))
    return ad.add(tape, ad.matmul(tape, hid, head.W2.value), head.b2.value)


def forward(tape, params: ModelParams, token_seqs, rng=None, training=False):
    """Full pass over one encoded dialog.

    Returns (sentiment logits, dialog-act logits), one (1, K) tensor per post.
    Dropout is applied to each post vector before the dialog RNN and to each
    dialog state before the heads (both heads see the same dropped state);
    at inference both sites are the identity.
    """
    cfg = params.config
    if training and cfg.dropout_rate > 0.0 and rng is None:
        raise ValueError("training-mode forward with dropout needs an rng")
    post_vecs = []
    for seq in token_seqs:
        vec = encode_post(tape, params, seq)
        vec = ad.dropout(tape, vec, cfg.dropout_rate, training, rng)
        post_vecs.append(vec)
    sent_logits, da_logits = [], []
    for state in encode_dialog(tape, params, post_vecs):
        state = ad.dropout(tape, state, cfg.dropout_rate, training, rng)
        sent_logits.append(_head_logits(tape, params.head_sent, state))
        da_logits.append(_head_logits(tape, params.head_da, state))
    return sent_logits, da_logits


def predict(params: ModelParams, token_seqs):
    """Argmax decode per post; ties break toward the lowest class index."""
    sent_logits, da_logits = forward(None, params, token_seqs)
    out = []
    for s, d in zip(sent_logits, da_logits):
        si = int(np.argmax(s.data))
        di = int(np.argmax(d.data))
        out.append((SENTIMENT_LABELS[si], DA_LABELS[di]))
    return out


# ---------------------------------------------------------------------------
# persistence: checkpoint plus key=value config sidecar
# ---------------------------------------------------------------------------

_CONFIG_FIELDS = (
    ("vocab_size", int),
    ("embed_dim", int),
    ("lstm_hidden", int),
    ("dialog_hidden", int),
    ("dropout_rate", float),
    ("n_sentiment", int),
    ("n_da", int),
)


def write_model_config(config: ModelConfig, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for name, _ in _CONFIG_FIELDS:
            fh.write(f"{name}={getattr(config, name)}\n")


def read_model_config(path) -> ModelConfig:
    values = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
    kwargs = {name: typ(values[name]) for name, typ in _CONFIG_FIELDS}
    return ModelConfig(**kwargs)


def save_model(params: ModelParams, ckpt_path, config_path) -> None:
    ad.save_parameters(params.parameters(), ckpt_path)
    write_model_config(params.config, config_path)


def load_model(ckpt_path, config_path) -> ModelParams:
    config = read_model_config(config_path)
    params = ModelParams(config, rng=None)
    params.restore(ad.load_parameters(ckpt_path))
    return params

"""sentact: joint dialog-act and sentiment modeling for threaded dialogs.

A self-contained engine: tree-TSV corpus handling, a tape-based reverse-mode
autodiff core, a two-level hierarchical recurrent model (bi-LSTM over words,
vanilla RNN over posts, two MLP heads), the multi-task training and transfer
protocol, the task metrics, and sentiment/dialog-act correlation analyses.
"""

from .corpus import (
    DA_LABELS,
    REMOVED,
    SENTIMENT_LABELS,
    DialogActLabel,
    DialogTree,
    LabeledPost,
    LinearDialog,
    SentimentLabel,
    SplitSet,
    Vocabulary,
    build_vocabulary,
    linearize,
    make_splits,
    normalize_da_code,
    parse_corpus,
)
from .autodiff import (
    NonFiniteError,
    Parameter,
    Tape,
    Tensor,
    backward,
    grad_check,
    sgd_step,
)
from .model import ModelConfig, ModelParams, forward, parameter_count, predict
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    cohen_kappa,
    da_weighted_f1,
    f1_per_class,
    sentiment_macro_f1,
)
from .training import (
    Budget,
    FitResult,
    RunReport,
    TrainConfig,
    cross_validate,
    fit,
    multitask_loss,
    transfer_experiment,
)
from .analysis import (
    SyntheticSpec,
    TransitionTable,
    change_rates,
    default_synthetic_spec,
    generate_dialogs,
    positional_sentiment,
    transition_log_probs,
)

__version__ = "0.1.0"

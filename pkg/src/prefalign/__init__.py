"""Desk-scale laboratory for reference-free preference-alignment objectives.

Exact pair and plane losses with closed-form gradients, finite-difference and
autodiff oracles, a toy tabular policy trainer, BLEU/ROUGE metrics, and a CLI
tying them together.
"""

__version__ = "0.1.0"

from .losses import (  # noqa: F401
    DomainError,
    Family,
    LogProbPair,
    LossParams,
    asft_align_loss,
    asft_align_plane,
    asft_total_loss,
    bt_loss_plane,
    bt_preference_prob,
    dpo_loss,
    ipo_loss,
    log_odds,
    logsigmoid,
    loss_value,
    orpo_loss,
    sft_nll_loss,
    sigmoid,
)
from .gradfield import (  # noqa: F401
    CaseLabel,
    GradField,
    GradPoint,
    GridSpec,
    asft_partials,
    bt_partials,
    classify_case,
    fd_check,
    sweep,
    update_rate_ratio,
)
from .diffcore import Graph, GradReport, grad_check, loss_graph  # noqa: F401
from .toylm import (  # noqa: F401
    ConfigError,
    PolicyModel,
    PreferenceTriple,
    ReferencePolicy,
    TrainingTrajectory,
    generate,
    generate_dataset,
    init_policy,
    sequence_logprob,
    snapshot_reference,
    train,
    train_step,
)
from .evalmetrics import MetricReport, RougeScore, bleu4, rouge_l, rouge_n, score_corpus  # noqa: F401

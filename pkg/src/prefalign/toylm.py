"""Toy categorical language model and a seeded preference-training harness.

The policy is an order-k tabular model: one logit row per context window of k
symbols, softmax over the vocabulary for the next token.  It is the smallest
model that exposes evaluable sequence log-probabilities, which keeps the
training dynamics of the pair losses directly inspectable in the (x1, x2)
plane.  Each training step builds the batch loss as a :mod:`prefalign.diffcore`
graph over the touched logits and applies one plain gradient-descent update.

A training run owns its policy exclusively; frozen snapshots
(:class:`ReferencePolicy`) are safe for concurrent readers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import diffcore
from .losses import (
    REFERENCE_FAMILIES,
    DomainError,
    Family,
    LogProbPair,
    LossParams,
    loss_value,
)

__all__ = [
    "BOS",
    "DEFAULT_LR",
    "ConfigError",
    "PreferenceTriple",
    "PolicyModel",
    "ReferencePolicy",
    "PolicyMetrics",
    "TrajectoryRecord",
    "TrainingTrajectory",
    "init_policy",
    "sequence_logprob",
    "snapshot_reference",
    "train_step",
    "train",
    "corpus_metrics",
    "generate",
    "generate_dataset",
    "dataset_vocab",
    "dataset_digest",
    "write_dataset_jsonl",
    "load_dataset_jsonl",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "save_checkpoint",
    "load_checkpoint",
]

#: Padding symbol prepended to contexts shorter than the model order.
BOS = "<s>"

DEFAULT_LR = 0.05
DEFAULT_CONTEXT_ORDER = 2

TRAJECTORY_HEADER = "step,loss,x1,x2,margin"
CHECKPOINT_FORMAT = "prefalign-policy-v1"

_MAX_TABLE_CELLS = 50_000_000


class ConfigError(ValueError):
    """A run configuration is inconsistent (e.g. DPO without a reference)."""


@dataclass(frozen=True)
class PreferenceTriple:
    """One (prompt, chosen response, rejected response) record."""

    prompt: Tuple[str, ...]
    chosen: Tuple[str, ...]
    rejected: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "prompt", tuple(self.prompt))
        object.__setattr__(self, "chosen", tuple(self.chosen))
        object.__setattr__(self, "rejected", tuple(self.rejected))
        if not self.chosen or not self.rejected:
            raise ValueError("chosen and rejected responses must be non-empty")
        if self.chosen == self.rejected:
            raise ValueError("chosen and rejected responses must differ")

    @classmethod
    def from_strings(cls, prompt: str, chosen: str, rejected: str) -> "PreferenceTriple":
        return cls(tuple(prompt.split()), tuple(chosen.split()), tuple(rejected.split()))


def _validate_vocab(vocab: Sequence[str]) -> Tuple[str, ...]:
    vocab = tuple(vocab)
    if len(vocab) < 2:
        raise ValueError(f"vocabulary needs at least 2 tokens, got {len(vocab)}")
    if len(set(vocab)) != len(vocab):
        raise ValueError("vocabulary contains duplicate tokens")
    for tok in vocab:
        if not tok or any(ch.isspace() for ch in tok):
            raise ValueError(f"tokens must be non-empty and whitespace-free, got {tok!r}")
    if BOS in vocab:
        raise ValueError(f"the padding symbol {BOS!r} is reserved")
    return vocab


class PolicyModel:
    """Order-k tabular categorical model with one logit row per context."""

    def __init__(self, vocab: Sequence[str], order: int, logits: np.ndarray, version: int = 0):
        self.vocab = _validate_vocab(vocab)
        if not (isinstance(order, int) and order >= 1):
            raise ValueError(f"context order must be an integer >= 1, got {order!r}")
        self.order = order
        symbols = (BOS,) + self.vocab
        n_contexts = len(symbols) ** order
        if n_contexts * len(self.vocab) > _MAX_TABLE_CELLS:
            raise ValueError(
                f"context table too large: {n_contexts} contexts x {len(self.vocab)} tokens"
            )
        self.contexts: Tuple[Tuple[str, ...], ...] = tuple(product(symbols, repeat=order))
        self._ctx_index: Dict[Tuple[str, ...], int] = {c: i for i, c in enumerate(self.contexts)}
        self._tok_index: Dict[str, int] = {t: i for i, t in enumerate(self.vocab)}
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != (n_contexts, len(self.vocab)):
            raise ValueError(
                f"logits shape {logits.shape} does not match "
                f"({n_contexts}, {len(self.vocab)})"
            )
        self.logits = logits
        self.version = version

    def token_index(self, token: str) -> int:
        try:
            return self._tok_index[token]
        except KeyError:
            raise ValueError(f"token {token!r} is not in the vocabulary") from None

    def context_row(self, context: Tuple[str, ...]) -> int:
        return self._ctx_index[context]

    def log_softmax_table(self) -> np.ndarray:
        """Log next-token probabilities for every context, shape (contexts, vocab)."""
        shifted = self.logits - self.logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def row_log_softmax(self, context: Tuple[str, ...]) -> np.ndarray:
        row = self.logits[self._ctx_index[context]]
        shifted = row - row.max()
        return shifted - math.log(float(np.exp(shifted).sum()))


class ReferencePolicy:
    """Frozen snapshot of a :class:`PolicyModel`; immutable after creation."""

    def __init__(self, policy: PolicyModel):
        self.vocab = policy.vocab
        self.order = policy.order
        self.contexts = policy.contexts
        self._ctx_index = policy._ctx_index
        self._tok_index = policy._tok_index
        self.logits = policy.logits.copy()
        self.logits.setflags(write=False)
        self.snapshot_step = policy.version
        self._log_softmax: Optional[np.ndarray] = None

    token_index = PolicyModel.token_index
    context_row = PolicyModel.context_row
    row_log_softmax = PolicyModel.row_log_softmax

    def log_softmax_table(self) -> np.ndarray:
        # safe to cache: the snapshot never changes
        if self._log_softmax is None:
            self._log_softmax = PolicyModel.log_softmax_table(self)
            self._log_softmax.setflags(write=False)
        return self._log_softmax


def init_policy(
    vocab: Sequence[str],
    context_order: int = DEFAULT_CONTEXT_ORDER,
    seed: Union[int, np.random.SeedSequence] = 0,
    init_scale: float = 0.01,
    zero_init: bool = False,
) -> PolicyModel:
    """Seeded policy with logits drawn uniformly from [-init_scale, init_scale].

    ``zero_init=True`` starts from all-zero logits, i.e. a uniform next-token
    distribution.  Identical arguments always produce identical tables.
    """
    vocab = _validate_vocab(vocab)
    symbols = 1 + len(vocab)
    n_contexts = symbols**context_order
    if zero_init:
        logits = np.zeros((n_contexts, len(vocab)))
    else:
        rng = np.random.default_rng(seed)
        logits = rng.uniform(-init_scale, init_scale, size=(n_contexts, len(vocab)))
    return PolicyModel(vocab, context_order, logits)


def _iter_scored_positions(
    order: int, prompt: Sequence[str], response: Sequence[str]
) -> Iterable[Tuple[Tuple[str, ...], str]]:
    """(context window, next token) for each teacher-forced response position."""
    full = (BOS,) * order + tuple(prompt) + tuple(response)
    base = order + len(prompt)
    for i, token in enumerate(response):
        pos = base + i
        yield full[pos - order : pos], token


def _check_tokens(policy, tokens: Sequence[str]) -> None:
    for token in tokens:
        if token not in policy._tok_index:
            raise ValueError(f"token {token!r} is not in the vocabulary")


def sequence_logprob(
    policy,
    prompt: Sequence[str],
    response: Sequence[str],
    aggregation: str = "sum",
) -> float:
    """Teacher-forced log-probability of ``response`` given ``prompt``.

    Sums the log softmax probability of each response token given its trailing
    context (``aggregation="mean"`` divides by the response length).  An empty
    response scores 0.  Works on live policies and frozen references alike.
    """
    if aggregation not in ("sum", "mean"):
        raise ValueError(f"aggregation must be 'sum' or 'mean', got {aggregation!r}")
    _check_tokens(policy, prompt)
    _check_tokens(policy, response)
    if not response:
        return 0.0
    total = 0.0
    for context, token in _iter_scored_positions(policy.order, prompt, response):
        total += float(policy.row_log_softmax(context)[policy.token_index(token)])
    if aggregation == "mean":
        total /= len(response)
    return min(total, 0.0)


def snapshot_reference(policy: PolicyModel) -> ReferencePolicy:
    """Deep, immutable copy of the policy; later training never affects it."""
    return ReferencePolicy(policy)


@dataclass(frozen=True)
class PolicyMetrics:
    """Mean loss plus plane coordinates for a set of pairs under one policy.

    ``x1``/``x2`` are geometric means exp(mean logp) of the chosen/rejected
    sequence probabilities, so ``margin == log(x1) - log(x2)`` exactly.
    """

    loss: float
    x1: float
    x2: float
    margin: float


def _pair_logprobs(policy, reference, triples, aggregation: str):
    """(logp_w, logp_l, ref_w, ref_l) lists via the vectorized softmax table."""
    table = policy.log_softmax_table()
    ref_table = reference.log_softmax_table() if reference is not None else None

    def seq_lp(tbl, scorer, prompt, response):
        total = 0.0
        for context, token in _iter_scored_positions(scorer.order, prompt, response):
            total += tbl[scorer._ctx_index[context], scorer._tok_index[token]]
        if aggregation == "mean" and response:
            total /= len(response)
        return min(total, 0.0)

    lws, lls, rws, rls = [], [], [], []
    for t in triples:
        _check_tokens(policy, t.prompt)
        _check_tokens(policy, t.chosen)
        _check_tokens(policy, t.rejected)
        lws.append(seq_lp(table, policy, t.prompt, t.chosen))
        lls.append(seq_lp(table, policy, t.prompt, t.rejected))
        if ref_table is not None:
            rws.append(seq_lp(ref_table, reference, t.prompt, t.chosen))
            rls.append(seq_lp(ref_table, reference, t.prompt, t.rejected))
    return lws, lls, rws, rls


def corpus_metrics(
    policy,
    triples: Sequence[PreferenceTriple],
    params: LossParams,
    reference: Optional[ReferencePolicy] = None,
    clamp: bool = True,
) -> PolicyMetrics:
    """Corpus-mean loss, geometric-mean plane coordinates, and likelihood margin."""
    if not triples:
        raise ValueError("need at least one triple")
    needs_ref = params.family in REFERENCE_FAMILIES
    if needs_ref and reference is None:
        raise ConfigError(f"{params.family.value} metrics require a reference snapshot")
    lws, lls, rws, rls = _pair_logprobs(
        policy, reference if needs_ref else None, triples, params.logprob_aggregation
    )
    losses = []
    for i in range(len(triples)):
        pair = LogProbPair(
            lws[i],
            lls[i],
            rws[i] if needs_ref else None,
            rls[i] if needs_ref else None,
        )
        losses.append(loss_value(pair, params, clamp=clamp))
    mean_lw = sum(lws) / len(lws)
    mean_ll = sum(lls) / len(lls)
    return PolicyMetrics(
        loss=sum(losses) / len(losses),
        x1=math.exp(mean_lw),
        x2=math.exp(mean_ll),
        margin=mean_lw - mean_ll,
    )


def _batch_loss_graph(policy: PolicyModel, batch, params: LossParams, reference):
    """Batch-mean loss graph over the logit entries the batch touches.

    Returns (graph, bindings, var_map, chosen_exprs, rejected_exprs) where
    var_map maps input names to (context row, token column) logit coordinates.
    """
    g = diffcore.Graph()
    var_map: Dict[str, Tuple[int, int]] = {}
    row_vars: Dict[int, list] = {}
    row_lse: Dict[int, diffcore.Node] = {}
    n_vocab = len(policy.vocab)

    def get_row(ri: int):
        if ri not in row_vars:
            vars_ = []
            for ti in range(n_vocab):
                name = f"z{ri}_{ti}"
                vars_.append(g.var(name))
                var_map[name] = (ri, ti)
            row_vars[ri] = vars_
        return row_vars[ri]

    def get_lse(ri: int) -> diffcore.Node:
        # exact for any constant shift; the current row max keeps exps small
        if ri not in row_lse:
            shift = float(policy.logits[ri].max())
            terms = [diffcore.exp(v - shift) for v in get_row(ri)]
            row_lse[ri] = diffcore.log(diffcore.nsum(terms)) + shift
        return row_lse[ri]

    def seq_expr(prompt, response) -> diffcore.Node:
        terms = []
        for context, token in _iter_scored_positions(policy.order, prompt, response):
            ri = policy._ctx_index[context]
            ti = policy._tok_index[token]
            terms.append(get_row(ri)[ti] - get_lse(ri))
        expr = diffcore.nsum(terms)
        if params.logprob_aggregation == "mean":
            expr = expr * (1.0 / len(terms))
        return expr

    family = params.family
    chosen_exprs = []
    rejected_exprs = []
    example_losses = []
    for triple in batch:
        lw = seq_expr(triple.prompt, triple.chosen)
        ll = seq_expr(triple.prompt, triple.rejected)
        chosen_exprs.append(lw)
        rejected_exprs.append(ll)
        if family is Family.SFT:
            example_losses.append(-lw)
        elif family is Family.ASFT:
            example_losses.append(-lw + params.beta * diffcore.align_loss_expr(lw, ll))
        elif family is Family.BT:
            example_losses.append(-diffcore.logsigmoid(params.beta * (lw - ll)))
        elif family is Family.ORPO:
            gap = diffcore.log_odds_expr(lw) - diffcore.log_odds_expr(ll)
            example_losses.append(-lw + params.lam * (-diffcore.logsigmoid(gap)))
        elif family in (Family.DPO, Family.IPO):
            agg = params.logprob_aggregation
            ref_w = sequence_logprob(reference, triple.prompt, triple.chosen, agg)
            ref_l = sequence_logprob(reference, triple.prompt, triple.rejected, agg)
            if family is Family.DPO:
                z = params.alpha * (lw - ref_w) - params.alpha * (ll - ref_l)
                example_losses.append(-diffcore.logsigmoid(z))
            else:
                d = (lw - ref_w) - (ll - ref_l) - 1.0 / (2.0 * params.tau)
                example_losses.append(d * d)
        else:  # pragma: no cover
            raise ValueError(f"unknown loss family: {family!r}")
    g.set_output(diffcore.nsum(example_losses) * (1.0 / len(batch)))
    bindings = {name: float(policy.logits[ri, ti]) for name, (ri, ti) in var_map.items()}
    return g, bindings, var_map, chosen_exprs, rejected_exprs


def train_step(
    policy: PolicyModel,
    batch: Sequence[PreferenceTriple],
    params: LossParams,
    reference: Optional[ReferencePolicy] = None,
    lr: float = DEFAULT_LR,
) -> PolicyMetrics:
    """One gradient-descent update on the batch-mean loss.

    Builds the loss graph, runs forward/backward, and subtracts ``lr`` times
    the gradient from every touched logit.  Returns batch metrics evaluated at
    the pre-update policy state.  Domain failures are reported with the index
    of the offending triple.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    if params.family in REFERENCE_FAMILIES and reference is None:
        raise ConfigError(f"{params.family.value} training requires a reference snapshot")
    for triple in batch:
        _check_tokens(policy, triple.prompt)
        _check_tokens(policy, triple.chosen)
        _check_tokens(policy, triple.rejected)
    graph, bindings, var_map, chosen_exprs, rejected_exprs = _batch_loss_graph(
        policy, batch, params, reference
    )
    try:
        loss = graph.forward(bindings)
    except DomainError as err:
        raise _locate_domain_error(policy, batch, params, reference, err) from None
    lws = [node.value for node in chosen_exprs]
    lls = [node.value for node in rejected_exprs]
    grads = graph.backward()
    for name, (ri, ti) in var_map.items():
        g = grads[name]
        if g != 0.0:
            policy.logits[ri, ti] -= lr * g
    policy.version += 1
    mean_lw = sum(lws) / len(lws)
    mean_ll = sum(lls) / len(lls)
    return PolicyMetrics(loss=loss, x1=math.exp(mean_lw), x2=math.exp(mean_ll), margin=mean_lw - mean_ll)


def _locate_domain_error(policy, batch, params, reference, err: DomainError) -> DomainError:
    """Re-evaluate per example on the float path to name the offending triple."""
    agg = params.logprob_aggregation
    for i, triple in enumerate(batch):
        try:
            lw = sequence_logprob(policy, triple.prompt, triple.chosen, agg)
            ll = sequence_logprob(policy, triple.prompt, triple.rejected, agg)
            ref_w = ref_l = None
            if params.family in REFERENCE_FAMILIES:
                ref_w = sequence_logprob(reference, triple.prompt, triple.chosen, agg)
                ref_l = sequence_logprob(reference, triple.prompt, triple.rejected, agg)
            loss_value(LogProbPair(lw, ll, ref_w, ref_l), params, clamp=False)
        except (DomainError, ValueError):
            return DomainError(f"domain error at batch triple {i}: {err}")
    return DomainError(f"domain error in batch loss graph: {err}")


@dataclass(frozen=True)
class TrajectoryRecord:
    step: int
    loss: float
    x1: float
    x2: float
    margin: float


@dataclass
class TrainingTrajectory:
    """Per-step corpus metrics for a seeded run, plus run provenance."""

    records: List[TrajectoryRecord]
    seed: int
    params: LossParams
    dataset_digest: str
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def initial(self) -> TrajectoryRecord:
        return self.records[0]

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]


#: How the logged quantities are defined, echoed into trajectory metadata.
MARGIN_DEFINITION = (
    "margin = corpus mean of logp(chosen) - logp(rejected); "
    "x1, x2 = exp(corpus mean logp), i.e. geometric-mean sequence probabilities"
)


def train(
    dataset: Sequence[PreferenceTriple],
    params: LossParams,
    steps: int = 200,
    seed: int = 0,
    lr: float = DEFAULT_LR,
    batch_size: int = 32,
    context_order: int = DEFAULT_CONTEXT_ORDER,
    vocab: Optional[Sequence[str]] = None,
    use_reference: bool = False,
    init_scale: float = 0.01,
) -> Tuple[TrainingTrajectory, PolicyModel]:
    """Seeded training run; returns the trajectory and the trained policy.

    The trajectory holds one record per step (plus the initial state at step
    0) with corpus-level metrics.  Reference-dependent families require
    ``use_reference=True``, which snapshots the freshly initialized policy;
    reference-free families never read a reference even if one is requested.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps!r}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size!r}")
    init_seed, batch_seed = np.random.SeedSequence(seed).spawn(2)
    policy = init_policy(
        vocab if vocab is not None else dataset_vocab(dataset),
        context_order,
        seed=init_seed,
        init_scale=init_scale,
    )
    needs_ref = params.family in REFERENCE_FAMILIES
    if needs_ref and not use_reference:
        raise ConfigError(
            f"loss family {params.family.value!r} requires a reference snapshot; "
            "enable the reference snapshot for this run"
        )
    reference = snapshot_reference(policy) if use_reference else None
    ref_for_run = reference if needs_ref else None

    rng = np.random.default_rng(batch_seed)
    records = []
    m = corpus_metrics(policy, dataset, params, ref_for_run)
    records.append(TrajectoryRecord(0, m.loss, m.x1, m.x2, m.margin))

    def batches():
        while True:
            perm = rng.permutation(len(dataset))
            for start in range(0, len(dataset), batch_size):
                yield [dataset[i] for i in perm[start : start + batch_size]]

    batch_iter = batches()
    for step in range(1, steps + 1):
        train_step(policy, next(batch_iter), params, ref_for_run, lr)
        m = corpus_metrics(policy, dataset, params, ref_for_run)
        records.append(TrajectoryRecord(step, m.loss, m.x1, m.x2, m.margin))

    trajectory = TrainingTrajectory(
        records=records,
        seed=seed,
        params=params,
        dataset_digest=dataset_digest(dataset),
        metadata={
            "family": params.family.value,
            "steps": steps,
            "lr": lr,
            "batch_size": batch_size,
            "context_order": context_order,
            "use_reference": use_reference,
            "margin_definition": MARGIN_DEFINITION,
        },
    )
    return trajectory, policy


def generate(
    policy,
    prompt: Sequence[str],
    max_len: int,
    mode: str = "greedy",
    seed: int = 0,
    stop_token: Optional[str] = None,
) -> List[str]:
    """Decode up to ``max_len`` tokens after ``prompt``.

    ``mode="greedy"`` takes the argmax token (ties break to the lowest token
    index); ``mode="sample"`` draws from the softmax with a seeded generator.
    Decoding stops early on ``stop_token``.
    """
    if mode not in ("greedy", "sample"):
        raise ValueError(f"mode must be 'greedy' or 'sample', got {mode!r}")
    if max_len < 0:
        raise ValueError(f"max_len must be >= 0, got {max_len!r}")
    _check_tokens(policy, prompt)
    rng = np.random.default_rng(seed) if mode == "sample" else None
    out: List[str] = []
    context = ((BOS,) * policy.order + tuple(prompt))[-policy.order :]
    for _ in range(max_len):
        log_probs = policy.row_log_softmax(context)
        if mode == "greedy":
            idx = int(np.argmax(log_probs))
        else:
            probs = np.exp(log_probs)
            idx = int(rng.choice(len(probs), p=probs / probs.sum()))
        token = policy.vocab[idx]
        out.append(token)
        if stop_token is not None and token == stop_token:
            break
        context = (context + (token,))[-policy.order :]
    return out


# ---------------------------------------------------------------------------
# synthetic dataset
# ---------------------------------------------------------------------------


def generate_dataset(
    n: int,
    seed: int = 0,
    n_prompt_words: int = 8,
    n_chosen_words: int = 10,
    n_rejected_words: int = 10,
    prompt_len: Tuple[int, int] = (2, 4),
    response_len: Tuple[int, int] = (3, 6),
) -> List[PreferenceTriple]:
    """Seeded separable preference data.

    Prompts draw from a query alphabet; chosen responses draw from a
    "preferred" word class and rejected ones from a disjoint class, so the
    preference signal is learnable by construction and chosen != rejected
    always holds.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n!r}")
    prompt_words = [f"q{i}" for i in range(n_prompt_words)]
    chosen_words = [f"good{i}" for i in range(n_chosen_words)]
    rejected_words = [f"bad{i}" for i in range(n_rejected_words)]
    rng = np.random.default_rng(seed)

    def draw(words: List[str], lo: int, hi: int) -> Tuple[str, ...]:
        length = int(rng.integers(lo, hi + 1))
        return tuple(words[int(rng.integers(0, len(words)))] for _ in range(length))

    triples = []
    for _ in range(n):
        triples.append(
            PreferenceTriple(
                prompt=draw(prompt_words, *prompt_len),
                chosen=draw(chosen_words, *response_len),
                rejected=draw(rejected_words, *response_len),
            )
        )
    return triples


def dataset_vocab(triples: Sequence[PreferenceTriple]) -> List[str]:
    """Sorted vocabulary of every token appearing in the dataset."""
    tokens = set()
    for t in triples:
        tokens.update(t.prompt)
        tokens.update(t.chosen)
        tokens.update(t.rejected)
    return sorted(tokens)


def dataset_digest(triples: Sequence[PreferenceTriple]) -> str:
    """Stable short digest identifying a dataset's exact contents."""
    payload = json.dumps(
        [[list(t.prompt), list(t.chosen), list(t.rejected)] for t in triples],
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_dataset_jsonl(
    triples: Sequence[PreferenceTriple], path, metadata: Optional[Dict[str, object]] = None
) -> None:
    """JSONL dataset: one object per line with prompt/chosen/rejected strings.

    An optional leading ``{"_meta": ...}`` line carries run provenance;
    loaders skip it.
    """
    lines = []
    if metadata is not None:
        lines.append(json.dumps({"_meta": metadata}, sort_keys=True))
    for t in triples:
        lines.append(
            json.dumps(
                {
                    "prompt": " ".join(t.prompt),
                    "chosen": " ".join(t.chosen),
                    "rejected": " ".join(t.rejected),
                },
                sort_keys=True,
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_dataset_jsonl(path) -> List[PreferenceTriple]:
    triples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "_meta" in obj:
                continue
            try:
                triples.append(
                    PreferenceTriple.from_strings(obj["prompt"], obj["chosen"], obj["rejected"])
                )
            except (KeyError, ValueError) as err:
                raise ValueError(f"{path}:{lineno}: invalid dataset record: {err}") from None
    return triples


def write_trajectory_csv(
    trajectory: TrainingTrajectory, path, metadata: Optional[Dict[str, object]] = None
) -> None:
    """Trajectory CSV: '#'-prefixed metadata lines, then step,loss,x1,x2,margin."""
    meta: Dict[str, object] = dict(metadata or {})
    meta.setdefault("seed", trajectory.seed)
    meta.setdefault("dataset_digest", trajectory.dataset_digest)
    for key, value in trajectory.metadata.items():
        meta.setdefault(key, value)
    lines = [f"# {key} = {value}" for key, value in meta.items()]
    lines.append(TRAJECTORY_HEADER)
    for r in trajectory.records:
        lines.append(
            f"{r.step},{r.loss:.17g},{r.x1:.17g},{r.x2:.17g},{r.margin:.17g}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> Tuple[List[TrajectoryRecord], Dict[str, str]]:
    records: List[TrajectoryRecord] = []
    metadata: Dict[str, str] = {}
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if " = " in body:
                    key, value = body.split(" = ", 1)
                    metadata[key] = value
                continue
            if not header_seen:
                if line != TRAJECTORY_HEADER:
                    raise ValueError(f"unexpected trajectory CSV header: {line!r}")
                header_seen = True
                continue
            step, loss, x1, x2, margin = line.split(",")
            records.append(
                TrajectoryRecord(int(step), float(loss), float(x1), float(x2), float(margin))
            )
    if not header_seen:
        raise ValueError(f"no header line found in {path}")
    return records, metadata


def save_checkpoint(policy, path, metadata: Optional[Dict[str, object]] = None) -> None:
    """Versioned JSON table dump: vocab, order, and the full logit table."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "metadata": metadata or {},
        "version": getattr(policy, "version", getattr(policy, "snapshot_step", 0)),
        "order": policy.order,
        "vocab": list(policy.vocab),
        "logits": [[float(v) for v in row] for row in policy.logits],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> PolicyModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    return PolicyModel(
        tuple(payload["vocab"]),
        int(payload["order"]),
        np.array(payload["logits"], dtype=np.float64),
        version=int(payload["version"]),
    )

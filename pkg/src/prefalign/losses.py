"""Preference-alignment losses over log-probabilities and over plane coordinates.

Every function here is a pure, stateless map from its arguments to a float,
safe to call from any number of threads.  Pair-level losses consume a
:class:`LogProbPair` (sequence log-probabilities of the chosen and rejected
responses, plus optional frozen-reference values); plane-level losses take a
point ``(x1, x2)`` where ``x1`` is the probability of generating the
human-preferred response and ``x2`` the probability of the dispreferred one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

__all__ = [
    "Family",
    "REFERENCE_FAMILIES",
    "DomainError",
    "LossParams",
    "LogProbPair",
    "LOGP_CLAMP_LO",
    "LOGP_CLAMP_HI",
    "logsigmoid",
    "sigmoid",
    "log_odds",
    "sft_nll_loss",
    "asft_align_loss",
    "asft_total_loss",
    "bt_pair_loss",
    "dpo_loss",
    "ipo_loss",
    "orpo_loss",
    "bt_preference_prob",
    "bt_loss_plane",
    "asft_align_plane",
    "loss_value",
]


class Family(Enum):
    """Loss families supported by the trainer, the dispatcher, and the sweeps."""

    SFT = "sft"
    ASFT = "asft"
    BT = "bt"
    DPO = "dpo"
    IPO = "ipo"
    ORPO = "orpo"


#: Families that require a frozen reference policy to evaluate.
REFERENCE_FAMILIES = (Family.DPO, Family.IPO)


class DomainError(ValueError):
    """An input left the mathematical domain of a transform (e.g. p = 1)."""


# Clamp window applied to log-probabilities before the log-odds transform when
# clamping is enabled (the alignment loss is singular at p in {0, 1}).
LOGP_CLAMP_LO = -700.0
LOGP_CLAMP_HI = math.log(1.0 - 1e-7)


@dataclass(frozen=True)
class LossParams:
    """Loss-family selector plus the scalar hyperparameters the families use.

    ``beta`` weights the ASFT alignment term and tempers the BT comparison,
    ``alpha`` is the DPO temperature, ``lam`` weights ORPO's odds-ratio term,
    and ``tau`` is the IPO regularizer.  ``logprob_aggregation`` selects how
    token log-probabilities are combined into a sequence score (``"sum"`` is
    the plain sequence log-probability; ``"mean"`` is length-normalized).
    """

    family: Family = Family.ASFT
    beta: float = 0.1
    alpha: float = 0.1
    lam: float = 0.1
    tau: float = 0.1
    logprob_aggregation: str = "sum"

    def __post_init__(self) -> None:
        for name in ("beta", "alpha", "lam"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        # tau sits in a denominator (1 / 2*tau), so zero is not evaluable.
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError(f"tau must be finite and > 0, got {self.tau!r}")
        if self.logprob_aggregation not in ("sum", "mean"):
            raise ValueError(
                f"logprob_aggregation must be 'sum' or 'mean', got {self.logprob_aggregation!r}"
            )


@dataclass(frozen=True)
class LogProbPair:
    """Sequence log-probabilities for one preference record.

    ``logp_w`` / ``logp_l`` are log pi(y_chosen | x) and log pi(y_rejected | x)
    under the policy being trained; the ``ref_*`` values are the same
    quantities under a frozen reference policy and are required only by the
    reference-dependent families (DPO, IPO).
    """

    logp_w: float
    logp_l: float
    ref_logp_w: Optional[float] = None
    ref_logp_l: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("logp_w", "logp_l", "ref_logp_w", "ref_logp_l"):
            value = getattr(self, name)
            if value is None:
                continue
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value > 0.0:
                raise ValueError(f"{name} is a log-probability and must be <= 0, got {value!r}")

    @property
    def has_reference(self) -> bool:
        return self.ref_logp_w is not None and self.ref_logp_l is not None


def _require_finite(z: float, what: str) -> None:
    if not math.isfinite(z):
        raise DomainError(f"{what} must be finite, got {z!r}")


def _require_reference(pair: LogProbPair, family: str) -> None:
    if not pair.has_reference:
        raise ValueError(f"{family} requires reference log-probabilities on the pair")


def logsigmoid(z: float) -> float:
    """Numerically stable log(sigmoid(z)).

    Monotone increasing and always <= 0; behaves like ``z`` as z -> -inf and
    tends to 0 as z -> +inf.
    """
    _require_finite(z, "logsigmoid argument")
    if z >= 0.0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


def sigmoid(z: float) -> float:
    """Logistic function 1 / (1 + exp(-z)), stable for large |z|."""
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def log_odds(logp: float, clamp: bool = False) -> float:
    """Log-odds log(p / (1 - p)) of a probability supplied as logp = log(p).

    Evaluated as ``logp - log1p(-exp(logp))`` so the result stays finite for
    logp down to -700.  The transform is singular at p = 1; by default a
    ``logp >= 0`` input (or one that rounds to p = 1 in double precision)
    raises :class:`DomainError`.  With ``clamp=True`` the input is first
    clamped into ``[LOGP_CLAMP_LO, LOGP_CLAMP_HI]``, which is how training
    code keeps the alignment loss away from its singularities.
    """
    _require_finite(logp, "log-odds argument")
    if clamp:
        logp = min(max(logp, LOGP_CLAMP_LO), LOGP_CLAMP_HI)
    if logp >= 0.0:
        raise DomainError(f"log-odds needs logp < 0 (p < 1), got logp={logp!r}")
    neg_p = -math.exp(logp)
    if neg_p <= -1.0:
        # p rounded to 1 in double precision.
        raise DomainError(f"log-odds undefined: exp({logp!r}) rounds to 1")
    return logp - math.log1p(neg_p)


def sft_nll_loss(logp_w: float) -> float:
    """Negative log-likelihood of the chosen response.

    ``logp_w`` is the aggregated sequence log-probability (sum or mean of
    token log-probabilities, per ``LossParams.logprob_aggregation``).
    """
    _require_finite(logp_w, "logp_w")
    if logp_w > 0.0:
        raise ValueError(f"logp_w must be <= 0, got {logp_w!r}")
    return -logp_w


def asft_align_loss(pair: LogProbPair, clamp: bool = False) -> float:
    """Absolute-likelihood alignment loss.

    Pushes the chosen response's probability toward 1 and the rejected one's
    toward 0 through their log-odds scores:
    ``-log sigmoid(log_odds(logp_w)) - log sigmoid(-log_odds(logp_l))``.
    Equals ``-log x1 - log(1 - x2)`` at x1 = exp(logp_w), x2 = exp(logp_l).
    """
    fw = log_odds(pair.logp_w, clamp=clamp)
    fl = log_odds(pair.logp_l, clamp=clamp)
    return -logsigmoid(fw) - logsigmoid(-fl)


def asft_total_loss(pair: LogProbPair, params: LossParams, clamp: bool = False) -> float:
    """SFT negative log-likelihood plus beta times the alignment loss."""
    return sft_nll_loss(pair.logp_w) + params.beta * asft_align_loss(pair, clamp=clamp)


def bt_pair_loss(pair: LogProbPair, params: LossParams) -> float:
    """Pairwise-comparison loss -log sigmoid(beta * (logp_w - logp_l)).

    The log-probabilities act directly as the comparison scores, so this is
    the log-probability-space counterpart of :func:`bt_loss_plane`.
    """
    return -logsigmoid(params.beta * (pair.logp_w - pair.logp_l))


def dpo_loss(pair: LogProbPair, params: LossParams) -> float:
    """Reference-normalized pairwise loss.

    ``-log sigmoid(alpha * (logp_w - ref_logp_w) - alpha * (logp_l - ref_logp_l))``;
    requires both reference log-probabilities.
    """
    _require_reference(pair, "DPO")
    z = params.alpha * (pair.logp_w - pair.ref_logp_w) - params.alpha * (
        pair.logp_l - pair.ref_logp_l
    )
    return -logsigmoid(z)


def ipo_loss(pair: LogProbPair, params: LossParams) -> float:
    """Squared-regression preference loss with target 1 / (2 * tau).

    ``h`` is the reference-normalized log-ratio gap between the chosen and
    rejected responses; the loss is ``(h - 1/(2 tau))**2``.
    """
    _require_reference(pair, "IPO")
    h = (pair.logp_w - pair.ref_logp_w) - (pair.logp_l - pair.ref_logp_l)
    d = h - 1.0 / (2.0 * params.tau)
    return d * d


def orpo_loss(pair: LogProbPair, params: LossParams, clamp: bool = False) -> float:
    """SFT loss plus a lam-weighted odds-ratio comparison term.

    ``sft_nll_loss(logp_w) + lam * (-log sigmoid(log_odds(logp_w) - log_odds(logp_l)))``.
    Reference-free, like the ASFT objective.
    """
    gap = log_odds(pair.logp_w, clamp=clamp) - log_odds(pair.logp_l, clamp=clamp)
    return sft_nll_loss(pair.logp_w) + params.lam * (-logsigmoid(gap))


def bt_preference_prob(score_i: float, score_j: float) -> float:
    """Probability that the player with ``score_i`` beats the one with ``score_j``.

    ``sigmoid(score_i - score_j)``; complementary in its arguments, so
    ``bt_preference_prob(a, b) + bt_preference_prob(b, a) == 1``.
    """
    _require_finite(score_i, "score_i")
    _require_finite(score_j, "score_j")
    return sigmoid(score_i - score_j)


def _check_interior(value: float, name: str) -> None:
    if not (math.isfinite(value) and 0.0 < value < 1.0):
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {value!r}")


def bt_loss_plane(x1: float, x2: float, beta: float) -> float:
    """Pairwise-comparison loss on the plane: -log(x1^beta / (x1^beta + x2^beta)).

    Evaluated as ``-log sigmoid(beta * (log x1 - log x2))`` to avoid forming
    the powers; strictly decreasing in x1 and increasing in x2.
    """
    _check_interior(x1, "x1")
    _check_interior(x2, "x2")
    if not (math.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be > 0, got {beta!r}")
    return -logsigmoid(beta * (math.log(x1) - math.log(x2)))


def asft_align_plane(x1: float, x2: float) -> float:
    """Alignment loss on the plane: -log(x1) - log(1 - x2)."""
    _check_interior(x1, "x1")
    _check_interior(x2, "x2")
    return -math.log(x1) - math.log1p(-x2)


def loss_value(pair: LogProbPair, params: LossParams, clamp: bool = False) -> float:
    """Evaluate the loss family selected by ``params`` on one pair."""
    family = params.family
    if family is Family.SFT:
        return sft_nll_loss(pair.logp_w)
    if family is Family.ASFT:
        return asft_total_loss(pair, params, clamp=clamp)
    if family is Family.BT:
        return bt_pair_loss(pair, params)
    if family is Family.DPO:
        return dpo_loss(pair, params)
    if family is Family.IPO:
        return ipo_loss(pair, params)
    if family is Family.ORPO:
        return orpo_loss(pair, params, clamp=clamp)
    raise ValueError(f"unknown loss family: {family!r}")

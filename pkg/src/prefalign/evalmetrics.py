"""Self-contained BLEU-4 and ROUGE-1/2/L over whitespace-tokenized text.

BLEU follows the strict clipped-precision definition (geometric mean of
n-gram precisions for n = 1..4 times a brevity penalty, zero if any precision
is zero) with optional epsilon smoothing for short toy outputs.  ROUGE-N uses
clipped n-gram overlap counts; ROUGE-L uses the longest common subsequence.
Corpus scores micro-average counts across segments, so the reported F1 values
always satisfy f1 = 2PR/(P+R).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Sequence, Tuple

__all__ = [
    "tokenize",
    "ngram_counts",
    "lcs_length",
    "bleu4",
    "rouge_n",
    "rouge_l",
    "RougeScore",
    "MetricReport",
    "score_corpus",
]

Tokens = Sequence[str]


def tokenize(text: str, lowercase: bool = True) -> List[str]:
    """Whitespace tokenization with optional lowercasing (on by default)."""
    if lowercase:
        text = text.lower()
    return text.split()


def ngram_counts(tokens: Tokens, n: int) -> Counter:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(hyp: Tokens, refs: Sequence[Tokens], n: int) -> Tuple[int, int]:
    """(clipped match count, hypothesis n-gram count) for one segment."""
    hyp_counts = ngram_counts(hyp, n)
    total = sum(hyp_counts.values())
    if total == 0:
        return 0, 0
    max_ref: Counter = Counter()
    for ref in refs:
        for gram, count in ngram_counts(ref, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    matches = sum(min(count, max_ref[gram]) for gram, count in hyp_counts.items())
    return matches, total


def _closest_ref_length(hyp_len: int, ref_lens: Sequence[int]) -> int:
    # the standard tie-break: closest length, shorter wins on ties
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def _bleu_from_counts(
    matches: Sequence[int], totals: Sequence[int], hyp_len: int, ref_len: int, smooth: float
) -> float:
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for m, t in zip(matches, totals):
        if t == 0:
            # hypothesis too short to have any n-gram of this order
            if smooth <= 0.0:
                return 0.0
            p = smooth
        else:
            p = m / t
            if p == 0.0:
                if smooth <= 0.0:
                    return 0.0
                p = smooth / t
        log_sum += 0.25 * math.log(p)
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_sum)


def bleu4(hypothesis: Tokens, references: Sequence[Tokens], smooth: float = 0.0) -> float:
    """Sentence BLEU with n = 1..4 clipped precisions and a brevity penalty.

    Returns 0.0 for an empty hypothesis or whenever any precision is zero
    (unless ``smooth`` > 0, which substitutes ``smooth / total`` for zero
    match counts).  Requires at least one reference.
    """
    if not references:
        raise ValueError("bleu4 needs at least one reference")
    matches = []
    totals = []
    for n in range(1, 5):
        m, t = _clipped_matches(hypothesis, references, n)
        matches.append(m)
        totals.append(t)
    ref_len = _closest_ref_length(len(hypothesis), [len(r) for r in references])
    return _bleu_from_counts(matches, totals, len(hypothesis), ref_len, smooth)


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def _prf(overlap: float, hyp_total: float, ref_total: float) -> RougeScore:
    p = overlap / hyp_total if hyp_total > 0 else 0.0
    r = overlap / ref_total if ref_total > 0 else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f1)


def rouge_n(hypothesis: Tokens, reference: Tokens, n: int) -> RougeScore:
    """N-gram overlap precision/recall/F1 (clipped counts)."""
    hyp_counts = ngram_counts(hypothesis, n)
    ref_counts = ngram_counts(reference, n)
    overlap = sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
    return _prf(overlap, sum(hyp_counts.values()), sum(ref_counts.values()))


def lcs_length(a: Tokens, b: Tokens) -> int:
    """Longest-common-subsequence length via dynamic programming."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] >= prev[j] else prev[j]
        prev = cur
    return prev[len(b)]


def rouge_l(hypothesis: Tokens, reference: Tokens) -> RougeScore:
    """LCS-based precision/recall/F1."""
    lcs = lcs_length(hypothesis, reference)
    return _prf(lcs, len(hypothesis), len(reference))


@dataclass(frozen=True)
class MetricReport:
    """Corpus-level metric suite plus token bookkeeping."""

    bleu4: float
    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore
    segments: int
    hypothesis_tokens: int
    reference_tokens: int
    empty_hypotheses: int

    def to_dict(self) -> Dict[str, object]:
        def rouge_dict(score: RougeScore) -> Dict[str, float]:
            return {"precision": score.precision, "recall": score.recall, "f1": score.f1}

        return {
            "bleu4": self.bleu4,
            "rouge1": rouge_dict(self.rouge1),
            "rouge2": rouge_dict(self.rouge2),
            "rougeL": rouge_dict(self.rougeL),
            "segments": self.segments,
            "hypothesis_tokens": self.hypothesis_tokens,
            "reference_tokens": self.reference_tokens,
            "empty_hypotheses": self.empty_hypotheses,
        }


def score_corpus(
    hypotheses: Sequence[Tokens],
    references: Sequence[Tokens],
    smooth: float = 0.0,
    sentence_level_bleu: bool = False,
) -> MetricReport:
    """Score aligned hypothesis/reference segments.

    BLEU is corpus-level by default (counts pooled across segments before the
    geometric mean); ``sentence_level_bleu=True`` averages per-segment BLEU
    instead.  ROUGE pools overlap counts, so precision/recall/F1 are
    micro-averages.
    """
    if len(hypotheses) != len(references):
        raise ValueError(
            f"segment count mismatch: {len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise ValueError("need at least one segment to score")

    bleu_matches = [0, 0, 0, 0]
    bleu_totals = [0, 0, 0, 0]
    hyp_len_total = 0
    ref_len_total = 0
    sentence_bleus = []
    rouge_overlap = {1: 0, 2: 0, "L": 0}
    rouge_hyp_total = {1: 0, 2: 0, "L": 0}
    rouge_ref_total = {1: 0, 2: 0, "L": 0}
    empty = 0

    for hyp, ref in zip(hypotheses, references):
        if len(hyp) == 0:
            empty += 1
        for i, n in enumerate(range(1, 5)):
            m, t = _clipped_matches(hyp, [ref], n)
            bleu_matches[i] += m
            bleu_totals[i] += t
        hyp_len_total += len(hyp)
        ref_len_total += len(ref)
        if sentence_level_bleu:
            sentence_bleus.append(bleu4(hyp, [ref], smooth=smooth))
        for n in (1, 2):
            hyp_counts = ngram_counts(hyp, n)
            ref_counts = ngram_counts(ref, n)
            rouge_overlap[n] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            rouge_hyp_total[n] += sum(hyp_counts.values())
            rouge_ref_total[n] += sum(ref_counts.values())
        rouge_overlap["L"] += lcs_length(hyp, ref)
        rouge_hyp_total["L"] += len(hyp)
        rouge_ref_total["L"] += len(ref)

    if sentence_level_bleu:
        bleu = sum(sentence_bleus) / len(sentence_bleus)
    else:
        bleu = _bleu_from_counts(bleu_matches, bleu_totals, hyp_len_total, ref_len_total, smooth)

    return MetricReport(
        bleu4=bleu,
        rouge1=_prf(rouge_overlap[1], rouge_hyp_total[1], rouge_ref_total[1]),
        rouge2=_prf(rouge_overlap[2], rouge_hyp_total[2], rouge_ref_total[2]),
        rougeL=_prf(rouge_overlap["L"], rouge_hyp_total["L"], rouge_ref_total["L"]),
        segments=len(hypotheses),
        hypothesis_tokens=hyp_len_total,
        reference_tokens=ref_len_total,
        empty_hypotheses=empty,
    )

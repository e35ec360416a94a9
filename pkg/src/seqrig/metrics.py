"""Evaluation metrics: corpus BLEU, smoothed sentence BLEU, WER, accuracy."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def corpus_bleu(hyps: list[Sequence], refs: list[Sequence], max_n: int = 4) -> float:
    """Corpus BLEU with clipped modified precisions and brevity penalty.

    Any order with zero matches (but a nonzero denominator) forces 0, the
    standard definition.  Orders whose denominator is zero corpus-wide
    (every hypothesis shorter than n) are vacuous and drop out of the
    geometric mean, so identical corpora always score exactly 1.
    """
    if len(hyps) != len(refs):
        raise ValueError(f"count mismatch: {len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise ValueError("empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp, ref = list(hyp), list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp, n)
            ref_counts = _ngrams(ref, n)
            matched[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            total[n - 1] += max(len(hyp) - n + 1, 0)
    log_sum = 0.0
    orders = 0
    for m, t in zip(matched, total):
        if t == 0:
            continue
        if m == 0:
            return 0.0
        log_sum += math.log(m / t)
        orders += 1
    if orders == 0 or hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_sum / orders)


def sentence_bleu_smooth(hyp: Sequence, ref: Sequence, max_n: int = 4) -> float:
    """Sentence BLEU with +1 smoothing on every order's counts."""
    hyp, ref = list(hyp), list(ref)
    if not hyp:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        m = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        t = max(len(hyp) - n + 1, 0)
        log_sum += math.log((m + 1.0) / (t + 1.0))
    bp = 1.0 if len(hyp) > len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum / max_n)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Minimal edit distance with unit substitution/insertion/deletion costs."""
    a, b = list(a), list(b)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def corpus_wer(hyps: list[Sequence], refs: list[Sequence]) -> float:
    """Total edit distance over total reference length."""
    if len(hyps) != len(refs):
        raise ValueError(f"count mismatch: {len(hyps)} hypotheses vs {len(refs)} references")
    ref_total = sum(len(r) for r in refs)
    if ref_total == 0:
        raise ValueError("empty reference corpus")
    edits = sum(edit_distance(h, r) for h, r in zip(hyps, refs))
    return edits / ref_total


def sequence_accuracy(hyps: list[Sequence], refs: list[Sequence]) -> float:
    """Fraction of hypotheses exactly equal to their reference."""
    if len(hyps) != len(refs):
        raise ValueError(f"count mismatch: {len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise ValueError("empty corpus")
    return sum(list(h) == list(r) for h, r in zip(hyps, refs)) / len(hyps)


METRICS = {
    "bleu": (corpus_bleu, "max"),
    "wer": (corpus_wer, "min"),
    "accuracy": (sequence_accuracy, "max"),
}

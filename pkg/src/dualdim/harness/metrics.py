"""Evaluation metrics: exact-match accuracy and corpus-level BLEU-4."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import exp, log

from scipy import stats

from ..errors import ContractError
from ..seqmodels.vocab import BOS, EOS, PAD

_STRIPPED = {BOS, EOS, PAD}


def _clean(tokens) -> list[str]:
    return [t for t in tokens if t not in _STRIPPED]


@dataclass
class MetricsReport:
    exact_match_accuracy: float
    bleu4: float
    records: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def exact_match_accuracy(predictions, golds) -> float:
    """Fraction of predictions token-identical to gold after tag stripping."""
    if len(predictions) != len(golds):
        raise ContractError(
            f"length mismatch: {len(predictions)} predictions, {len(golds)} golds")
    if not golds:
        raise ContractError("exact_match_accuracy: empty corpus")
    hits = sum(_clean(p) == _clean(g) for p, g in zip(predictions, golds))
    return hits / len(golds)


def _ngrams(tokens, n) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(predictions, golds) -> float:
    """Corpus BLEU with 4-gram cap, brevity penalty, and add-one smoothing.

    Modified n-gram precisions are pooled over the corpus; orders above 1
    with zero matches are smoothed as (matches+1)/(total+1).
    """
    if len(predictions) != len(golds):
        raise ContractError(
            f"length mismatch: {len(predictions)} predictions, {len(golds)} golds")
    if not golds:
        raise ContractError("bleu4: empty corpus")
    matches = [0] * 4
    totals = [0] * 4
    cand_len = 0
    ref_len = 0
    for pred, gold in zip(predictions, golds):
        pred, gold = _clean(pred), _clean(gold)
        cand_len += len(pred)
        ref_len += len(gold)
        for n in range(1, 5):
            pg = _ngrams(pred, n)
            gg = _ngrams(gold, n)
            matches[n - 1] += sum(min(c, gg[g]) for g, c in pg.items())
            totals[n - 1] += max(len(pred) - n + 1, 0)
    if cand_len == 0:
        return 0.0
    log_precisions = []
    for n in range(4):
        m, t = matches[n], totals[n]
        if n >= 1 and m == 0:
            m, t = m + 1, t + 1
        if t == 0 or m == 0:
            return 0.0
        log_precisions.append(log(m / t))
    bp = 1.0 if cand_len > ref_len else exp(1.0 - ref_len / cand_len)
    return bp * exp(sum(log_precisions) / 4.0)


def pearson_corr(xs, ys) -> float:
    """Sample Pearson correlation coefficient; undefined on flat inputs."""
    if len(xs) != len(ys):
        raise ContractError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ContractError("pearson_corr: need at least 2 points")
    import numpy as np
    if np.std(xs) == 0 or np.std(ys) == 0:
        raise ContractError("pearson_corr: zero variance makes the "
                            "correlation undefined")
    return float(stats.pearsonr(xs, ys).statistic)


def metrics_report(predictions, golds, metadata=None) -> MetricsReport:
    records = [
        {"prediction": " ".join(_clean(p)), "gold": " ".join(_clean(g)),
         "match": _clean(p) == _clean(g)}
        for p, g in zip(predictions, golds)
    ]
    return MetricsReport(
        exact_match_accuracy=exact_match_accuracy(predictions, golds),
        bleu4=bleu4(predictions, golds),
        records=records,
        metadata=metadata or {},
    )

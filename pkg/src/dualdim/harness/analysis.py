"""Analysis artifacts: bound histograms, signal ranks, λ sweeps, correlation."""

from __future__ import annotations

import csv
import dataclasses

import numpy as np
from scipy import stats

from ..dimcore import (
    BaselineState,
    TrainingConfig,
    build_pool,
    learning_signal,
    lower_bound_estimate,
    pretrain_then_joint,
)
from ..errors import ContractError
from ..seqmodels import beam_search
from .metrics import bleu4, exact_match_accuracy, pearson_corr


def per_example_lower_bounds(parser, generator, p_lm, q_lm, pairs,
                             config: TrainingConfig):
    """Pool-averaged bound estimates per example, for both directions.

    Examples whose candidate pool comes back empty are skipped; the two
    returned lists may therefore differ in length.
    """
    bounds_e, bounds_d = [], []
    for nl, mr in pairs:
        pool = build_pool(parser, nl, config)
        if pool.hypotheses:
            bounds_e.append(lower_bound_estimate("e", pool, generator, q_lm))
        pool = build_pool(generator, mr, config)
        if pool.hypotheses:
            bounds_d.append(lower_bound_estimate("d", pool, parser, p_lm))
    return bounds_e, bounds_d


def export_lower_bound_histogram(super_models, dim_models, pairs,
                                 config: TrainingConfig, bins: int = 30) -> dict:
    """Per-example bound distributions for two checkpoints, with a t-test.

    `super_models` and `dim_models` each carry parser/generator/p_lm/q_lm
    attributes.  Returns, per direction, the raw values, means, Welch
    two-sample t-test results, and shared-edge histogram rows.
    """
    sup_e, sup_d = per_example_lower_bounds(
        super_models.parser, super_models.generator, super_models.p_lm,
        super_models.q_lm, pairs, config)
    dim_e, dim_d = per_example_lower_bounds(
        dim_models.parser, dim_models.generator, dim_models.p_lm,
        dim_models.q_lm, pairs, config)

    out = {}
    for name, sup, dim in (("e", sup_e, dim_e), ("d", sup_d, dim_d)):
        lo = min(min(sup, default=0.0), min(dim, default=0.0))
        hi = max(max(sup, default=1.0), max(dim, default=1.0))
        edges = np.linspace(lo, hi, bins + 1)
        sup_counts, _ = np.histogram(sup, bins=edges)
        dim_counts, _ = np.histogram(dim, bins=edges)
        if sup and dim and (np.std(sup) > 0 or np.std(dim) > 0):
            test = stats.ttest_ind(dim, sup, equal_var=False)
            t_stat, p_value = float(test.statistic), float(test.pvalue)
        else:
            t_stat, p_value = 0.0, 1.0
        out[name] = {
            "super_values": sup,
            "dim_values": dim,
            "super_mean": float(np.mean(sup)) if sup else float("nan"),
            "dim_mean": float(np.mean(dim)) if dim else float("nan"),
            "t_stat": t_stat,
            "p_value": p_value,
            "histogram": [(float(edges[i]), int(sup_counts[i]), int(dim_counts[i]))
                          for i in range(bins)],
        }
    return out


def rank_gold_signal(parser, generator, q_lm, pairs, config: TrainingConfig):
    """Rank of each gold target's signal within its candidate pool.

    The gold target is appended when beam search missed it; rank 1 is
    best, and ties never push the gold below an equal-signal candidate.
    """
    baseline = BaselineState("rank")
    records = []
    for nl, mr in pairs:
        pool = build_pool(parser, nl, config)
        candidates = [list(h.tokens) for h in pool.hypotheses]
        if list(mr) not in candidates:
            candidates.append(list(mr))
        signals = [learning_signal(list(nl), cand, generator, q_lm, baseline).raw
                   for cand in candidates]
        gold_signal = signals[candidates.index(list(mr))]
        rank = 1 + sum(s > gold_signal for s in signals)
        records.append({"rank": rank, "pool_size": len(candidates)})
    return records


def run_lambda_sweep(corpus, config: TrainingConfig,
                     lambdas=(0.0, 0.01, 0.1, 1.0)):
    """Full train/evaluate cycle per λ under one seed; rows of (λ, acc, BLEU)."""
    if any(lam < 0 for lam in lambdas):
        raise ContractError("lambda values must be >= 0")
    rows = []
    for lam in lambdas:
        cfg = dataclasses.replace(config, lam=lam)
        models = pretrain_then_joint(corpus, cfg)
        acc, bleu = evaluate_models(models.parser, models.generator,
                                    corpus.test, cfg)
        rows.append({"lambda": lam, "accuracy": acc, "bleu4": bleu})
    return rows


def evaluate_models(parser, generator, pairs, config: TrainingConfig):
    """(parser exact-match accuracy, generator BLEU-4) on paired examples."""
    mr_preds, nl_preds, mrs, nls = [], [], [], []
    for ex in pairs:
        nl, mr = list(ex.nl), list(ex.mr)
        hyps = beam_search(parser, nl, config.beam_size, config.max_decode_len)
        mr_preds.append(list(hyps[0].tokens) if hyps else [])
        mrs.append(mr)
        hyps = beam_search(generator, mr, config.beam_size, config.max_decode_len)
        nl_preds.append(list(hyps[0].tokens) if hyps else [])
        nls.append(nl)
    return exact_match_accuracy(mr_preds, mrs), bleu4(nl_preds, nls)


def validation_metric_correlation(trace) -> float:
    """Pearson correlation of the two models' validation metrics over training."""
    joint = [r for r in trace if r.get("phase") == "joint"]
    xs = [r["valid_accuracy"] for r in joint]
    ys = [r["valid_bleu4"] for r in joint]
    return pearson_corr(xs, ys)


def write_csv(rows, path: str, fieldnames=None):
    """Rows of dicts (or tuples) as a comma-separated file with a header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if rows and isinstance(rows[0], dict):
            fieldnames = fieldnames or list(rows[0])
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
        else:
            writer = csv.writer(fh)
            if fieldnames:
                writer.writerow(fieldnames)
            writer.writerows(rows)

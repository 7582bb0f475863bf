"""Command-line experiment driver.

Subcommands cover corpus generation, pretraining, joint and
semi-supervised training, the pseudo-labeling baselines, evaluation,
and the analysis exports (tables as CSV, figures as PNG next to them).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .. import diffcore as dc
from ..corpus import save_manifest, save_pairs
from ..dimcore import (
    TrainedModels,
    back_boost,
    pretrain_then_joint,
    self_train,
    write_trace,
)
from ..errors import ContractError
from ..rng import substream
from ..seqmodels import MarginalLM, Seq2SeqModel, Vocabulary, lm_pretrain
from . import analysis, figures
from .config import build_corpus, load_config, training_config
from .metrics import metrics_report


def main(argv=None) -> int:
    parser = _build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on unknown subcommands/flags
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args) or 0
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualdim",
        description="Joint parser/generator training with dual-information "
                    "coupling terms.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.set_defaults(func=func)
        return p

    add("gen-toy", cmd_gen_toy, "generate the synthetic toy corpus")
    add("pretrain-lm", cmd_pretrain_lm, "train the two marginal language models")
    add("pretrain-models", cmd_pretrain_models,
        "supervised pretraining of parser and generator")

    p = add("train-dim", cmd_train, "supervised pretraining plus joint phase")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="coupling weight override")
    p.add_argument("--seed", type=int, default=None, help="seed override")

    p = add("train-semidim", cmd_train,
            "semi-supervised training (requires proportion < 1)")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(semi=True)

    p = add("train-baseline", cmd_train_baseline,
            "pseudo-labeling baseline on the parser")
    p.add_argument("--method", choices=("selftrain", "backboost"),
                   required=True)

    p = add("evaluate", cmd_evaluate, "metrics for saved checkpoints")
    p.add_argument("--models", required=True, help="checkpoint directory")
    p.add_argument("--split", choices=("valid", "test"), default="test")

    p = add("analyze", cmd_analyze, "bound histograms, ranks, sweep, correlation")
    p.add_argument("--models", help="joint-trained checkpoint directory")
    p.add_argument("--baseline-models", dest="baseline_models",
                   help="pretrained-only checkpoint directory (histograms)")
    p.add_argument("--sweep", action="store_true",
                   help="run the full coupling-weight sweep (trains per value)")
    return parser


def _outdir(args, default: str) -> str:
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Checkpoint directories


def save_models(models: TrainedModels, outdir: str):
    models.parser.src_vocab.save(os.path.join(outdir, "nl.vocab"))
    models.parser.tgt_vocab.save(os.path.join(outdir, "mr.vocab"))
    dc.save_checkpoint(models.parser.params, os.path.join(outdir, "parser.ckpt"))
    dc.save_checkpoint(models.generator.params,
                       os.path.join(outdir, "generator.ckpt"))
    dc.save_checkpoint(models.p_lm.params, os.path.join(outdir, "p_lm.ckpt"))
    dc.save_checkpoint(models.q_lm.params, os.path.join(outdir, "q_lm.ckpt"))


def load_models(outdir: str, config) -> TrainedModels:
    nl_vocab = Vocabulary.load(os.path.join(outdir, "nl.vocab"))
    mr_vocab = Vocabulary.load(os.path.join(outdir, "mr.vocab"))
    parser = Seq2SeqModel("nl->mr", nl_vocab, mr_vocab, config.embed_dim,
                          config.hidden_dim, substream(config.seed, "parser"))
    generator = Seq2SeqModel("mr->nl", mr_vocab, nl_vocab, config.embed_dim,
                             config.hidden_dim, substream(config.seed, "generator"))
    p_lm = MarginalLM(nl_vocab, config.lm_embed_dim, config.lm_hidden_dim,
                      substream(config.seed, "p-lm"))
    q_lm = MarginalLM(mr_vocab, config.lm_embed_dim, config.lm_hidden_dim,
                      substream(config.seed, "q-lm"))
    for model, name in ((parser, "parser"), (generator, "generator"),
                        (p_lm, "p_lm"), (q_lm, "q_lm")):
        loaded = dc.load_checkpoint(os.path.join(outdir, f"{name}.ckpt"))
        model.params.load_values_from(loaded)
    p_lm.frozen = q_lm.frozen = True
    return TrainedModels(parser=parser, generator=generator, p_lm=p_lm,
                         q_lm=q_lm)


def _write_report(report, outdir: str):
    with open(os.path.join(outdir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump({"exact_match_accuracy": report.exact_match_accuracy,
                   "bleu4": report.bleu4, "metadata": report.metadata},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(outdir, "predictions.jsonl"), "w",
              encoding="utf-8") as fh:
        for rec in report.records:
            fh.write(json.dumps(rec) + "\n")
    print(f"accuracy={report.exact_match_accuracy:.4f} "
          f"bleu4={report.bleu4:.4f}")


def _evaluate_to_report(models: TrainedModels, pairs, config, metadata):
    from ..seqmodels import beam_search

    mr_preds, nl_preds = [], []
    for ex in pairs:
        hyps = beam_search(models.parser, list(ex.nl), config.beam_size,
                           config.max_decode_len)
        mr_preds.append(list(hyps[0].tokens) if hyps else [])
        hyps = beam_search(models.generator, list(ex.mr), config.beam_size,
                           config.max_decode_len)
        nl_preds.append(list(hyps[0].tokens) if hyps else [])
    parser_report = metrics_report(mr_preds, [ex.mr for ex in pairs], metadata)
    bleu = analysis.bleu4(nl_preds, [ex.nl for ex in pairs])
    parser_report.bleu4 = bleu
    return parser_report


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_toy(args) -> int:
    cfg = load_config(args.config)
    corpus = build_corpus(cfg)
    out = _outdir(args, "runs/toy-corpus")
    for split in ("train", "valid", "test"):
        save_pairs(getattr(corpus, split), os.path.join(out, f"{split}.tsv"))
    save_manifest(corpus, os.path.join(out, "manifest.json"))
    print(f"wrote {len(corpus.train)}/{len(corpus.valid)}/{len(corpus.test)} "
          f"examples to {out}")
    return 0


def cmd_pretrain_lm(args) -> int:
    cfg = load_config(args.config)
    config = training_config(cfg)
    corpus = build_corpus(cfg)
    out = _outdir(args, "runs/lm")
    from ..corpus import build_vocab

    for side, seqs, valid, name in (
            ("nl", [list(ex.nl) for ex in corpus.train] + corpus.unlabeled_x,
             [list(ex.nl) for ex in corpus.valid], "p_lm"),
            ("mr", [list(ex.mr) for ex in corpus.train] + corpus.unlabeled_y,
             [list(ex.mr) for ex in corpus.valid], "q_lm")):
        min_count = config.nl_min_count if side == "nl" else config.mr_min_count
        vocab = build_vocab(seqs, min_count=min_count)
        lm = MarginalLM(vocab, config.lm_embed_dim, config.lm_hidden_dim,
                        substream(config.seed, f"{name.replace('_', '-')}"))
        trace = lm_pretrain(lm, seqs, valid, lr=config.lm_lr,
                            max_epochs=config.max_lm_epochs,
                            patience=config.patience,
                            batch_size=config.batch_size,
                            rng=substream(config.seed, f"{name}-epochs"))
        vocab.save(os.path.join(out, f"{side}.vocab"))
        dc.save_checkpoint(lm.params, os.path.join(out, f"{name}.ckpt"))
        print(f"{name}: validation perplexity {trace[-1]:.3f}")
    return 0


def cmd_pretrain_models(args) -> int:
    cfg = load_config(args.config)
    config = training_config(cfg)
    corpus = build_corpus(cfg)
    out = _outdir(args, "runs/pretrained")
    models = pretrain_then_joint(corpus, config, joint=False)
    save_models(models, out)
    write_trace(models.trace, os.path.join(out, "trace.jsonl"))
    _write_report(_evaluate_to_report(models, corpus.test, config,
                                      {"phase": "pretrained"}), out)
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    config = training_config(cfg, lam=getattr(args, "lam", None),
                             seed=getattr(args, "seed", None))
    if getattr(args, "semi", False) and cfg["data"]["proportion"] >= 1.0:
        raise ContractError(
            "semi-supervised training needs [data] proportion < 1")
    corpus = build_corpus(cfg)
    out = _outdir(args, f"runs/{args.command}")
    models = pretrain_then_joint(corpus, config)
    save_models(models, out)
    write_trace(models.trace, os.path.join(out, "trace.jsonl"))
    _write_report(_evaluate_to_report(models, corpus.test, config,
                                      {"phase": args.command,
                                       "lambda": config.lam,
                                       "seed": config.seed}), out)
    return 0


def cmd_train_baseline(args) -> int:
    cfg = load_config(args.config)
    config = training_config(cfg)
    corpus = build_corpus(cfg)
    out = _outdir(args, f"runs/baseline-{args.method}")
    models = pretrain_then_joint(corpus, config, joint=False)
    labeled = [(list(ex.nl), list(ex.mr)) for ex in corpus.train]
    valid = [(list(ex.nl), list(ex.mr)) for ex in corpus.valid]
    if args.method == "selftrain":
        self_train(models.parser, labeled, corpus.unlabeled_x, config, valid)
    else:
        back_boost(models.parser, labeled, corpus.unlabeled_y,
                   models.generator, config, valid)
    save_models(models, out)
    _write_report(_evaluate_to_report(models, corpus.test, config,
                                      {"phase": f"baseline-{args.method}"}), out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    config = training_config(cfg)
    corpus = build_corpus(cfg)
    models = load_models(args.models, config)
    pairs = corpus.valid if args.split == "valid" else corpus.test
    out = _outdir(args, "runs/evaluate")
    _write_report(_evaluate_to_report(models, pairs, config,
                                      {"split": args.split,
                                       "models": args.models}), out)
    return 0


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    config = training_config(cfg)
    corpus = build_corpus(cfg)
    out = _outdir(args, "runs/analysis")
    summary = {}

    if args.models and args.baseline_models:
        dim_models = load_models(args.models, config)
        sup_models = load_models(args.baseline_models, config)
        pairs = [(list(ex.nl), list(ex.mr)) for ex in corpus.train]
        hist = analysis.export_lower_bound_histogram(
            sup_models, dim_models, pairs, config,
            bins=cfg["analysis"]["bins"])
        for direction in ("e", "d"):
            frag = hist[direction]
            analysis.write_csv(frag["histogram"],
                               os.path.join(out, f"histogram_{direction}.csv"),
                               fieldnames=("bin_edge", "super_count", "dim_count"))
            figures.plot_lower_bound_histogram(
                frag, direction, os.path.join(out, f"histogram_{direction}.png"))
            summary[f"bound_{direction}"] = {
                "super_mean": frag["super_mean"], "dim_mean": frag["dim_mean"],
                "p_value": frag["p_value"]}

    if args.models:
        dim_models = load_models(args.models, config)
        rank_pairs = corpus.meta.get("heldout_pairs") or \
            [(list(ex.nl), list(ex.mr)) for ex in corpus.valid]
        ranks = analysis.rank_gold_signal(dim_models.parser,
                                          dim_models.generator,
                                          dim_models.q_lm, rank_pairs, config)
        analysis.write_csv(ranks, os.path.join(out, "ranks.csv"))
        figures.plot_rank_distribution(ranks, os.path.join(out, "ranks.png"))
        import statistics
        summary["median_gold_rank"] = statistics.median(
            r["rank"] for r in ranks)

        trace_path = os.path.join(args.models, "trace.jsonl")
        if os.path.exists(trace_path):
            with open(trace_path, encoding="utf-8") as fh:
                trace = [json.loads(line) for line in fh]
            try:
                corr = analysis.validation_metric_correlation(trace)
                figures.plot_metric_correlation(
                    trace, os.path.join(out, "correlation.png"))
                summary["metric_correlation"] = corr
            except ContractError:
                summary["metric_correlation"] = None

    if args.sweep:
        lambdas = [float(v) for v in
                   cfg["analysis"]["lambdas"].split(",") if v != ""]
        rows = analysis.run_lambda_sweep(corpus, config, lambdas)
        analysis.write_csv(rows, os.path.join(out, "lambda_sweep.csv"))
        figures.plot_lambda_sweep(rows, os.path.join(out, "lambda_sweep.png"))
        summary["lambda_sweep"] = rows

    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"analysis written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Tests for metrics, configuration, analysis exports, and the CLI."""

import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualdim.errors import ContractError
from dualdim.harness import metrics as mt
from dualdim.harness import analysis, config as cfgmod
from dualdim.harness.cli import main

from helpers import tiny_instance


class TestExactMatchAccuracy:
    def test_all_match(self):
        preds = [["a", "b"], ["c"]]
        assert mt.exact_match_accuracy(preds, preds) == 1.0

    def test_none_match(self):
        assert mt.exact_match_accuracy([["a"]], [["b"]]) == 0.0

    def test_tag_stripping(self):
        assert mt.exact_match_accuracy([["<bos>", "a", "<eos>"]], [["a"]]) == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            mt.exact_match_accuracy([["a"]], [])

    def test_accuracy_is_mean_of_flags(self):
        preds = [["a"], ["b"], ["c"], ["d"]]
        golds = [["a"], ["x"], ["c"], ["y"]]
        report = mt.metrics_report(preds, golds)
        flags = [r["match"] for r in report.records]
        assert abs(report.exact_match_accuracy - np.mean(flags)) < 1e-12


class TestBleu4:
    def test_identical_corpora(self):
        corpus = [["a", "b", "c", "d", "e"], ["x", "y", "z", "w", "v"]]
        assert abs(mt.bleu4(corpus, corpus) - 1.0) < 1e-12

    def test_hand_computed_brevity_case(self):
        # All modified precisions are 1; only the brevity penalty bites.
        got = mt.bleu4([["a", "b", "c", "d"]], [["a", "b", "c", "d", "e"]])
        assert abs(got - math.exp(1 - 5 / 4)) < 1e-12

    def test_empty_corpus_rejected(self):
        with pytest.raises(ContractError):
            mt.bleu4([], [])

    def test_no_overlap_is_zero(self):
        assert mt.bleu4([["q", "q", "q", "q"]], [["a", "b", "c", "d"]]) == 0.0

    def test_smoothing_on_missing_higher_orders(self):
        # Unigrams overlap but no 2-gram does; add-one smoothing keeps the
        # score positive instead of collapsing the geometric mean.
        got = mt.bleu4([["a", "c", "b", "d"]], [["a", "b", "c", "d"]])
        assert 0.0 < got < 1.0

    @settings(max_examples=20, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_pair_order_permutation_invariance(self, rnd):
        pairs = [(["a", "b", "c"], ["a", "b", "d"]),
                 (["x", "y"], ["x", "y"]),
                 (["m", "n", "o", "p"], ["m", "o", "n", "p"])]
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        base = mt.bleu4([p for p, _ in pairs], [g for _, g in pairs])
        perm = mt.bleu4([p for p, _ in shuffled], [g for _, g in shuffled])
        assert abs(base - perm) < 1e-12


class TestPearsonCorr:
    def test_identity_and_negation(self):
        xs = [1.0, 2.0, 5.0]
        assert abs(mt.pearson_corr(xs, xs) - 1.0) < 1e-12
        assert abs(mt.pearson_corr(xs, [-x for x in xs]) + 1.0) < 1e-12

    def test_hand_computed_value(self):
        # cov = 3, var_x = 2, var_y = 14/3 (sum-of-squares form).
        expected = 3 / math.sqrt(2 * 14 / 3)
        assert abs(mt.pearson_corr([1, 2, 3], [1, 2, 4]) - expected) < 1e-12

    def test_zero_variance_rejected(self):
        with pytest.raises(ContractError):
            mt.pearson_corr([1, 1, 1], [1, 2, 3])

    def test_too_short_rejected(self):
        with pytest.raises(ContractError):
            mt.pearson_corr([1], [2])


class TestConfig:
    def test_defaults_fill_in(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("[dim]\nlambda = 0.5\n")
        cfg = cfgmod.load_config(str(p))
        assert cfg["dim"]["lambda"] == 0.5
        assert cfg["training"]["patience"] == 5
        assert cfg["training"]["lr_joint"] == 0.00025

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("[training]\nmomentum = 0.9\n")
        with pytest.raises(ContractError, match="momentum"):
            cfgmod.load_config(str(p))

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("[optimizer]\nlr = 1\n")
        with pytest.raises(ContractError, match="optimizer"):
            cfgmod.load_config(str(p))

    def test_bad_type_names_field(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("[training]\nbatch_size = many\n")
        with pytest.raises(ContractError, match="batch_size"):
            cfgmod.load_config(str(p))

    def test_missing_file_names_path(self):
        with pytest.raises(ContractError, match="nope.cfg"):
            cfgmod.load_config("nope.cfg")

    def test_training_config_and_override(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("[training]\nbeam_size = 3\n")
        cfg = cfgmod.load_config(str(p))
        tc = cfgmod.training_config(cfg, lam=1.0)
        assert tc.beam_size == 3 and tc.lam == 1.0

    def test_build_corpus_semi_split_keeps_heldout_gold(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("[data]\ntask = toy\nsize = 100\nproportion = 0.5\n")
        corpus = cfgmod.build_corpus(cfgmod.load_config(str(p)))
        assert len(corpus.train) == 40  # half of the 80-pair train split
        assert len(corpus.meta["heldout_pairs"]) == 40
        assert len(corpus.valid) == 10 and len(corpus.test) == 10


class TestAnalysis:
    def test_rank_gold_signal_bounds_and_conventions(self):
        parser, generator, _, _, _ = tiny_instance(seed=4)
        from dualdim.dimcore import TrainingConfig
        config = TrainingConfig(beam_size=3, max_decode_len=4,
                                embed_dim=3, hidden_dim=3)
        pairs = [(["a"], ["b"]), (["b", "a"], ["a", "a"])]
        records = analysis.rank_gold_signal(parser, generator,
                                            lambda seq: -1.0, pairs, config)
        assert len(records) == 2
        for rec in records:
            assert 1 <= rec["rank"] <= rec["pool_size"]

    def test_gold_much_better_is_rank_one(self):
        parser, _, _, _, _ = tiny_instance(seed=4)
        from dualdim.dimcore import TrainingConfig
        config = TrainingConfig(beam_size=3, max_decode_len=4,
                                embed_dim=3, hidden_dim=3)
        gold = ["b", "b"]
        dual = lambda src, tgt: 0.0 if list(src) == gold else -100.0
        records = analysis.rank_gold_signal(parser, dual, lambda seq: -1.0,
                                            [(["a"], gold)], config)
        assert records[0]["rank"] == 1

    def test_identical_checkpoints_identical_distributions(self):
        parser, generator, _, _, _ = tiny_instance(seed=10)
        from dualdim.dimcore import TrainedModels, TrainingConfig
        config = TrainingConfig(beam_size=5, max_decode_len=4,
                                embed_dim=3, hidden_dim=3)
        models = TrainedModels(parser=parser, generator=generator,
                               p_lm=lambda seq: -1.0, q_lm=lambda seq: -1.0)
        pairs = [(["a"], ["b"]), (["b"], ["a", "a"])]
        out = analysis.export_lower_bound_histogram(models, models, pairs,
                                                    config, bins=10)
        for direction in ("e", "d"):
            frag = out[direction]
            assert frag["super_values"] == frag["dim_values"]
            assert abs(frag["super_mean"] - frag["dim_mean"]) < 1e-12
            assert all(s == d for _, s, d in frag["histogram"])

    def test_histogram_row_format(self):
        parser, generator, _, _, _ = tiny_instance(seed=10)
        from dualdim.dimcore import TrainedModels, TrainingConfig
        config = TrainingConfig(beam_size=3, max_decode_len=4,
                                embed_dim=3, hidden_dim=3)
        models = TrainedModels(parser=parser, generator=generator,
                               p_lm=lambda seq: -1.0, q_lm=lambda seq: -1.0)
        out = analysis.export_lower_bound_histogram(
            models, models, [(["a"], ["b"])], config)
        assert len(out["e"]["histogram"]) == 30  # default bin count
        for edge, s, d in out["e"]["histogram"]:
            assert isinstance(edge, float) and isinstance(s, int)


def write_tiny_cfg(path, **data_extra):
    lines = ["[data]", "task = toy", "size = 60", "seed = 0"]
    for k, v in data_extra.items():
        lines.append(f"{k} = {v}")
    lines += [
        "[model]", "embed_dim = 4", "hidden_dim = 4",
        "lm_embed_dim = 4", "lm_hidden_dim = 4",
        "[training]", "batch_size = 8", "beam_size = 1",
        "max_decode_len = 30", "max_pretrain_epochs = 1",
        "max_lm_epochs = 1", "max_joint_epochs = 1",
        "[dim]", "lambda = 0.1",
    ]
    path.write_text("\n".join(lines) + "\n")


class TestCli:
    def test_unknown_subcommand_exits_2(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_missing_config_exits_1_with_path(self, capsys):
        code = main(["gen-toy", "--config", "missing.cfg"])
        assert code == 1
        assert "missing.cfg" in capsys.readouterr().err

    def test_invalid_config_exits_1(self, tmp_path, capsys):
        p = tmp_path / "c.cfg"
        p.write_text("[training]\nbatch_size = many\n")
        assert main(["gen-toy", "--config", str(p)]) == 1
        assert "batch_size" in capsys.readouterr().err

    def test_gen_toy_writes_splits_and_manifest(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        write_tiny_cfg(cfg)
        out = tmp_path / "corpus"
        assert main(["gen-toy", "--config", str(cfg), "--out", str(out)]) == 0
        for name in ("train.tsv", "valid.tsv", "test.tsv", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["train"] == 48

    def test_train_evaluate_analyze_pipeline(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        write_tiny_cfg(cfg)
        run = tmp_path / "run"
        assert main(["train-dim", "--config", str(cfg), "--out", str(run)]) == 0
        for name in ("parser.ckpt", "generator.ckpt", "p_lm.ckpt", "q_lm.ckpt",
                     "nl.vocab", "mr.vocab", "trace.jsonl", "metrics.json"):
            assert (run / name).exists()

        ev = tmp_path / "eval"
        assert main(["evaluate", "--config", str(cfg), "--models", str(run),
                     "--out", str(ev)]) == 0
        metrics = json.loads((ev / "metrics.json").read_text())
        assert 0.0 <= metrics["exact_match_accuracy"] <= 1.0
        assert 0.0 <= metrics["bleu4"] <= 1.0

        an = tmp_path / "analysis"
        assert main(["analyze", "--config", str(cfg), "--models", str(run),
                     "--baseline-models", str(run), "--out", str(an)]) == 0
        for name in ("histogram_e.csv", "histogram_e.png", "histogram_d.csv",
                     "histogram_d.png", "ranks.csv", "ranks.png",
                     "summary.json"):
            assert (an / name).exists()
        summary = json.loads((an / "summary.json").read_text())
        # Identical checkpoints on both sides: no mean shift.  At this
        # barely-trained scale pools can come back empty (NaN means), in
        # which case both sides must be equally empty.
        sup = summary["bound_e"]["super_mean"]
        dim = summary["bound_e"]["dim_mean"]
        assert (math.isnan(sup) and math.isnan(dim)) or abs(sup - dim) < 1e-9
        assert summary["median_gold_rank"] >= 1

    def test_semidim_requires_partial_proportion(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        write_tiny_cfg(cfg)
        assert main(["train-semidim", "--config", str(cfg)]) == 1

    def test_evaluate_after_reload_is_deterministic(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        write_tiny_cfg(cfg)
        run = tmp_path / "run"
        assert main(["train-dim", "--config", str(cfg), "--out", str(run)]) == 0
        ev1, ev2 = tmp_path / "e1", tmp_path / "e2"
        main(["evaluate", "--config", str(cfg), "--models", str(run),
              "--out", str(ev1)])
        main(["evaluate", "--config", str(cfg), "--models", str(run),
              "--out", str(ev2)])
        assert (ev1 / "metrics.json").read_bytes() == \
            (ev2 / "metrics.json").read_bytes()

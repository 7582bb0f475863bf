"""Tests for corpus loading, preprocessing, splits, and the toy task."""

import json

import pytest

from dualdim import corpus as cp
from dualdim.errors import ContractError
from dualdim.seqmodels import UNK_ID


class TestLoadPairs:
    def test_three_lines_give_three_examples(self, tmp_path):
        p = tmp_path / "pairs.tsv"
        p.write_text("List flights\t( flight $0 )\n"
                     "Show fares\t( fare $0 )\n"
                     "What airlines\t( airline $0 )\n")
        exs = cp.load_pairs(str(p))
        assert len(exs) == 3
        assert exs[0].nl == ["list", "flights"]  # lowercased
        assert exs[0].mr == ["(", "flight", "$0", ")"]

    def test_malformed_line_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("good\t( ok )\nno tab here\n")
        with pytest.raises(ContractError, match=":2"):
            cp.load_pairs(str(p))

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.tsv"
        p.write_text("")
        with pytest.raises(ContractError):
            cp.load_pairs(str(p))

    @pytest.mark.parametrize("fmt", ["tsv", "jsonl"])
    def test_round_trip(self, tmp_path, fmt):
        exs = [cp.PairedExample(nl=["list", "flights"], mr=["(", "flight", ")"],
                                origin="a"),
               cp.PairedExample(nl=["show", "fares"], mr=["(", "fare", ")"],
                                origin="b")]
        p = tmp_path / f"rt.{fmt}"
        cp.save_pairs(exs, str(p), fmt=fmt)
        back = cp.load_pairs(str(p), fmt=fmt)
        assert [(e.nl, e.mr) for e in back] == [(e.nl, e.mr) for e in exs]

    def test_jsonl_malformed_record(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text(json.dumps({"nl": "a"}) + "\n")
        with pytest.raises(ContractError, match=":1"):
            cp.load_pairs(str(p), fmt="jsonl")


class TestAnonymizePlaceholders:
    def test_single_quoted_string_inside_token(self):
        (nl, mr), mapping = cp.anonymize_placeholders(
            mr_tokens=['print("hello")'], nl_tokens=["print", "hello"])
        assert mr == ["print(place_holder_0)"]
        assert mapping == {"place_holder_0": '"hello"'}

    def test_no_quotes_is_identity(self):
        (nl, mr), mapping = cp.anonymize_placeholders(["(", "x", ")"], ["a", "b"])
        assert (nl, mr) == (["a", "b"], ["(", "x", ")"])
        assert mapping == {}

    def test_repeated_string_shares_index(self):
        (nl, mr), mapping = cp.anonymize_placeholders(
            mr_tokens=['f("x")', 'g("x")'], nl_tokens=["call"])
        assert mr == ["f(place_holder_0)", "g(place_holder_0)"]
        assert len(mapping) == 1

    def test_indexing_order_nl_first(self):
        (nl, mr), mapping = cp.anonymize_placeholders(
            mr_tokens=['"b"'], nl_tokens=['"a"'])
        assert nl == ["place_holder_0"]
        assert mr == ["place_holder_1"]

    def test_multi_token_span(self):
        (nl, mr), mapping = cp.anonymize_placeholders(
            mr_tokens=['"', "new", "york", '"'], nl_tokens=["flights"])
        assert mr == ["place_holder_0"]
        assert mapping["place_holder_0"] == '" new york "'

    def test_unbalanced_quotes_rejected(self):
        with pytest.raises(ContractError, match="mr"):
            cp.anonymize_placeholders(['"', "oops"], ["fine"])

    def test_deanonymize_is_exact_inverse(self):
        nl0 = ["say", '"hi"', "and", '"bye"']
        mr0 = ['emit("hi")', 'emit("bye")']
        (nl, mr), mapping = cp.anonymize_placeholders(mr0, nl0)
        assert cp.deanonymize_placeholders(nl, mapping) == nl0
        assert cp.deanonymize_placeholders(mr, mapping) == mr0


class TestLinearizeMr:
    def test_counting(self):
        assert len(cp.linearize_mr("( lambda $0 ( flight $0 ) )")) == 8

    def test_idempotent_and_round_trip(self):
        toks = cp.linearize_mr("( lambda $0 )")
        assert cp.linearize_mr(toks) == toks
        assert " ".join(toks) == "( lambda $0 )"


class TestBuildVocab:
    def test_min_count_filters(self):
        vocab = cp.build_vocab([["a", "a", "a", "b"]], min_count=2)
        assert "a" in vocab
        assert "b" not in vocab
        assert vocab.id("b") == UNK_ID

    def test_min_count_one_covers_training_set(self):
        seqs = [["x", "y"], ["y", "z"]]
        vocab = cp.build_vocab(seqs, min_count=1)
        assert all(vocab.id(t) != UNK_ID for s in seqs for t in s)

    def test_equal_frequency_lexicographic(self):
        vocab = cp.build_vocab([["b", "a", "c"]], min_count=1)
        assert [vocab.token(i) for i in (4, 5, 6)] == ["a", "b", "c"]


def toy_pairs(n):
    return [cp.PairedExample(nl=[f"nl{i}"], mr=[f"mr{i}"], origin=str(i))
            for i in range(n)]


class TestSubsampleSemiSplit:
    def test_floor_proportion_and_conservation(self):
        pairs = toy_pairs(11)
        semi = cp.subsample_semi_split(pairs, 0.5, seed=0)
        assert len(semi.train) == 5
        assert len(semi.unlabeled_x) == len(semi.unlabeled_y) == 6
        assert len(semi.train) + len(semi.meta["unlabeled_origins"]) == 11

    def test_same_seed_same_split(self):
        pairs = toy_pairs(20)
        a = cp.subsample_semi_split(pairs, 0.3, seed=7)
        b = cp.subsample_semi_split(pairs, 0.3, seed=7)
        assert [e.origin for e in a.train] == [e.origin for e in b.train]
        assert a.meta["unlabeled_origins"] == b.meta["unlabeled_origins"]

    def test_proportion_one_gives_empty_unlabeled(self):
        semi = cp.subsample_semi_split(toy_pairs(8), 1.0, seed=1)
        assert semi.unlabeled_x == [] and semi.unlabeled_y == []
        assert len(semi.train) == 8

    def test_side_selection(self):
        semi = cp.subsample_semi_split(toy_pairs(10), 0.5, seed=2, side="x")
        assert semi.unlabeled_x and not semi.unlabeled_y

    def test_bad_proportion_rejected(self):
        with pytest.raises(ContractError):
            cp.subsample_semi_split(toy_pairs(4), 0.0, seed=0)
        with pytest.raises(ContractError):
            cp.subsample_semi_split(toy_pairs(4), 1.5, seed=0)

    def test_disjoint_origins(self):
        pairs = toy_pairs(10)
        semi = cp.subsample_semi_split(pairs, 0.4, seed=3)
        labeled = {e.origin for e in semi.train}
        assert labeled.isdisjoint(semi.meta["unlabeled_origins"])


class TestGenerateToyTask:
    def test_deterministic(self):
        a = cp.generate_toy_task(seed=0, size=200)
        b = cp.generate_toy_task(seed=0, size=200)
        assert [e.origin for e in a.train] == [e.origin for e in b.train]
        assert [e.nl for e in a.test] == [e.nl for e in b.test]

    def test_split_sizes(self):
        c = cp.generate_toy_task(seed=1, size=1000)
        assert (len(c.train), len(c.valid), len(c.test)) == (800, 100, 100)

    def test_well_parenthesized_mrs(self):
        c = cp.generate_toy_task(seed=2, size=300)
        for ex in c.train + c.valid + c.test:
            depth = 0
            for t in ex.mr:
                depth += (t == "(") - (t == ")")
                assert depth >= 0
            assert depth == 0

    def test_no_duplicate_pairs(self):
        c = cp.generate_toy_task(seed=3, size=500)
        all_pairs = [(" ".join(e.nl), " ".join(e.mr))
                     for e in c.train + c.valid + c.test]
        assert len(set(all_pairs)) == len(all_pairs)

    def test_capacity_bound(self):
        grammar = {
            "templates": (cp._PAIR_TEMPLATES[0], cp._PAIR_TEMPLATES[1]),
            "day_template": None,
            "cities": cp.DEFAULT_CITIES[:10],
            "days": (),
        }
        # 2 templates over 10 entities: at most 2 * 10 * 9 ordered pairs.
        c = cp.generate_toy_task(seed=0, size=180, grammar=grammar)
        assert c.meta["grammar_capacity"] == 180
        with pytest.raises(ContractError, match="180"):
            cp.generate_toy_task(seed=0, size=181, grammar=grammar)

    def test_manifest(self, tmp_path):
        c = cp.generate_toy_task(seed=4, size=100)
        path = tmp_path / "manifest.json"
        cp.save_manifest(c, str(path))
        m = json.loads(path.read_text())
        assert m["train"] == 80 and m["valid"] == 10 and m["test"] == 10
        assert m["nl_vocab_hash"]

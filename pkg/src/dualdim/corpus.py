"""Corpus ingestion, preprocessing, splits, and a synthetic toy task.

Pair files come in two flavors: tab-separated (one ``nl<TAB>mr`` record
per line) and line-delimited JSON records (which can carry placeholder
maps and origin ids).  Natural-language sides are lowercased; both sides
are whitespace-tokenized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ContractError
from .rng import substream
from .seqmodels.vocab import Vocabulary

PLACEHOLDER_PREFIX = "place_holder_"


@dataclass
class PairedExample:
    nl: list[str]
    mr: list[str]
    placeholders: dict[str, str] = field(default_factory=dict)
    origin: str = ""


@dataclass
class Corpus:
    train: list[PairedExample]
    valid: list[PairedExample]
    test: list[PairedExample]
    unlabeled_x: list[list[str]] = field(default_factory=list)
    unlabeled_y: list[list[str]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Loading / saving


def load_pairs(path: str, fmt: str = "tsv") -> list[PairedExample]:
    """Read paired examples; NL lowercased, both sides whitespace-tokenized."""
    if fmt not in ("tsv", "jsonl"):
        raise ContractError(f"unknown pair-file format {fmt!r}")
    examples: list[PairedExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if fmt == "tsv":
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ContractError(
                        f"{path}:{lineno}: expected 2 tab-separated fields, "
                        f"got {len(parts)}")
                nl_text, mr_text = parts
                placeholders: dict[str, str] = {}
                origin = f"{path}:{lineno}"
            else:
                try:
                    rec = json.loads(line)
                    nl_text, mr_text = rec["nl"], rec["mr"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ContractError(f"{path}:{lineno}: malformed record ({exc})")
                placeholders = dict(rec.get("placeholders", {}))
                origin = str(rec.get("origin", f"{path}:{lineno}"))
            examples.append(PairedExample(
                nl=nl_text.lower().split(),
                mr=mr_text.split(),
                placeholders=placeholders,
                origin=origin,
            ))
    if not examples:
        raise ContractError(f"{path}: no examples found")
    return examples


def save_pairs(examples: list[PairedExample], path: str, fmt: str = "tsv"):
    if fmt not in ("tsv", "jsonl"):
        raise ContractError(f"unknown pair-file format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            if fmt == "tsv":
                fh.write(" ".join(ex.nl) + "\t" + " ".join(ex.mr) + "\n")
            else:
                fh.write(json.dumps({
                    "nl": " ".join(ex.nl),
                    "mr": " ".join(ex.mr),
                    "placeholders": ex.placeholders,
                    "origin": ex.origin,
                }) + "\n")


# ---------------------------------------------------------------------------
# Preprocessing


def _replace_quoted(tokens: list[str], index_of: dict[str, str], order: list[str],
                    label: str) -> list[str]:
    if sum(t.count('"') for t in tokens) % 2 != 0:
        raise ContractError(f"unbalanced quotes in {label} sequence: {tokens}")
    out: list[str] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        quoted = None
        if len(tok) >= 2 and tok.count('"') == 2:
            # A fully quoted span inside one token, e.g. print("hello").
            start = tok.index('"')
            end = tok.rindex('"')
            quoted = tok[start:end + 1]
            prefix, suffix = tok[:start], tok[end + 1:]
            skip = 1
        elif tok == '"':
            # A quoted span across tokens: " hello world ".
            j = i + 1
            while tokens[j] != '"':
                j += 1
            quoted = " ".join(tokens[i:j + 1])
            prefix = suffix = ""
            skip = j + 1 - i
        if quoted is None:
            out.append(tok)
            i += 1
            continue
        if quoted not in index_of:
            name = f"{PLACEHOLDER_PREFIX}{len(order)}"
            index_of[quoted] = name
            order.append(quoted)
        out.append(prefix + index_of[quoted] + suffix)
        i += skip
    return out


def anonymize_placeholders(mr_tokens, nl_tokens):
    """Replace quoted strings with indexed placeholder tokens.

    The k-th distinct quoted string, in order of first appearance across
    the NL side then the MR side, becomes ``place_holder_k``; identical
    strings share an index.  Returns ((nl', mr'), map) where the map sends
    each placeholder name to the original quoted string.
    """
    index_of: dict[str, str] = {}
    order: list[str] = []
    nl_out = _replace_quoted(list(nl_tokens), index_of, order, "nl")
    mr_out = _replace_quoted(list(mr_tokens), index_of, order, "mr")
    mapping = {index_of[q]: q for q in order}
    return (nl_out, mr_out), mapping


def deanonymize_placeholders(tokens, mapping: dict[str, str]) -> list[str]:
    """Exact inverse of anonymize_placeholders on a token sequence."""
    out: list[str] = []
    for tok in tokens:
        expanded = tok
        for name, original in mapping.items():
            if name in expanded:
                expanded = expanded.replace(name, original)
        out.extend(expanded.split(" "))
    return out


def linearize_mr(mr) -> list[str]:
    """Meaning representations as flat token sequences; idempotent."""
    if isinstance(mr, str):
        return mr.split()
    return list(mr)


def build_vocab(sequences, min_count: int = 1) -> Vocabulary:
    """Frequency-filtered vocabulary with fixed reserved ids."""
    return Vocabulary.from_sequences(sequences, min_count=min_count)


# ---------------------------------------------------------------------------
# Semi-supervised split construction


def subsample_semi_split(train_pairs: list[PairedExample], proportion: float,
                         seed: int, side: str = "both") -> Corpus:
    """Keep the first floor(proportion*N) pairs of a seeded shuffle labeled.

    The remaining pairs contribute their selected side(s) as unlabeled
    sequences, with the pairing discarded.
    """
    if not 0 < proportion <= 1:
        raise ContractError(f"proportion must be in (0, 1], got {proportion}")
    if side not in ("x", "y", "both"):
        raise ContractError(f"unknown unlabeled side {side!r}")
    rng = substream(seed, "semi-split")
    order = rng.permutation(len(train_pairs))
    shuffled = [train_pairs[i] for i in order]
    n_labeled = int(proportion * len(train_pairs))
    labeled, rest = shuffled[:n_labeled], shuffled[n_labeled:]
    unlabeled_x = [list(ex.nl) for ex in rest] if side in ("x", "both") else []
    unlabeled_y = [list(ex.mr) for ex in rest] if side in ("y", "both") else []
    return Corpus(
        train=labeled, valid=[], test=[],
        unlabeled_x=unlabeled_x, unlabeled_y=unlabeled_y,
        meta={"proportion": proportion, "seed": seed, "side": side,
              "source_size": len(train_pairs),
              "unlabeled_origins": [ex.origin for ex in rest]},
    )


# ---------------------------------------------------------------------------
# Synthetic toy task


DEFAULT_CITIES = (
    "atlanta", "baltimore", "boston", "dallas", "denver", "memphis",
    "milwaukee", "oakland", "philadelphia", "phoenix", "pittsburgh", "seattle",
)
DEFAULT_DAYS = (
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
)

_PAIR_TEMPLATES = (
    ("list flights from {X} to {Y}",
     "( lambda $0 ( and ( flight $0 ) ( from $0 {X} ) ( to $0 {Y} ) ) )"),
    ("show me the fares from {X} to {Y}",
     "( lambda $0 ( fare $0 {X} {Y} ) )"),
    ("what airlines fly from {X} to {Y}",
     "( lambda $0 ( airline $0 {X} {Y} ) )"),
)
_DAY_TEMPLATE = (
    "list flights from {X} to {Y} on {D}",
    "( lambda $0 ( flight $0 {X} {Y} {D} ) )",
)

DEFAULT_GRAMMAR = {
    "templates": _PAIR_TEMPLATES,
    "day_template": _DAY_TEMPLATE,
    "cities": DEFAULT_CITIES,
    "days": DEFAULT_DAYS,
}


def _enumerate_grammar(grammar) -> list[tuple[str, str]]:
    pairs = []
    cities = grammar["cities"]
    for nl_t, mr_t in grammar["templates"]:
        for x in cities:
            for y in cities:
                if x == y:
                    continue
                pairs.append((nl_t.format(X=x, Y=y), mr_t.format(X=x, Y=y)))
    day_t = grammar.get("day_template")
    if day_t is not None:
        nl_t, mr_t = day_t
        for x in cities:
            for y in cities:
                if x == y:
                    continue
                for d in grammar["days"]:
                    pairs.append((nl_t.format(X=x, Y=y, D=d),
                                  mr_t.format(X=x, Y=y, D=d)))
    # Construction cannot repeat a pair, but guard against a bad grammar.
    if len(set(pairs)) != len(pairs):
        seen = set()
        pairs = [p for p in pairs if not (p in seen or seen.add(p))]
    return pairs


def generate_toy_task(seed: int, size: int = 1000, grammar=None) -> Corpus:
    """Deterministic flight-domain pairs with an 8:1:1 train/valid/test split."""
    if size < 1:
        raise ContractError("size must be >= 1")
    grammar = grammar or DEFAULT_GRAMMAR
    pairs = _enumerate_grammar(grammar)
    if size > len(pairs):
        raise ContractError(
            f"grammar yields only {len(pairs)} unique pairs, {size} requested")
    rng = substream(seed, "toy-task")
    order = rng.permutation(len(pairs))
    chosen = [pairs[i] for i in order[:size]]
    examples = [
        PairedExample(nl=nl.split(), mr=mr.split(), origin=f"toy-{order[k]}")
        for k, (nl, mr) in enumerate(chosen)
    ]
    n_train = (size * 8) // 10
    n_valid = (size - n_train) // 2
    return Corpus(
        train=examples[:n_train],
        valid=examples[n_train:n_train + n_valid],
        test=examples[n_train + n_valid:],
        meta={"seed": seed, "size": size, "task": "toy-flights",
              "grammar_capacity": len(pairs)},
    )


def corpus_manifest(corpus: Corpus) -> dict:
    """Split sizes, vocabulary fingerprints, and origin metadata."""
    import hashlib

    def vocab_hash(seqs):
        vocab = Vocabulary.from_sequences(seqs) if seqs else None
        if vocab is None:
            return None
        blob = "\n".join(vocab.token(i) for i in range(len(vocab)))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    return {
        "train": len(corpus.train),
        "valid": len(corpus.valid),
        "test": len(corpus.test),
        "unlabeled_x": len(corpus.unlabeled_x),
        "unlabeled_y": len(corpus.unlabeled_y),
        "nl_vocab_hash": vocab_hash([ex.nl for ex in corpus.train]),
        "mr_vocab_hash": vocab_hash([ex.mr for ex in corpus.train]),
        "meta": corpus.meta,
    }


def save_manifest(corpus: Corpus, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(corpus_manifest(corpus), fh, indent=2, sort_keys=True)
        fh.write("\n")

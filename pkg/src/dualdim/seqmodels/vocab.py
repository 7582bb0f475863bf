"""Token <-> id mapping with fixed reserved ids."""

from __future__ import annotations

from collections import Counter

from ..errors import ContractError

PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)


class Vocabulary:
    def __init__(self, tokens):
        """`tokens` are the non-reserved entries, already ordered."""
        self._tokens = list(RESERVED)
        for t in tokens:
            if t in RESERVED:
                raise ContractError(f"token {t!r} collides with a reserved entry")
            self._tokens.append(t)
        self._ids = {t: i for i, t in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ContractError("duplicate tokens in vocabulary")

    @classmethod
    def from_sequences(cls, sequences, min_count: int = 1) -> "Vocabulary":
        """Frequency-filtered vocabulary; equal counts break ties lexicographically."""
        counts = Counter()
        for seq in sequences:
            counts.update(seq)
        if not counts:
            raise ContractError("cannot build a vocabulary from an empty corpus")
        kept = [t for t, c in counts.items() if c >= min_count and t not in RESERVED]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls(kept)

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def ids(self, tokens) -> list[int]:
        return [self._ids.get(t, UNK_ID) for t in tokens]

    def __len__(self) -> int:
        return len(self._tokens)

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        if tokens[:4] != list(RESERVED):
            raise ContractError(f"{path}: reserved tokens missing or out of order")
        return cls(tokens[4:])

"""Beam-search decoding over the copy-augmented output distribution.

Hypotheses are scored by raw cumulative log-probability (no length
normalization).  Ties break lexicographically on the token-id sequence,
matching the enumeration oracle's rule.  PAD, BOS and UNK are never
emitted; out-of-vocabulary surfaces enter only through copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ContractError
from .seq2seq import Seq2SeqModel, decode_step_distribution, surface_distribution
from .vocab import BOS, BOS_ID, EOS, PAD, UNK


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]          # BOS-prefixed target ids
    tokens: tuple[str, ...]       # emitted surfaces, EOS excluded
    log_prob: float
    finished: bool


_BANNED = {PAD, BOS, UNK}


def beam_search(model: Seq2SeqModel, src_tokens, beam_size: int,
                max_len: int) -> list[Hypothesis]:
    """Top beam_size finished hypotheses; truncated ones only as a fallback."""
    if beam_size < 1 or max_len < 1:
        raise ContractError("beam_search: beam_size and max_len must be >= 1")
    H_src, h0, c0 = model.encode(src_tokens)
    enc_scores = model.attention_scores_precompute(H_src)

    # live entries: (sort_key_ids, tokens, log_prob, h, c)
    live = [((BOS_ID,), (), 0.0, h0, c0)]
    finished: list[Hypothesis] = []

    for _ in range(max_len):
        if not live:
            break
        expansions = []
        for ids, tokens, lp, h, c in live:
            h2, c2, alpha, p_vocab, gate = model.decode_step(
                ids[-1], h, c, H_src, enc_scores)
            dist = decode_step_distribution(model, alpha, p_vocab, gate, src_tokens)
            for tok, prob in surface_distribution(model, dist, src_tokens).items():
                if tok in _BANNED or prob <= 0.0:
                    continue
                new_ids = ids + (model.tgt_vocab.id(tok),)
                expansions.append(
                    (new_ids + (tok,), tokens + (tok,), lp + math.log(prob), h2, c2))
        expansions.sort(key=lambda e: (-e[2], e[0]))
        live = []
        for ids_key, tokens, lp, h, c in expansions[:beam_size]:
            ids = ids_key[:len(tokens) + 1]
            if tokens[-1] == EOS:
                finished.append(Hypothesis(ids, tokens[:-1], lp, True))
            else:
                live.append((ids, tokens, lp, h, c))
        # Scores only decrease with length: once beam_size finished hypotheses
        # beat every live prefix, no live continuation can enter the pool.
        if len(finished) >= beam_size:
            kth = sorted(finished, key=lambda f: -f.log_prob)[beam_size - 1].log_prob
            if all(lp <= kth for _, _, lp, _, _ in live):
                break

    finished.sort(key=lambda f: (-f.log_prob, f.ids))
    if finished:
        return finished[:beam_size]
    return [Hypothesis(ids, tokens, lp, False) for ids, tokens, lp, _, _ in live[:beam_size]]

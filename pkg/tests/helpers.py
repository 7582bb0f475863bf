"""Shared builders for tiny randomized model instances."""

from __future__ import annotations

import numpy as np

from dualdim import oracle as orc
from dualdim import seqmodels as sm
from dualdim.rng import substream


def tiny_instance(seed: int, n_content: int = 2, max_len: int = 3,
                  embed: int = 3, hidden: int = 3):
    """Random parser/generator pair sharing one tiny vocabulary.

    Returns (parser, generator, space, p_x, q_y) where p_x is an explicit
    source marginal over a few non-empty sequences and q_y an explicit
    positive marginal over the whole space.
    """
    tokens = ("a", "b", "c", "d")[:n_content]
    vocab = sm.Vocabulary(list(tokens))
    parser = sm.Seq2SeqModel("nl->mr", vocab, vocab, embed, hidden,
                             substream(seed, "tiny-parser"))
    generator = sm.Seq2SeqModel("mr->nl", vocab, vocab, embed, hidden,
                                substream(seed, "tiny-generator"))
    space = orc.enumerate_space(tokens, max_len)

    rng = substream(seed, "tiny-marginals")
    nonempty = [s for s in space.sequences if s]
    support = [nonempty[i] for i in rng.choice(len(nonempty), size=min(2, len(nonempty)),
                                               replace=False)]
    px_raw = rng.uniform(0.2, 1.0, len(support))
    p_x = orc.ExplicitMarginal(dict(zip(support, px_raw / px_raw.sum())))

    qy_raw = rng.uniform(0.2, 1.0, len(space.sequences))
    q_y = orc.ExplicitMarginal(dict(zip(space.sequences, qy_raw / qy_raw.sum())))
    return parser, generator, space, p_x, q_y


def grads_allclose(a: dict[str, np.ndarray], b: dict[str, np.ndarray],
                   atol: float) -> None:
    keys = set(a) | set(b)
    for name in keys:
        ga = a.get(name)
        gb = b.get(name)
        if ga is None:
            ga = np.zeros_like(gb)
        if gb is None:
            gb = np.zeros_like(ga)
        np.testing.assert_allclose(ga, gb, atol=atol, err_msg=f"gradient {name}")

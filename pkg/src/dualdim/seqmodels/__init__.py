from .vocab import (
    BOS,
    BOS_ID,
    EOS,
    EOS_ID,
    PAD,
    PAD_ID,
    RESERVED,
    UNK,
    UNK_ID,
    Vocabulary,
)
from .seq2seq import (
    Seq2SeqModel,
    decode_step_distribution,
    sequence_log_prob,
    supervised_loss,
    surface_distribution,
)
from .beam import Hypothesis, beam_search
from .lm import MarginalLM, lm_log_prob, lm_pretrain, perplexity


def encode_bilstm(model, tokens):
    """Per-position (len, 2H) context matrix from the top encoder layer."""
    return model.encode(tokens)[0]


def attention_context(model, s_t, H_src):
    """Attention weights and context vector for one decoder state."""
    from .. import diffcore as dc

    if H_src.shape[0] < 1:
        raise Exception("attention_context: empty source")
    keys = model.attention_scores_precompute(H_src)
    alpha = dc.softmax(dc.matmul(s_t, keys))
    return dc.matmul(alpha, H_src), alpha

from .tensor import (
    Tape,
    Tensor,
    active_tape,
    add,
    add_const,
    backward,
    concat,
    embedding_lookup,
    exp,
    log,
    log_softmax,
    lstm_cell,
    matmul,
    mul,
    neg,
    primitive_forward,
    scale,
    sigmoid,
    slice_cols,
    slice_rows,
    transpose,
    softmax,
    tanh,
    tsum,
)
from .optim import (
    ParameterStore,
    accumulate,
    adam_step,
    clip_grad_norm,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)
from .check import finite_difference_check

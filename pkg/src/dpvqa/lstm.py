"""LSTM cell and bidirectional sequence runner on the autodiff tape.

Gate blocks are packed [input, forget, cell, output] along the first axis of
the weight matrices, so w_ih is [4h, e] and w_hh is [4h, h].
"""

from __future__ import annotations

import numpy as np

from . import autodiff as T
from .params import ParamStore
from .autodiff import ContractError, Tensor


def lstm_params(store: ParamStore, prefix: str, input_dim: int, hidden: int):
    w_ih = store.weight(f"{prefix}.w_ih", 4 * hidden, input_dim)
    w_hh = store.weight(f"{prefix}.w_hh", 4 * hidden, hidden)
    b = store.zeros(f"{prefix}.b", 4 * hidden)
    return w_ih, w_hh, b


def _gate_update(z: Tensor, c: Tensor, hidden: int) -> tuple[Tensor, Tensor]:
    i = T.sigmoid(z[0:hidden])
    f = T.sigmoid(z[hidden:2 * hidden])
    g = T.tanh(z[2 * hidden:3 * hidden])
    o = T.sigmoid(z[3 * hidden:4 * hidden])
    c2 = T.add(T.mul(f, c), T.mul(i, g))
    h2 = T.mul(o, T.tanh(c2))
    return h2, c2


def lstm_step(x: Tensor, h: Tensor, c: Tensor, w_ih: Tensor, w_hh: Tensor,
              b: Tensor) -> tuple[Tensor, Tensor]:
    """One cell update; returns (h', c')."""
    z = T.add(T.linear(x, w_ih, b), T.linear(h, w_hh))
    return _gate_update(z, c, h.shape[-1])


def run_lstm(seq: Tensor, w_ih: Tensor, w_hh: Tensor, b: Tensor,
             reverse: bool = False) -> tuple[list[Tensor], Tensor]:
    """Run over seq [S, e]; returns per-step hidden states (input order) and
    the final hidden state of the scan direction."""
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise ContractError(f"lstm expects a non-empty [S, e] sequence, got {seq.shape}")
    steps = seq.shape[0]
    hidden = w_hh.shape[1]
    # The input projections of all steps batch into one matmul.
    z_in = T.linear(seq, w_ih, b)
    h = Tensor(np.zeros(hidden, dtype=seq.dtype))
    c = Tensor(np.zeros(hidden, dtype=seq.dtype))
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    states: list[Tensor | None] = [None] * steps
    for s in order:
        z = T.add(z_in[s], T.linear(h, w_hh))
        h, c = _gate_update(z, c, hidden)
        states[s] = h
    return states, h  # type: ignore[return-value]


def bilstm(seq: Tensor, fwd_params, bwd_params) -> tuple[Tensor, Tensor, Tensor]:
    """Bidirectional pass; returns (states [S, 2h], final_fwd, final_bwd).

    states[s] concatenates the forward and backward hidden states at step s.
    """
    fwd_states, final_fwd = run_lstm(seq, *fwd_params)
    bwd_states, final_bwd = run_lstm(seq, *bwd_params, reverse=True)
    states = T.stack([T.concat([f, bkw]) for f, bkw in zip(fwd_states, bwd_states)])
    return states, final_fwd, final_bwd

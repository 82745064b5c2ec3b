"""Multi-step control/read/write reasoning over a spatial knowledge grid.

Each step projects the question through step-specific weights, attends over
the question words to form a control state, attends over grid locations to
retrieve a read vector, and folds it into the memory. Unit weights are shared
across steps; only the question projections are per-step. Initial control and
memory states are learned vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as T
from .autodiff import ContractError, Tensor
from .language import EncodedQuestion
from .params import ParamStore


@dataclass
class MacTrace:
    """Per-step attention distributions: words [P, S], locations [P, W, H]."""

    word_weights: np.ndarray
    location_weights: np.ndarray


class MacReasoner:
    def __init__(self, store: ParamStore, d: int, steps: int, prefix: str = "mac"):
        if steps < 1:
            raise ContractError(f"step count must be >= 1, got {steps}")
        self.d = d
        self.steps = steps
        self._q_proj = [
            (store.weight(f"{prefix}.q{i}.w", d, d), store.zeros(f"{prefix}.q{i}.b", d))
            for i in range(1, steps + 1)
        ]
        self.ctrl_in_w = store.weight(f"{prefix}.ctrl.in.w", d, d)
        self.ctrl_join_w = store.weight(f"{prefix}.ctrl.join.w", d, 2 * d)
        self.ctrl_att_w = store.weight(f"{prefix}.ctrl.att.w", 1, d)
        self.ctrl_att_b = store.zeros(f"{prefix}.ctrl.att.b", 1)
        self.read_in_w = store.weight(f"{prefix}.read.in.w", d, 2 * d)
        self.read_att_w = store.weight(f"{prefix}.read.att.w", 1, d)
        self.read_att_b = store.zeros(f"{prefix}.read.att.b", 1)
        self.write_w = store.weight(f"{prefix}.write.w", d, 2 * d)
        self.write_b = store.zeros(f"{prefix}.write.b", d)
        self.c0 = store.weight(f"{prefix}.c0", d)
        self.m0 = store.weight(f"{prefix}.m0", d)

    def project_question(self, q: Tensor, step: int) -> Tensor:
        """Step-specific view of the question vector (steps are 1-indexed)."""
        if not 1 <= step <= self.steps:
            raise ContractError(f"step {step} outside 1..{self.steps}")
        w, b = self._q_proj[step - 1]
        return T.linear(q, w, b)

    def control(self, q_i: Tensor, words: Tensor,
                c_prev: Tensor) -> tuple[Tensor, Tensor]:
        """Word attention conditioned on (previous control, projected question)."""
        if words.ndim != 2 or words.shape[0] < 1:
            raise ContractError(f"control unit needs [S, d] words, got {words.shape}")
        joined = T.linear(T.concat([T.linear(c_prev, self.ctrl_in_w), q_i]),
                          self.ctrl_join_w)
        scores = T.reshape(T.linear(T.mul(joined, words),
                                    self.ctrl_att_w, self.ctrl_att_b),
                           (words.shape[0],))
        alpha = T.softmax(scores)
        return T.weighted_sum(alpha, words), alpha

    def read(self, m_prev: Tensor, grid_flat: Tensor,
             c_i: Tensor) -> tuple[Tensor, Tensor]:
        """Location attention over the knowledge grid, gated by memory."""
        if grid_flat.ndim != 2 or grid_flat.shape[0] < 1:
            raise ContractError(f"read unit needs [n, d] cells, got {grid_flat.shape}")
        interactions = T.linear(
            T.concat([T.mul(m_prev, grid_flat), grid_flat], axis=-1), self.read_in_w)
        scores = T.reshape(T.linear(T.mul(c_i, interactions),
                                    self.read_att_w, self.read_att_b),
                           (grid_flat.shape[0],))
        alpha = T.softmax(scores)
        return T.weighted_sum(alpha, grid_flat), alpha

    def write(self, m_prev: Tensor, retrieved: Tensor) -> Tensor:
        return T.linear(T.concat([m_prev, retrieved]), self.write_w, self.write_b)

    def run(self, encoded: EncodedQuestion, grid: Tensor) -> tuple[Tensor, MacTrace]:
        """Iterate the three units for the configured number of steps.

        grid is [W, H, d]; returns the final memory and the attention trace.
        """
        w, h, d = grid.shape
        grid_flat = T.reshape(grid, (w * h, d))
        c = self.c0
        m = self.m0
        word_w = np.zeros((self.steps, encoded.length), dtype=np.float64)
        loc_w = np.zeros((self.steps, w, h), dtype=np.float64)
        for i in range(1, self.steps + 1):
            q_i = self.project_question(encoded.vector, i)
            c, alpha_c = self.control(q_i, encoded.words, c)
            r, alpha_r = self.read(m, grid_flat, c)
            m = self.write(m, r)
            word_w[i - 1] = alpha_c.data
            loc_w[i - 1] = alpha_r.data.reshape(w, h)
        return m, MacTrace(word_weights=word_w, location_weights=loc_w)


def write_trace(trace: MacTrace, fh) -> None:
    """Dump one JSON record per reasoning step."""
    for i in range(trace.word_weights.shape[0]):
        record = {
            "step": i + 1,
            "word_weights": trace.word_weights[i].tolist(),
            "location_weights": trace.location_weights[i].tolist(),
        }
        fh.write(json.dumps(record) + "\n")

"""Answer heads: open-ended classification, count regression, and
multi-choice ranking, with their training losses."""

from __future__ import annotations

import numpy as np

from . import autodiff as T
from .autodiff import ContractError, Tensor
from .params import ParamStore

COUNT_MIN = 0
COUNT_MAX = 10


class OpenEndedHead:
    """Two stacked linear layers over [memory ; projected question], then
    softmax over the answer labels; trained with cross-entropy."""

    def __init__(self, store: ParamStore, d: int, n_labels: int,
                 prefix: str = "dec.open"):
        if n_labels < 2:
            raise ContractError(f"need at least 2 answer labels, got {n_labels}")
        self.q_w = store.weight(f"{prefix}.q.w", d, d)
        self.q_b = store.zeros(f"{prefix}.q.b", d)
        self.w1 = store.weight(f"{prefix}.w1", d, 2 * d)
        self.b1 = store.zeros(f"{prefix}.b1", d)
        self.w2 = store.weight(f"{prefix}.w2", n_labels, d)
        self.b2 = store.zeros(f"{prefix}.b2", n_labels)

    def logits(self, memory: Tensor, q: Tensor) -> Tensor:
        joint = T.concat([memory, T.linear(q, self.q_w, self.q_b)])
        return T.linear(T.linear(joint, self.w1, self.b1), self.w2, self.b2)

    def probabilities(self, memory: Tensor, q: Tensor) -> Tensor:
        return T.softmax(self.logits(memory, q))

    def loss(self, memory: Tensor, q: Tensor, label: int) -> Tensor:
        return T.cross_entropy_logits(self.logits(memory, q), label)


class CountHead:
    """Scalar regression head of the same two-layer shape; predictions are
    rounded and clamped onto the 0..10 label range, the loss is MSE on the
    raw score."""

    def __init__(self, store: ParamStore, d: int, prefix: str = "dec.count"):
        self.q_w = store.weight(f"{prefix}.q.w", d, d)
        self.q_b = store.zeros(f"{prefix}.q.b", d)
        self.w1 = store.weight(f"{prefix}.w1", d, 2 * d)
        self.b1 = store.zeros(f"{prefix}.b1", d)
        self.w2 = store.weight(f"{prefix}.w2", 1, d)
        self.b2 = store.zeros(f"{prefix}.b2", 1)

    def score(self, memory: Tensor, q: Tensor) -> Tensor:
        joint = T.concat([memory, T.linear(q, self.q_w, self.q_b)])
        out = T.linear(T.linear(joint, self.w1, self.b1), self.w2, self.b2)
        return T.reshape(out, ())

    def loss(self, memory: Tensor, q: Tensor, target: float) -> Tensor:
        diff = T.sub(self.score(memory, q), float(target))
        return T.mul(diff, diff)


def count_prediction(score: float) -> int:
    """Nearest integer, clamped onto the count label range."""
    return int(min(max(round(float(score)), COUNT_MIN), COUNT_MAX))


class MultiChoiceHead:
    """Scores one answer candidate from question memory, candidate memory,
    and both projected sentence vectors."""

    def __init__(self, store: ParamStore, d: int, prefix: str = "dec.mc"):
        self.q_w = store.weight(f"{prefix}.q.w", d, d)
        self.q_b = store.zeros(f"{prefix}.q.b", d)
        self.a_w = store.weight(f"{prefix}.a.w", d, d)
        self.a_b = store.zeros(f"{prefix}.a.b", d)
        self.y_w = store.weight(f"{prefix}.y.w", d, 4 * d)
        self.y_b = store.zeros(f"{prefix}.y.b", d)
        self.out_w = store.weight(f"{prefix}.out.w", 1, d)
        self.out_b = store.zeros(f"{prefix}.out.b", 1)

    def score(self, m_question: Tensor, m_answer: Tensor, q: Tensor,
              a: Tensor) -> Tensor:
        joint = T.concat([
            m_question,
            m_answer,
            T.linear(q, self.q_w, self.q_b),
            T.linear(a, self.a_w, self.a_b),
        ])
        hidden = T.elu(T.linear(joint, self.y_w, self.y_b))
        return T.reshape(T.linear(hidden, self.out_w, self.out_b), ())


def argmax_choice(scores: list[float]) -> int:
    if len(scores) < 2:
        raise ContractError(f"multi-choice needs at least 2 candidates, got {len(scores)}")
    return int(np.argmax(scores))


def hinge_loss(s_pos, s_negs) -> Tensor:
    """Sum over negatives of max(0, 1 + s_neg - s_pos)."""
    if isinstance(s_pos, (int, float)):
        s_pos = T.tensor(float(s_pos), dtype=np.float64)
    negs = [T.tensor(float(s), dtype=np.float64) if isinstance(s, (int, float)) else s
            for s in s_negs]
    if not negs:
        raise ContractError("hinge loss needs at least one negative score")
    total = None
    for s_neg in negs:
        term = T.relu(T.add(T.sub(s_neg, s_pos), 1.0))
        total = term if total is None else T.add(total, term)
    return total


def mse_loss(score: Tensor, target: float) -> Tensor:
    diff = T.sub(score, float(target))
    return T.mul(diff, diff)

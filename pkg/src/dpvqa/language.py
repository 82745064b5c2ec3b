"""Question encoding: tokenization, vocabulary, embeddings, bi-LSTM states.

A question becomes a sequence of contextual word vectors (one per token,
forward and backward LSTM states concatenated) plus a single question vector
built from the two final hidden states.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import autodiff as T
from .autodiff import ContractError, Tensor
from .lstm import bilstm, lstm_params
from .params import ParamStore

PAD_INDEX = 0
UNK_INDEX = 1

EMBED_DIM = 300

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class VocabularyError(ValueError):
    """A token or answer index falls outside the known vocabulary."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Token and answer-label index maps. Index 0 is padding, 1 is unknown."""

    token_to_index: dict[str, int]
    answers: tuple[str, ...]

    @classmethod
    def build(cls, token_lists, answer_labels) -> "Vocabulary":
        tokens = sorted({t for toks in token_lists for t in toks})
        mapping = {t: i + 2 for i, t in enumerate(tokens)}
        answers = tuple(sorted(set(answer_labels)))
        return cls(token_to_index=mapping, answers=answers)

    @property
    def size(self) -> int:
        return len(self.token_to_index) + 2

    @property
    def n_answers(self) -> int:
        return len(self.answers)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.token_to_index.get(t, UNK_INDEX) for t in tokens],
                        dtype=np.int64)

    def answer_index(self, label: str) -> int:
        try:
            return self.answers.index(label)
        except ValueError:
            raise VocabularyError(f"unknown answer label {label!r}") from None

    def answer_label(self, index: int) -> str:
        if not 0 <= index < len(self.answers):
            raise VocabularyError(f"answer index {index} outside 0..{len(self.answers) - 1}")
        return self.answers[index]


def embed(table: Tensor, ids: np.ndarray) -> Tensor:
    """Look up embedding rows; rejects out-of-range indices."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise VocabularyError(
            f"token index outside table of {table.shape[0]} rows: {ids.tolist()}")
    return T.embedding(table, ids)


@dataclass
class EncodedQuestion:
    """Per-token states [S, d] and the pooled question vector [d]."""

    words: Tensor
    vector: Tensor

    @property
    def length(self) -> int:
        return self.words.shape[0]


class QuestionEncoder:
    """Trainable embedding table plus a bidirectional LSTM.

    The state size d is split evenly across the two directions; the question
    vector concatenates the backward-final and forward-final states, in that
    order.
    """

    def __init__(self, store: ParamStore, vocab_size: int, d: int,
                 embed_dim: int = EMBED_DIM, prefix: str = "enc"):
        if d % 2:
            raise ValueError(f"state size d must be even, got {d}")
        self.d = d
        self.embed_dim = embed_dim
        self.table = store.weight(f"{prefix}.embed", vocab_size, embed_dim)
        self.fwd = lstm_params(store, f"{prefix}.fwd", embed_dim, d // 2)
        self.bwd = lstm_params(store, f"{prefix}.bwd", embed_dim, d // 2)

    def encode(self, token_ids: np.ndarray) -> EncodedQuestion:
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.size == 0:
            raise ContractError("cannot encode an empty question")
        vectors = embed(self.table, token_ids)
        states, final_fwd, final_bwd = bilstm(vectors, self.fwd, self.bwd)
        return EncodedQuestion(words=states, vector=T.concat([final_bwd, final_fwd]))


def load_embedding_text(path, vocab: Vocabulary, table: Tensor) -> int:
    """Load pretrained vectors from UTF-8 lines of "token v1 ... v300".

    Rows for tokens present in the vocabulary are overwritten in place;
    returns how many rows were loaded.
    """
    loaded = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != table.shape[1]:
                raise VocabularyError(
                    f"embedding line for {token!r} has {len(values)} values, "
                    f"expected {table.shape[1]}")
            idx = vocab.token_to_index.get(token)
            if idx is None:
                continue
            table.data[idx] = np.asarray([float(v) for v in values], dtype=table.dtype)
            loaded += 1
    return loaded

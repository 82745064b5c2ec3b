"""Question-conditioned hierarchical video representation.

The video is cut into L clips of T consecutive frames around evenly spaced
centers. Within each clip a question-conditioned softmax over time pools the
frame features; across clips, order-k relation modules aggregate every (or a
sampled set of) strictly increasing clip subsets. Summing the relation outputs
over orders 2..K yields the spatial knowledge grid the reasoner reads from.
Setting T=1 with one clip per sampled frame reduces the whole pipeline to a
frame-level temporal relation network.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import autodiff as T
from .autodiff import ContractError, Tensor
from .params import ParamStore


def clip_windows(n_frames: int, n_clips: int, clip_len: int) -> list[int]:
    """Start index of each clip: clip_len consecutive frames centered on
    evenly spaced points, clamped to the video."""
    if n_frames < clip_len:
        raise ContractError(f"{n_frames} frames cannot host a {clip_len}-frame clip")
    starts = []
    for l in range(n_clips):
        center = int(n_frames * (l + 0.5) / n_clips)
        starts.append(min(max(center - clip_len // 2, 0), n_frames - clip_len))
    return starts


def pad_frames(frames: Tensor, minimum: int) -> Tensor:
    """Edge-replicate the last frame until the video has `minimum` frames."""
    n = frames.shape[0]
    if n >= minimum:
        return frames
    idx = np.concatenate([np.arange(n), np.full(minimum - n, n - 1)])
    return frames[idx]


def sample_frame_indices(n_frames: int, n_samples: int) -> list[int]:
    """Middle frame of each of n_samples equal segments."""
    return clip_windows(max(n_frames, n_samples), n_samples, 1)


def enumerate_subsets(n_clips: int, k: int) -> list[tuple[int, ...]]:
    """All strictly increasing k-subsets of range(n_clips), lexicographic."""
    return list(combinations(range(n_clips), k))


@dataclass(frozen=True)
class SubsetPolicy:
    """Exhaustive subset enumeration up to `limit` subsets per order, seeded
    uniform sampling without replacement beyond that. Draws are re-keyed per
    epoch so sampled orders see fresh subsets each pass."""

    limit: int = 32
    seed: int = 0

    def subsets(self, n_clips: int, k: int, epoch: int = 0) -> list[tuple[int, ...]]:
        if not 2 <= k <= n_clips:
            raise ContractError(f"relation order k={k} outside 2..{n_clips}")
        everything = enumerate_subsets(n_clips, k)
        if len(everything) <= self.limit:
            return everything
        rng = np.random.default_rng([self.seed, epoch, n_clips, k])
        chosen = rng.choice(len(everything), size=self.limit, replace=False)
        return [everything[i] for i in sorted(chosen)]


def relation_sum(pooled: Tensor, subsets, g_fn) -> Tensor:
    """Sum g over the channel-concatenation of each clip subset's features."""
    if not subsets:
        raise ContractError("relation aggregation over an empty subset selection")
    total = None
    for subset in subsets:
        feats = T.concat([pooled[l] for l in subset], axis=-1)
        term = g_fn(feats)
        total = term if total is None else T.add(total, term)
    return total


class CrnVideo:
    """Clip segmentation, temporal attention pooling, and multi-order clip
    relations, ending in a [W, H, d] knowledge grid."""

    def __init__(self, store: ParamStore, *, feat_dim: int, d: int, n_clips: int,
                 clip_len: int, max_order: int | None = None,
                 policy: SubsetPolicy | None = None, prefix: str = "crn"):
        if max_order is None:
            max_order = max(n_clips - 1, 2)
        if max_order < 2:
            raise ContractError(f"max relation order must be >= 2, got {max_order}")
        if max_order > n_clips:
            raise ContractError(
                f"max relation order {max_order} exceeds clip count {n_clips}")
        self.d = d
        self.n_clips = n_clips
        self.clip_len = clip_len
        self.max_order = max_order
        self.policy = policy or SubsetPolicy()

        self.proj_w = store.weight(f"{prefix}.proj.w", d, feat_dim)
        self.proj_b = store.zeros(f"{prefix}.proj.b", d)
        self.att_wq = store.weight(f"{prefix}.att.wq", d, d)
        self.att_bq = store.zeros(f"{prefix}.att.bq", d)
        self.att_wv = store.weight(f"{prefix}.att.wv", d, d)
        self.att_bv = store.zeros(f"{prefix}.att.bv", d)
        self.att_w = store.weight(f"{prefix}.att.w", 1, d)
        # One g per order (input widths differ with k); h is shared.
        self.g_params = {}
        for k in range(2, max_order + 1):
            self.g_params[k] = (
                store.weight(f"{prefix}.g{k}.w1", d, k * d),
                store.zeros(f"{prefix}.g{k}.b1", d),
                store.weight(f"{prefix}.g{k}.w2", d, d),
                store.zeros(f"{prefix}.g{k}.b2", d),
            )
        self.h_w = store.weight(f"{prefix}.h.w", d, d)
        self.h_b = store.zeros(f"{prefix}.h.b", d)

    # -- stages ------------------------------------------------------------

    def segment(self, frames: Tensor) -> Tensor:
        """[N, W, H, D] frames -> projected clips [L, T, W, H, d]."""
        frames = pad_frames(frames, self.n_clips * self.clip_len)
        starts = clip_windows(frames.shape[0], self.n_clips, self.clip_len)
        windows = np.array([np.arange(s, s + self.clip_len) for s in starts])
        return T.linear(frames[windows], self.proj_w, self.proj_b)

    def attention_pool(self, clips: Tensor, q: Tensor) -> tuple[Tensor, Tensor]:
        """Pool each clip over time with question-conditioned softmax weights.

        Returns (pooled [L, W, H, d], weights [L, T]).
        """
        if q.shape != (self.d,):
            raise T.ShapeError(f"question vector shape {q.shape} does not match ({self.d},)")
        spatial_mean = T.tmean(clips, axes=(2, 3))                  # [L, T, d]
        gated = T.mul(T.linear(q, self.att_wq, self.att_bq),
                      T.linear(spatial_mean, self.att_wv, self.att_bv))
        scores = T.reshape(T.linear(gated, self.att_w), clips.shape[:2])
        weights = T.softmax(scores)                                 # [L, T]
        pooled = T.stack([T.weighted_sum(weights[l], clips[l])
                          for l in range(clips.shape[0])])
        return pooled, weights

    def _g(self, k: int):
        w1, b1, w2, b2 = self.g_params[k]
        return lambda feats: T.linear(T.elu(T.linear(feats, w1, b1)), w2, b2)

    def order_relation(self, pooled: Tensor, k: int, epoch: int = 0) -> Tensor:
        """Order-k relational feature over clip subsets: h(sum g(...)).

        All subsets evaluate as one batched pass: gather [n_sub, k, W, H, d],
        fold the k features onto the channel axis, run the relation MLP, and
        sum over subsets.
        """
        subsets = self.policy.subsets(self.n_clips, k, epoch)
        if not subsets:
            raise ContractError("relation aggregation over an empty subset selection")
        n_sub = len(subsets)
        _, w, h, d = pooled.shape
        gathered = pooled[np.asarray(subsets)]
        feats = T.reshape(T.transpose(gathered, (0, 2, 3, 1, 4)),
                          (n_sub, w, h, k * d))
        total = T.tsum(self._g(k)(feats), axes=(0,))
        return T.linear(total, self.h_w, self.h_b)

    def knowledge_base(self, frames: Tensor, q: Tensor,
                       epoch: int = 0) -> tuple[Tensor, Tensor]:
        """Full pipeline; returns (grid [W, H, d], attention weights [L, T])."""
        clips = self.segment(frames)
        pooled, weights = self.attention_pool(clips, q)
        grid = self.order_relation(pooled, 2, epoch)
        for k in range(3, self.max_order + 1):
            grid = T.add(grid, self.order_relation(pooled, k, epoch))
        return grid, weights


def expected_subset_count(n_clips: int, k: int, limit: int = 32) -> int:
    return min(comb(n_clips, k), limit)

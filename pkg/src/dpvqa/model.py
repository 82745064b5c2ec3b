"""Model assembly for every variant in the comparison lattice.

All variants share the question encoder and answer heads. They differ in how
(or whether) the video enters: nothing, one projected frame, an average over
sampled frames, frame-level relations, or the full clip-relation pipeline,
and in whether reasoning is multi-step attention, a feed-forward block, or
absent. Parameter names only depend on the component, so variants that share
a component share its seeded initialization.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as T
from .autodiff import Tensor
from .config import RunConfig
from .crn import CrnVideo, SubsetPolicy, sample_frame_indices
from .decoders import CountHead, OpenEndedHead, count_prediction
from .language import QuestionEncoder, Vocabulary
from .mac import MacReasoner, MacTrace
from .params import ParamStore
from .synth.corpus import QAItem

MAC_VARIANTS = ("sframe_mac", "avgpool_mac", "trn_mac", "crn_mac")
CRN_VARIANTS = ("trn_mac", "crn_mlp", "crn_mac")


class VideoQaModel:
    def __init__(self, cfg: RunConfig, vocab: Vocabulary, *, grid: int,
                 n_frames: int, feat_dim: int):
        cfg = cfg.validated()
        self.cfg = cfg
        self.vocab = vocab
        self.grid = grid
        self.n_frames = n_frames
        self.feat_dim = feat_dim
        self.store = ParamStore(cfg.seed, dtype=cfg.dtype)
        self.encoder = QuestionEncoder(self.store, vocab.size, cfg.d)

        self.crn: CrnVideo | None = None
        if cfg.variant in CRN_VARIANTS:
            policy = SubsetPolicy(limit=cfg.subset_limit, seed=cfg.seed)
            if cfg.variant == "trn_mac":
                n_clips, clip_len = cfg.trn_frames, 1
                max_order = min(cfg.K, cfg.trn_frames)
            else:
                n_clips, clip_len, max_order = cfg.L, cfg.T, cfg.K
            self.crn = CrnVideo(self.store, feat_dim=feat_dim, d=cfg.d,
                                n_clips=n_clips, clip_len=clip_len,
                                max_order=max_order, policy=policy)
        elif cfg.variant in ("ling_sframe", "sframe_mac", "avgpool_mac"):
            # Same projection component (and seeded values) the clip pipeline uses.
            self.proj_w = self.store.weight("crn.proj.w", cfg.d, feat_dim)
            self.proj_b = self.store.zeros("crn.proj.b", cfg.d)

        self.mac: MacReasoner | None = None
        if cfg.variant in MAC_VARIANTS:
            self.mac = MacReasoner(self.store, d=cfg.d, steps=cfg.P)
        elif cfg.variant == "crn_mlp":
            self.mlp_w1 = self.store.weight("mlp.w1", cfg.d, 2 * cfg.d)
            self.mlp_b1 = self.store.zeros("mlp.b1", cfg.d)
            self.mlp_w2 = self.store.weight("mlp.w2", cfg.d, cfg.d)
            self.mlp_b2 = self.store.zeros("mlp.b2", cfg.d)

        self.open_head = OpenEndedHead(self.store, cfg.d, vocab.n_answers)
        self.count_head = CountHead(self.store, cfg.d)
        self._dropout_rng = np.random.default_rng([cfg.seed, 7])

    # -- per-item plumbing ---------------------------------------------------

    def frame_choice(self, scene_id: int) -> int:
        """Deterministic per-scene frame pick for the single-frame variants."""
        return int(np.random.default_rng([self.cfg.seed, 5, scene_id])
                   .integers(self.n_frames))

    def _frames_tensor(self, frames: np.ndarray) -> Tensor:
        return Tensor(np.asarray(frames, dtype=self.cfg.dtype))

    def _project(self, frames: Tensor) -> Tensor:
        return T.linear(frames, self.proj_w, self.proj_b)

    def memory(self, encoded, frames: np.ndarray, scene_id: int,
               epoch: int = 0) -> tuple[Tensor, MacTrace | None]:
        """Variant-specific reasoning result fed to the answer heads."""
        cfg = self.cfg
        if cfg.variant == "linguistic_only":
            return Tensor(np.zeros(cfg.d, dtype=cfg.dtype)), None

        if cfg.variant == "ling_sframe":
            frame = self._frames_tensor(frames[self.frame_choice(scene_id)])
            return T.tmean(self._project(frame), axes=(0, 1)), None

        if cfg.variant == "sframe_mac":
            frame = self._frames_tensor(frames[self.frame_choice(scene_id)])
            grid = self._project(frame)
            return self.mac.run(encoded, grid)

        if cfg.variant == "avgpool_mac":
            picks = sample_frame_indices(frames.shape[0], cfg.trn_frames)
            sampled = self._frames_tensor(frames[picks])
            grid = T.tmean(self._project(sampled), axes=(0,))
            return self.mac.run(encoded, grid)

        grid, _ = self.crn.knowledge_base(self._frames_tensor(frames),
                                          encoded.vector, epoch=epoch)
        if cfg.variant == "crn_mlp":
            pooled = T.tmean(grid, axes=(0, 1))
            joint = T.concat([pooled, encoded.vector])
            hidden = T.elu(T.linear(joint, self.mlp_w1, self.mlp_b1))
            return T.elu(T.linear(hidden, self.mlp_w2, self.mlp_b2)), None
        return self.mac.run(encoded, grid)

    def _memory_for_item(self, item: QAItem, frames: np.ndarray, epoch: int):
        ids = self.vocab.encode(item.question_tokens)[:self.cfg.max_question_len]
        encoded = self.encoder.encode(ids)
        m, trace = self.memory(encoded, frames, item.scene_id, epoch)
        if self.cfg.dropout > 0.0:
            m = T.dropout(m, self.cfg.dropout, self._dropout_rng)
        return encoded, m, trace

    def item_loss(self, item: QAItem, frames: np.ndarray,
                  epoch: int = 0) -> tuple[Tensor, bool]:
        """Training loss plus greedy correctness for the same forward pass."""
        encoded, m, _ = self._memory_for_item(item, frames, epoch)
        if item.task == "repetition-count":
            score = self.count_head.score(m, encoded.vector)
            target = float(item.answer)
            diff = T.sub(score, target)
            return T.mul(diff, diff), count_prediction(float(score.data)) == item.answer
        logits = self.open_head.logits(m, encoded.vector)
        label = self.vocab.answer_index(item.answer)
        loss = T.cross_entropy_logits(logits, label)
        return loss, int(np.argmax(logits.data)) == label

    def predict(self, item: QAItem, frames: np.ndarray,
                epoch: int = 0) -> tuple[str | int, float | None, MacTrace | None]:
        """Greedy answer, plus the raw score for count-style items."""
        encoded, m, trace = self._memory_for_item(item, frames, epoch)
        if item.task == "repetition-count":
            score = float(self.count_head.score(m, encoded.vector).data)
            return count_prediction(score), score, trace
        probs = self.open_head.probabilities(m, encoded.vector)
        return self.vocab.answer_label(int(np.argmax(probs.data))), None, trace

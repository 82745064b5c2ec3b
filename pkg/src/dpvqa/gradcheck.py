"""Central-difference verification of the analytic gradients, per component.

Every component gets a toy-dimension forward pass in 64-bit mode; randomly
probed parameter entries are nudged by +/- eps and the finite-difference
slope is compared against what backward() produced.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import autodiff as T
from .autodiff import Tensor, backward
from .config import RunConfig
from .crn import CrnVideo
from .decoders import CountHead, MultiChoiceHead, OpenEndedHead, hinge_loss
from .language import EncodedQuestion, QuestionEncoder, Vocabulary
from .lstm import bilstm, lstm_params
from .mac import MacReasoner
from .model import VideoQaModel
from .params import ParamStore
from .synth.corpus import QAItem

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4
# Gradients below this scale are compared additively; finite differences on
# them are dominated by rounding noise.
REL_ERR_FLOOR = 1e-4
# For an exactly linear graph the central difference is exact at any step
# size, and a large step avoids float64 cancellation entirely.
SCOPE_EPS = {"linear-path": 0.1}


@dataclass
class ModuleReport:
    max_rel_err: float
    probes: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_err < tolerance


@dataclass
class GradCheckReport:
    modules: dict[str, ModuleReport]
    eps: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(m.passed(self.tolerance) for m in self.modules.values())

    def lines(self) -> list[str]:
        out = []
        for name in sorted(self.modules):
            report = self.modules[name]
            status = "ok" if report.passed(self.tolerance) else "FAIL"
            out.append(f"{name:18s} max rel err {report.max_rel_err:9.3e} "
                       f"({report.probes} probes) {status}")
        return out


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), REL_ERR_FLOOR)


def _const(rng, *shape) -> Tensor:
    return Tensor(rng.normal(size=shape))


def _scope_linear_path(seed: int):
    store = ParamStore(seed, dtype=np.float64)
    w = store.weight("w", 4, 3)
    b = store.zeros("b", 4)
    rng = np.random.default_rng([seed, 100])
    x = _const(rng, 3)
    c = _const(rng, 4)

    def loss():
        return T.tsum(T.mul(T.linear(x, w, b), c))

    return store, loss


def _scope_numeric_core(seed: int):
    store = ParamStore(seed, dtype=np.float64)
    w1 = store.weight("w1", 4, 3)
    b1 = store.zeros("b1", 4)
    w2 = store.weight("w2", 2, 4)
    b2 = store.zeros("b2", 2)
    cell = lstm_params(store, "lstm", 3, 2)
    rng = np.random.default_rng([seed, 101])
    x = _const(rng, 3)
    c = _const(rng, 2)
    seq = _const(rng, 3, 3)

    def loss():
        head = T.softmax(T.linear(T.elu(T.linear(x, w1, b1)), w2, b2))
        states, final_fwd, _ = bilstm(seq, cell, cell)
        return T.add(T.tsum(T.mul(head, c)),
                     T.add(T.tsum(T.mul(states, states)),
                           T.tsum(T.mul(final_fwd, final_fwd))))

    return store, loss


def _scope_language(seed: int):
    store = ParamStore(seed, dtype=np.float64)
    encoder = QuestionEncoder(store, vocab_size=7, d=4, embed_dim=3)
    rng = np.random.default_rng([seed, 102])
    ids = np.array([2, 5, 3])
    c = _const(rng, 4)

    def loss():
        enc = encoder.encode(ids)
        return T.add(T.tsum(T.mul(enc.words, enc.words)),
                     T.tsum(T.mul(enc.vector, c)))

    return store, loss


def _scope_crn(seed: int):
    store = ParamStore(seed, dtype=np.float64)
    crn = CrnVideo(store, feat_dim=3, d=4, n_clips=3, clip_len=2, max_order=3)
    rng = np.random.default_rng([seed, 103])
    frames = _const(rng, 6, 2, 2, 3)
    q = _const(rng, 4)

    def loss():
        grid, _ = crn.knowledge_base(frames, q)
        return T.tsum(T.mul(grid, grid))

    return store, loss


def _scope_mac(seed: int):
    store = ParamStore(seed, dtype=np.float64)
    mac = MacReasoner(store, d=4, steps=3)
    rng = np.random.default_rng([seed, 104])
    words = _const(rng, 3, 4)
    vector = _const(rng, 4)
    grid = _const(rng, 2, 2, 4)

    def loss():
        m, _ = mac.run(EncodedQuestion(words=words, vector=vector), grid)
        return T.tsum(T.mul(m, m))

    return store, loss


def _scope_decoders(seed: int):
    store = ParamStore(seed, dtype=np.float64)
    open_head = OpenEndedHead(store, d=4, n_labels=5)
    count_head = CountHead(store, d=4)
    mc_head = MultiChoiceHead(store, d=4)
    rng = np.random.default_rng([seed, 105])
    m = _const(rng, 4)
    q = _const(rng, 4)
    m_a = _const(rng, 4)
    a = _const(rng, 4)

    def loss():
        ce = open_head.loss(m, q, 2)
        mse = count_head.loss(m, q, 3.0)
        pos = mc_head.score(m, m, q, a)
        neg = mc_head.score(m, m_a, q, a)
        return T.add(T.add(ce, mse), hinge_loss(pos, [neg]))

    return store, loss


def _scope_full_model(seed: int):
    cfg = RunConfig(variant="crn_mac", L=3, T=2, K=2, d=8, P=2,
                    precision="float64", seed=seed)
    tokens = ["what", "color", "is", "the", "cube"]
    vocab = Vocabulary.build([tokens], ["red", "blue", "yes", "no"])
    model = VideoQaModel(cfg, vocab, grid=2, n_frames=6, feat_dim=4)
    rng = np.random.default_rng([seed, 106])
    frames = rng.normal(size=(6, 2, 2, 4))
    open_item = QAItem(scene_id=0, task="query",
                       question_tokens=tuple(tokens), answer="red")
    count_item = QAItem(scene_id=0, task="repetition-count",
                        question_tokens=tuple(tokens), answer=2)

    def loss():
        a, _ = model.item_loss(open_item, frames)
        b, _ = model.item_loss(count_item, frames)
        return T.add(a, b)

    return model.store, loss


SCOPES = {
    "linear-path": _scope_linear_path,
    "numeric-core": _scope_numeric_core,
    "language-encoder": _scope_language,
    "crn-video": _scope_crn,
    "mac-reasoner": _scope_mac,
    "decoders": _scope_decoders,
    "full-model": _scope_full_model,
}


def check_module(name: str, seed: int = 0, probes: int = 100,
                 eps: float | None = None) -> ModuleReport:
    if eps is None:
        eps = SCOPE_EPS.get(name, DEFAULT_EPS)
    store, loss_fn = SCOPES[name](seed)
    loss = loss_fn()
    backward(loss)
    analytic = {pname: (p.grad.copy() if p.grad is not None
                        else np.zeros_like(p.data))
                for pname, p in store.items()}

    names = store.names()
    sizes = np.array([store[n].size for n in names])
    offsets = np.cumsum(sizes)
    rng = np.random.default_rng([seed, hash(name) & 0x7FFFFFFF])
    picks = rng.integers(0, int(offsets[-1]), size=probes)

    worst = 0.0
    for flat in picks:
        pidx = int(np.searchsorted(offsets, flat, side="right"))
        inner = int(flat - (offsets[pidx - 1] if pidx else 0))
        param = store[names[pidx]]
        view = param.data.reshape(-1)
        orig = view[inner]
        view[inner] = orig + eps
        hi = float(loss_fn().data)
        view[inner] = orig - eps
        lo = float(loss_fn().data)
        view[inner] = orig
        fd = (hi - lo) / (2 * eps)
        an = float(analytic[names[pidx]].reshape(-1)[inner])
        worst = max(worst, _rel_err(an, fd))
    store.zero_grad()
    return ModuleReport(max_rel_err=worst, probes=probes)


def gradcheck(seed: int = 0, probes: int = 100, eps: float | None = None,
              tolerance: float = DEFAULT_TOLERANCE,
              modules: list[str] | None = None) -> GradCheckReport:
    chosen = modules or list(SCOPES)
    unknown = set(chosen) - set(SCOPES)
    if unknown:
        raise ValueError(f"unknown gradcheck modules: {sorted(unknown)}")
    reports = {name: check_module(name, seed=seed, probes=probes, eps=eps)
               for name in chosen}
    return GradCheckReport(modules=reports, eps=eps or DEFAULT_EPS,
                           tolerance=tolerance)

"""Training loop, evaluation metrics, and the variant ablation sweep."""

from __future__ import annotations

import dataclasses
import json
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as T
from .autodiff import Tensor, backward
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import RunConfig, config_hash, config_text
from .fvol import IngestionError
from .mac import write_trace
from .model import VideoQaModel
from .synth.corpus import Corpus
from .synth.questions import TEMPORAL_TASKS


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class MetricsRecord:
    epoch: int
    split: str
    accuracy: dict[str, float]
    count_mse: float | None
    loss: float | None
    wall_clock: float

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


class Adam:
    """Standard first/second-moment optimizer over a parameter list."""

    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in params]
        self._v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            self._m[i] = self.beta1 * self._m[i] + (1 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1 - self.beta2) * g * g
            m_hat = self._m[i] / (1 - self.beta1 ** self.t)
            v_hat = self._v[i] / (1 - self.beta2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def clip_gradients(params: list[Tensor], max_norm: float) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


def _prefetch(items, fetch, workers: int):
    """Yield (item, fetch(item)) in order, reading ahead on worker threads."""
    if workers <= 0:
        for item in items:
            yield item, fetch(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        window = workers * 2
        pending = {}
        items = list(items)
        for i, item in enumerate(items[:window]):
            pending[i] = pool.submit(fetch, item)
        for i, item in enumerate(items):
            result = pending.pop(i).result()
            nxt = i + window
            if nxt < len(items):
                pending[nxt] = pool.submit(fetch, items[nxt])
            yield item, result


# ---------------------------------------------------------------------------
# evaluation

def evaluate_predictor(predict, corpus: Corpus, split: str,
                       epoch: int = 0) -> MetricsRecord:
    """Score any callable (item, frames) -> answer on a split."""
    items = corpus.items_for(split)
    if not items:
        raise IngestionError(f"split {split!r} is empty")
    start = time.perf_counter()
    correct: Counter = Counter()
    totals: Counter = Counter()
    sq_err: list[float] = []
    for item in items:
        answer = predict(item, corpus.features(item.scene_id))
        if isinstance(answer, tuple):
            answer, raw_score = answer
        else:
            raw_score = None
        totals[item.task] += 1
        if answer == item.answer:
            correct[item.task] += 1
        if item.task == "repetition-count":
            score = float(raw_score) if raw_score is not None else float(answer)
            sq_err.append((score - float(item.answer)) ** 2)
    accuracy = {task: correct[task] / totals[task] for task in sorted(totals)}
    accuracy["overall"] = sum(correct.values()) / len(items)
    temporal = [t for t in totals if t in TEMPORAL_TASKS]
    if temporal:
        accuracy["temporal"] = (sum(correct[t] for t in temporal)
                                / sum(totals[t] for t in temporal))
    return MetricsRecord(
        epoch=epoch, split=split, accuracy=accuracy,
        count_mse=float(np.mean(sq_err)) if sq_err else None,
        loss=None, wall_clock=time.perf_counter() - start)


def evaluate_model(model: VideoQaModel, corpus: Corpus, split: str,
                   epoch: int = 0, trace_file=None) -> MetricsRecord:
    def predict(item, frames):
        answer, raw, trace = model.predict(item, frames)
        if trace_file is not None and trace is not None:
            write_trace(trace, trace_file)
        return (answer, raw) if item.task == "repetition-count" else answer

    return evaluate_predictor(predict, corpus, split, epoch=epoch)


def majority_predictor(corpus: Corpus, from_split: str = "train"):
    """Answers every question with its task's majority label in `from_split`."""
    by_task: dict[str, Counter] = {}
    for item in corpus.items_for(from_split):
        by_task.setdefault(item.task, Counter())[item.answer] += 1
    majority = {task: counts.most_common(1)[0][0]
                for task, counts in by_task.items()}

    def predict(item, frames):
        return majority.get(item.task)

    return predict


def evaluate_checkpoint(path, corpus: Corpus, split: str,
                        cfg: RunConfig) -> MetricsRecord:
    arrays, stored_hash = load_checkpoint(path)
    cfg = cfg.validated()
    if stored_hash != config_hash(cfg):
        raise CheckpointError(
            "checkpoint was written under a different configuration")
    model = build_model(cfg, corpus)
    model.store.load_arrays(arrays)
    return evaluate_model(model, corpus, split)


# ---------------------------------------------------------------------------
# training

def build_model(cfg: RunConfig, corpus: Corpus) -> VideoQaModel:
    return VideoQaModel(cfg, corpus.vocabulary(), grid=corpus.grid,
                        n_frames=corpus.n_frames, feat_dim=corpus.feature_dim)


@dataclass
class TrainResult:
    model: VideoQaModel
    metrics: list[MetricsRecord]
    best_epoch: int
    best_val_accuracy: float
    checkpoint_path: str | None = None
    best_state: dict = field(default_factory=dict, repr=False)


def train(cfg: RunConfig, corpus: Corpus | None = None,
          eval_test_each_epoch: bool = False) -> TrainResult:
    cfg = cfg.validated()
    if corpus is None:
        corpus = Corpus(cfg.corpus_dir)
    model = build_model(cfg, corpus)
    train_items = corpus.items_for("train")
    if not train_items:
        raise IngestionError("training split is empty")

    tasks_present = {it.task for it in train_items}
    count_only = tasks_present == {"repetition-count"}
    lr = cfg.count_learning_rate if count_only else cfg.learning_rate
    # In mixed-task training the lower count-task rate is honored by scaling
    # the squared-error losses by the rate ratio instead.
    count_weight = 1.0 if count_only else cfg.count_learning_rate / cfg.learning_rate

    optimizer = Adam(model.store.tensors(), lr=lr,
                     weight_decay=cfg.weight_decay)
    metrics: list[MetricsRecord] = []
    best_epoch = -1
    best_val = -1.0
    best_state: dict = {}

    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    metrics_fh = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.cfg").write_text(config_text(cfg), encoding="utf-8")
        metrics_fh = open(out_dir / "metrics.jsonl", "w", encoding="utf-8")

    def emit(record: MetricsRecord) -> None:
        metrics.append(record)
        if metrics_fh:
            metrics_fh.write(json.dumps(record.to_json()) + "\n")
            metrics_fh.flush()

    try:
        for epoch in range(cfg.epochs):
            start = time.perf_counter()
            order = np.random.default_rng([cfg.seed, 11, epoch]) \
                .permutation(len(train_items))
            losses: list[float] = []
            n_correct = 0
            batch: list[int] = []

            def flush_batch(batch_ids):
                nonlocal n_correct
                scale = 1.0 / len(batch_ids)
                fetch = (lambda idx: corpus.features(train_items[idx].scene_id))
                for idx, frames in _prefetch(batch_ids, fetch, cfg.workers):
                    item = train_items[idx]
                    loss, correct = model.item_loss(item, frames, epoch=epoch)
                    weight = count_weight if item.task == "repetition-count" else 1.0
                    value = float(loss.data)
                    if not np.isfinite(value):
                        raise TrainingDiverged(
                            f"non-finite loss at epoch {epoch} on item "
                            f"scene={item.scene_id} task={item.task}; last losses: "
                            f"{losses[-5:]}")
                    losses.append(value)
                    n_correct += bool(correct)
                    backward(T.scale(loss, scale * weight))
                if cfg.grad_clip > 0:
                    clip_gradients(model.store.tensors(), cfg.grad_clip)
                optimizer.step()
                optimizer.zero_grad()

            for idx in order:
                batch.append(int(idx))
                if len(batch) == cfg.batch_size:
                    flush_batch(batch)
                    batch = []
            if batch:
                flush_batch(batch)

            train_acc = n_correct / len(train_items)
            emit(MetricsRecord(
                epoch=epoch, split="train",
                accuracy={"overall": train_acc},
                count_mse=None, loss=float(np.mean(losses)),
                wall_clock=time.perf_counter() - start))

            val = evaluate_model(model, corpus, "val", epoch=epoch)
            emit(val)
            if eval_test_each_epoch:
                emit(evaluate_model(model, corpus, "test", epoch=epoch))

            if val.accuracy["overall"] > best_val:
                best_val = val.accuracy["overall"]
                best_epoch = epoch
                best_state = model.store.state_arrays()
    finally:
        if metrics_fh:
            metrics_fh.close()

    if best_state:
        model.store.load_arrays(best_state)
    result = TrainResult(model=model, metrics=metrics, best_epoch=best_epoch,
                         best_val_accuracy=best_val, best_state=best_state)
    if out_dir:
        path = out_dir / "model.dpvq"
        save_checkpoint(path, best_state or model.store.state_arrays(),
                        config_hash(cfg))
        result.checkpoint_path = str(path)
    return result


# ---------------------------------------------------------------------------
# ablation sweep

ABLATION_VARIANTS = ("linguistic_only", "ling_sframe", "sframe_mac",
                     "avgpool_mac", "trn_mac", "crn_mlp", "crn_mac")


def ablate(base_cfg: RunConfig, corpus: Corpus | None = None,
           out_path=None) -> list[dict]:
    """Train every variant with the shared seed and corpus; report test
    accuracy overall and on the temporal subset."""
    if corpus is None:
        corpus = Corpus(base_cfg.corpus_dir)
    rows = []
    for variant in ABLATION_VARIANTS:
        cfg = dataclasses.replace(base_cfg, variant=variant, out_dir="")
        start = time.perf_counter()
        result = train(cfg, corpus)
        test = evaluate_model(result.model, corpus, "test")
        rows.append({
            "variant": variant,
            "test_overall": test.accuracy["overall"],
            "test_temporal": test.accuracy.get("temporal"),
            "count_mse": test.count_mse,
            "best_epoch": result.best_epoch,
            "val_overall": result.best_val_accuracy,
            "wall_clock": time.perf_counter() - start,
        })
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    return rows


def ablation_table(rows: list[dict]) -> str:
    header = f"{'variant':16s} {'test':>7s} {'temporal':>9s} {'count mse':>10s}"
    lines = [header, "-" * len(header)]
    for row in rows:
        mse = f"{row['count_mse']:.3f}" if row["count_mse"] is not None else "-"
        tmp = f"{row['test_temporal']:.3f}" if row["test_temporal"] is not None else "-"
        lines.append(f"{row['variant']:16s} {row['test_overall']:7.3f} "
                     f"{tmp:>9s} {mse:>10s}")
    return "\n".join(lines)

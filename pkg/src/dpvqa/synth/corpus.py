"""Corpus assembly: rendered scenes, balanced QA items, splits, manifest.

On-disk layout:
  manifest.json     split assignments, generator version, geometry, seed
  questions.jsonl   one {scene_id, task, question_tokens, answer} per line
  programs.jsonl    one {scene_id, program} per line (for re-verification)
  scenes/*.fvol     binary feature volumes, one per scene
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..fvol import IngestionError, read_fvol, write_fvol
from ..language import Vocabulary
from .questions import (TEMPLATES_BY_TASK, TEMPORAL_TASKS, generate_question,
                        parse_question)
from .render import FEATURE_DIM, render_features
from .scenes import SceneProgram, generate_scene

GENERATOR_VERSION = 1

TASK_WEIGHTS = {
    "exist": 0.12,
    "count": 0.12,
    "attribute-compare": 0.12,
    "query": 0.18,
    "action-order": 0.30,
    "repetition-count": 0.16,
}

MAJORITY_GATE = 0.60
# Below this many items a template's majority rate is sampling noise, not
# bias; every template clears it by two orders of magnitude at full scale.
GATE_MIN_SUPPORT = 25


class CorpusGateError(ValueError):
    """The generated corpus failed an anti-bias gate."""


@dataclass(frozen=True)
class QAItem:
    scene_id: int
    task: str
    question_tokens: tuple[str, ...]
    answer: str | int

    def to_json(self) -> dict:
        return {"scene_id": self.scene_id, "task": self.task,
                "question_tokens": list(self.question_tokens),
                "answer": self.answer}

    @classmethod
    def from_json(cls, data: dict) -> "QAItem":
        return cls(scene_id=data["scene_id"], task=data["task"],
                   question_tokens=tuple(data["question_tokens"]),
                   answer=data["answer"])


def temporal_majority_rates(items, min_support: int | None = None) -> dict[str, float]:
    """Majority-answer frequency per template over the temporal tasks.

    Templates are recovered by parsing the stored tokens, so this can audit
    a corpus independently of how it was generated. Templates with fewer
    than `min_support` items are skipped.
    """
    if min_support is None:
        min_support = GATE_MIN_SUPPORT
    counts: dict[str, dict[str, int]] = {}
    for item in items:
        if item.task not in TEMPORAL_TASKS:
            continue
        template = parse_question(list(item.question_tokens)).template
        counts.setdefault(template, {})
        key = str(item.answer)
        counts[template][key] = counts[template].get(key, 0) + 1
    return {t: max(c.values()) / sum(c.values()) for t, c in counts.items()
            if sum(c.values()) >= min_support}


def build_corpus(out_dir, seed: int = 0, n_items: int = 8000,
                 n_scenes: int = 1000, n_frames: int = 40, grid: int = 4) -> dict:
    """Generate, balance, gate, and write a corpus; returns the manifest."""
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)

    scenes = [generate_scene([seed, 1, i], n_frames=n_frames, grid=grid)
              for i in range(n_scenes)]

    tasks = sorted(TASK_WEIGHTS)
    weights = np.array([TASK_WEIGHTS[t] for t in tasks])
    weights = weights / weights.sum()
    per_scene = n_items // n_scenes
    extra = n_items - per_scene * n_scenes

    label_costs: dict[tuple[str, object], int] = {}
    items: list[QAItem] = []
    for i, scene in enumerate(scenes):
        rng = np.random.default_rng([seed, 2, i])
        quota = per_scene + (1 if i < extra else 0)
        for _ in range(quota):
            drawn = None
            order = list(rng.choice(tasks, size=8, p=weights)) + ["count", "exist"]
            for task in order:
                drawn = generate_question(scene, str(task), rng, label_costs)
                if drawn is not None:
                    break
            question, tokens, answer = drawn
            label_costs[(question.template, answer)] = (
                label_costs.get((question.template, answer), 0) + 1)
            items.append(QAItem(scene_id=i, task=question.task,
                                question_tokens=tuple(tokens), answer=answer))

    rates = temporal_majority_rates(items)
    offending = {t: r for t, r in rates.items() if r >= MAJORITY_GATE}
    if offending:
        raise CorpusGateError(
            f"temporal templates exceed the {MAJORITY_GATE:.0%} majority gate: "
            f"{offending}")

    split_rng = np.random.default_rng([seed, 3])
    order = split_rng.permutation(n_scenes)
    n_train = int(round(n_scenes * 0.7))
    n_val = int(round(n_scenes * 0.1))
    splits = {
        "train": sorted(int(s) for s in order[:n_train]),
        "val": sorted(int(s) for s in order[n_train:n_train + n_val]),
        "test": sorted(int(s) for s in order[n_train + n_val:]),
    }

    for i, scene in enumerate(scenes):
        write_fvol(out / "scenes" / f"scene_{i:06d}.fvol", render_features(scene))
    with open(out / "questions.jsonl", "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_json()) + "\n")
    with open(out / "programs.jsonl", "w", encoding="utf-8") as fh:
        for i, scene in enumerate(scenes):
            fh.write(json.dumps({"scene_id": i, "program": scene.to_json()}) + "\n")

    manifest = {
        "generator_version": GENERATOR_VERSION,
        "seed": seed,
        "n_items": len(items),
        "n_scenes": n_scenes,
        "n_frames": n_frames,
        "grid": grid,
        "feature_dim": FEATURE_DIM,
        "splits": splits,
        "temporal_majority_rates": rates,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


class Corpus:
    """Loaded corpus with lazily cached feature volumes."""

    def __init__(self, root):
        self.root = Path(root)
        try:
            with open(self.root / "manifest.json", encoding="utf-8") as fh:
                self.manifest = json.load(fh)
        except FileNotFoundError as exc:
            raise IngestionError(f"no corpus manifest under {self.root}") from exc
        if self.manifest.get("generator_version") != GENERATOR_VERSION:
            raise IngestionError(
                f"corpus generator version {self.manifest.get('generator_version')} "
                f"!= supported {GENERATOR_VERSION}")
        self.items: list[QAItem] = []
        with open(self.root / "questions.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self.items.append(QAItem.from_json(json.loads(line)))
        self._split_of: dict[int, str] = {}
        for split, ids in self.manifest["splits"].items():
            for sid in ids:
                self._split_of[sid] = split
        self._features: dict[int, np.ndarray] = {}

    @property
    def grid(self) -> int:
        return self.manifest["grid"]

    @property
    def n_frames(self) -> int:
        return self.manifest["n_frames"]

    @property
    def feature_dim(self) -> int:
        return self.manifest["feature_dim"]

    def split_of(self, scene_id: int) -> str:
        return self._split_of[scene_id]

    def items_for(self, split: str) -> list[QAItem]:
        if split not in ("train", "val", "test"):
            raise IngestionError(f"unknown split {split!r}")
        return [it for it in self.items if self._split_of[it.scene_id] == split]

    def features(self, scene_id: int) -> np.ndarray:
        if scene_id not in self._features:
            path = self.root / "scenes" / f"scene_{scene_id:06d}.fvol"
            self._features[scene_id] = read_fvol(path)
        return self._features[scene_id]

    def programs(self) -> dict[int, SceneProgram]:
        out = {}
        with open(self.root / "programs.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = json.loads(line)
                    out[record["scene_id"]] = SceneProgram.from_json(record["program"])
        return out

    def vocabulary(self) -> Vocabulary:
        """Question tokens from the training split; answer labels corpus-wide
        (integer answers train the regression head, not the classifier)."""
        train_tokens = [list(it.question_tokens) for it in self.items_for("train")]
        labels = sorted({it.answer for it in self.items if isinstance(it.answer, str)})
        return Vocabulary.build(train_tokens, labels)

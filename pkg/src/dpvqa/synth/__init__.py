"""Synthetic grid-world benchmark: scenes, rendering, questions, corpora."""

from .corpus import (Corpus, CorpusGateError, QAItem, build_corpus,
                     temporal_majority_rates)
from .questions import (TEMPLATES_BY_TASK, TEMPORAL_TASKS, Question, Ref,
                        generate_question, instances, oracle_answer,
                        parse_question, question_tokens)
from .render import FEATURE_DIM, render_features
from .scenes import (ACTIONS, COLORS, MOVE_ACTIONS, SHAPES, SIZES, Event,
                     SceneObject, SceneProgram, generate_scene, motion_flags,
                     object_positions)

__all__ = [
    "ACTIONS", "COLORS", "Corpus", "CorpusGateError", "Event", "FEATURE_DIM",
    "MOVE_ACTIONS", "QAItem", "Question", "Ref", "SHAPES", "SIZES",
    "SceneObject", "SceneProgram", "TEMPLATES_BY_TASK", "TEMPORAL_TASKS",
    "build_corpus", "generate_question", "generate_scene", "instances",
    "motion_flags", "object_positions", "oracle_answer", "parse_question",
    "question_tokens", "render_features", "temporal_majority_rates",
]

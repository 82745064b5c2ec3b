"""Compositional question templates over scene programs.

Every question renders to plain tokens and parses back into the same
structured form, so stored corpora can be re-verified against the oracle.
Instance enumeration lists every (question, answer) a scene supports for a
template; sampling then balances over the feasible answer labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenes import (ACTIONS, COLORS, MOVE_ACTIONS, SHAPES, SIZES, Event,
                     SceneObject, SceneProgram)

TEMPORAL_TASKS = ("action-order", "repetition-count")

TEMPLATES_BY_TASK = {
    "exist": ("exist",),
    "count": ("count",),
    "attribute-compare": ("compare_color", "compare_shape", "compare_size"),
    "query": ("query_color", "query_shape", "query_size"),
    "action-order": ("action_after", "action_before",
                     "actor_color_after", "actor_color_before",
                     "actor_shape_after", "actor_shape_before"),
    "repetition-count": ("rep_count",),
}

TASK_BY_TEMPLATE = {t: task for task, ts in TEMPLATES_BY_TASK.items() for t in ts}

PLURAL_SHAPES = {"cube": "cubes", "sphere": "spheres", "cylinder": "cylinders"}
SINGULAR_SHAPES = {v: k for k, v in PLURAL_SHAPES.items()}

_VERB_3SG = {"move-left": ["moves", "left"], "move-right": ["moves", "right"],
             "move-up": ["moves", "up"], "move-down": ["moves", "down"],
             "rotate": ["rotates"], "stop": ["stops"]}
_VERB_GERUND = {"move-left": ["moving", "left"], "move-right": ["moving", "right"],
                "move-up": ["moving", "up"], "move-down": ["moving", "down"],
                "rotate": ["rotating"], "stop": ["stopping"]}
_VERB_BASE = {"move-left": ["move", "left"], "move-right": ["move", "right"],
              "move-up": ["move", "up"], "move-down": ["move", "down"],
              "rotate": ["rotate"]}


@dataclass(frozen=True)
class Ref:
    """Attribute-based referring expression; None fields are wildcards."""

    shape: str | None = None
    color: str | None = None
    size: str | None = None

    def matches(self, obj: SceneObject) -> bool:
        return ((self.shape is None or obj.shape == self.shape)
                and (self.color is None or obj.color == self.color)
                and (self.size is None or obj.size == self.size))

    def words(self) -> list[str]:
        out = []
        if self.size:
            out.append(self.size)
        if self.color:
            out.append(self.color)
        out.append(self.shape if self.shape else "object")
        return out


@dataclass(frozen=True)
class Question:
    template: str
    ref: Ref | None = None
    ref2: Ref | None = None
    kind: str | None = None
    action: str | None = None
    anchor_action: str | None = None
    order: str | None = None

    @property
    def task(self) -> str:
        return TASK_BY_TEMPLATE[self.template]


def resolve(scene: SceneProgram, ref: Ref) -> list[SceneObject]:
    return [o for o in scene.objects if ref.matches(o)]


def unique_refs(scene: SceneProgram, obj: SceneObject,
                exclude_kind: str | None = None) -> list[Ref]:
    """Referring expressions that pick out exactly this object and do not
    mention the excluded attribute kind."""
    shapes = (None, obj.shape) if exclude_kind != "shape" else (None,)
    colors = (None, obj.color) if exclude_kind != "color" else (None,)
    sizes = (None, obj.size) if exclude_kind != "size" else (None,)
    out = []
    for s in shapes:
        for c in colors:
            for z in sizes:
                ref = Ref(shape=s, color=c, size=z)
                matched = resolve(scene, ref)
                if len(matched) == 1 and matched[0].uid == obj.uid:
                    out.append(ref)
    return out


# ---------------------------------------------------------------------------
# event helpers shared by enumeration and the oracle

def _unique_anchor(scene: SceneProgram, uid: int, action: str) -> Event | None:
    events = [e for e in scene.events_of(uid) if e.action == action]
    return events[0] if len(events) == 1 else None


def _next_event(scene: SceneProgram, uid: int, t: int) -> Event | None:
    later = [e for e in scene.events_of(uid) if e.start >= t]
    return min(later, key=lambda e: e.start) if later else None


def _prev_event(scene: SceneProgram, uid: int, t: int) -> Event | None:
    earlier = [e for e in scene.events_of(uid) if e.end <= t]
    return max(earlier, key=lambda e: e.end) if earlier else None


def _actor_event(scene: SceneProgram, action: str, order: str,
                 anchor: Event) -> Event | None:
    """Earliest event with `action` after the anchor (or latest before);
    None when no candidate or when the extremum is tied across objects."""
    if order == "after":
        pool = [e for e in scene.events if e.action == action and e.start >= anchor.end]
        if not pool:
            return None
        best = min(pool, key=lambda e: (e.start, e.obj))
        if sum(1 for e in pool if e.start == best.start) > 1:
            return None
        return best
    pool = [e for e in scene.events if e.action == action and e.end <= anchor.start]
    if not pool:
        return None
    best = max(pool, key=lambda e: (e.end, -e.obj))
    if sum(1 for e in pool if e.end == best.end) > 1:
        return None
    return best


def _attr(obj: SceneObject, kind: str) -> str:
    return {"shape": obj.shape, "color": obj.color, "size": obj.size}[kind]


# ---------------------------------------------------------------------------
# oracle

def oracle_answer(scene: SceneProgram, q: Question) -> str | int:
    """Symbolic evaluation of a parsed question against the scene program."""
    if q.template == "exist":
        return "yes" if resolve(scene, q.ref) else "no"

    if q.template == "count":
        return str(len(resolve(scene, q.ref)))

    if q.template.startswith("compare_"):
        a = resolve(scene, q.ref)
        b = resolve(scene, q.ref2)
        if len(a) != 1 or len(b) != 1:
            raise ValueError(f"comparison references are not unique: {q}")
        return "yes" if _attr(a[0], q.kind) == _attr(b[0], q.kind) else "no"

    if q.template.startswith("query_"):
        matched = resolve(scene, q.ref)
        if len(matched) != 1:
            raise ValueError(f"query reference is not unique: {q}")
        return _attr(matched[0], q.kind)

    if q.template.startswith("action_"):
        anchor_obj = resolve(scene, q.ref2 if q.ref2 else q.ref)
        subject = resolve(scene, q.ref)
        if len(anchor_obj) != 1 or len(subject) != 1:
            raise ValueError(f"sequencing references are not unique: {q}")
        anchor = _unique_anchor(scene, anchor_obj[0].uid, q.anchor_action)
        if anchor is None:
            raise ValueError(f"anchor event is not unique: {q}")
        if q.order == "after":
            event = _next_event(scene, subject[0].uid, anchor.end)
        else:
            event = _prev_event(scene, subject[0].uid, anchor.start)
        if event is None:
            raise ValueError(f"no event answers: {q}")
        return event.action

    if q.template.startswith("actor_"):
        anchor_obj = resolve(scene, q.ref2)
        if len(anchor_obj) != 1:
            raise ValueError(f"anchor reference is not unique: {q}")
        anchor = _unique_anchor(scene, anchor_obj[0].uid, q.anchor_action)
        if anchor is None:
            raise ValueError(f"anchor event is not unique: {q}")
        event = _actor_event(scene, q.action, q.order, anchor)
        if event is None:
            raise ValueError(f"no unambiguous actor: {q}")
        actor = next(o for o in scene.objects if o.uid == event.obj)
        return _attr(actor, q.kind)

    if q.template == "rep_count":
        subject = resolve(scene, q.ref)
        if len(subject) != 1:
            raise ValueError(f"repetition reference is not unique: {q}")
        event = _unique_anchor(scene, subject[0].uid, q.action)
        if event is None:
            raise ValueError(f"repeated event is not unique: {q}")
        return int(event.repeat)

    raise ValueError(f"unknown template {q.template!r}")


# ---------------------------------------------------------------------------
# instance enumeration

def instances(scene: SceneProgram, template: str) -> list[tuple[Question, str | int]]:
    """Every valid (question, answer) pair this scene supports."""
    out: list[tuple[Question, str | int]] = []

    if template == "exist":
        for s in (None,) + SHAPES:
            for c in (None,) + COLORS:
                for z in (None,) + SIZES:
                    if s is None and c is None and z is None:
                        continue
                    q = Question(template="exist", ref=Ref(shape=s, color=c, size=z))
                    out.append((q, oracle_answer(scene, q)))
        return out

    if template == "count":
        for kind, values in (("shape", SHAPES), ("color", COLORS), ("size", SIZES)):
            for v in values:
                ref = Ref(**{kind: v})
                q = Question(template="count", ref=ref)
                out.append((q, oracle_answer(scene, q)))
        return out

    if template.startswith("compare_"):
        kind = template.split("_")[1]
        for a in scene.objects:
            for b in scene.objects:
                if a.uid == b.uid:
                    continue
                for ra in unique_refs(scene, a, exclude_kind=kind):
                    for rb in unique_refs(scene, b, exclude_kind=kind):
                        q = Question(template=template, ref=ra, ref2=rb, kind=kind)
                        out.append((q, oracle_answer(scene, q)))
        return out

    if template.startswith("query_"):
        kind = template.split("_")[1]
        for obj in scene.objects:
            for ref in unique_refs(scene, obj, exclude_kind=kind):
                q = Question(template=template, ref=ref, kind=kind)
                out.append((q, oracle_answer(scene, q)))
        return out

    if template.startswith("action_"):
        order = template.split("_")[1]
        for anchor_obj in scene.objects:
            for anchor_action in ACTIONS:
                anchor = _unique_anchor(scene, anchor_obj.uid, anchor_action)
                if anchor is None:
                    continue
                for subject in scene.objects:
                    if order == "after":
                        event = _next_event(scene, subject.uid, anchor.end)
                    else:
                        event = _prev_event(scene, subject.uid, anchor.start)
                    if event is None:
                        continue
                    anchor_refs = unique_refs(scene, anchor_obj)
                    subject_refs = unique_refs(scene, subject)
                    if not anchor_refs or not subject_refs:
                        continue
                    if subject.uid == anchor_obj.uid:
                        for ref in anchor_refs:
                            q = Question(template=template, ref=ref, ref2=None,
                                         anchor_action=anchor_action, order=order)
                            out.append((q, event.action))
                    else:
                        for ref in subject_refs:
                            for ref2 in anchor_refs:
                                q = Question(template=template, ref=ref, ref2=ref2,
                                             anchor_action=anchor_action, order=order)
                                out.append((q, event.action))
        return out

    if template.startswith("actor_"):
        _, kind, order = template.split("_")
        for anchor_obj in scene.objects:
            for anchor_action in ACTIONS:
                anchor = _unique_anchor(scene, anchor_obj.uid, anchor_action)
                if anchor is None:
                    continue
                for action in ACTIONS:
                    event = _actor_event(scene, action, order, anchor)
                    if event is None:
                        continue
                    actor = next(o for o in scene.objects if o.uid == event.obj)
                    for ref2 in unique_refs(scene, anchor_obj):
                        q = Question(template=template, ref2=ref2, kind=kind,
                                     action=action, anchor_action=anchor_action,
                                     order=order)
                        out.append((q, _attr(actor, kind)))
        return out

    if template == "rep_count":
        for obj in scene.objects:
            for action in MOVE_ACTIONS + ("rotate",):
                event = _unique_anchor(scene, obj.uid, action)
                if event is None or event.repeat < 2:
                    continue
                for ref in unique_refs(scene, obj):
                    q = Question(template="rep_count", ref=ref, action=action)
                    out.append((q, int(event.repeat)))
        return out

    raise ValueError(f"unknown template {template!r}")


def generate_question(scene: SceneProgram, task: str, rng: np.random.Generator,
                      label_costs: dict | None = None):
    """Sample one (question, tokens, answer) for the task, or None when the
    scene does not support it. Feasible answer labels are weighted toward the
    cheapest entries of `label_costs` so corpus-level balance can steer."""
    templates = TEMPLATES_BY_TASK[task]
    template = str(rng.choice(templates))
    pool = instances(scene, template)
    if not pool:
        return None
    by_answer: dict[str | int, list[Question]] = {}
    for q, answer in pool:
        by_answer.setdefault(answer, []).append(q)
    labels = sorted(by_answer, key=str)
    if label_costs is not None:
        cost = min(label_costs.get((template, a), 0) for a in labels)
        labels = [a for a in labels if label_costs.get((template, a), 0) == cost]
    answer = labels[int(rng.integers(len(labels)))]
    candidates = by_answer[answer]
    question = candidates[int(rng.integers(len(candidates)))]
    return question, question_tokens(question), answer


# ---------------------------------------------------------------------------
# rendering and parsing

def question_tokens(q: Question) -> list[str]:
    if q.template == "exist":
        return ["is", "there", "a"] + q.ref.words()
    if q.template == "count":
        if q.ref.shape:
            return ["how", "many", PLURAL_SHAPES[q.ref.shape], "are", "there"]
        value = q.ref.color or q.ref.size
        return ["how", "many", value, "objects", "are", "there"]
    if q.template.startswith("compare_"):
        return (["is", "the"] + q.ref.words() + ["the", "same", q.kind, "as", "the"]
                + q.ref2.words())
    if q.template.startswith("query_"):
        return ["what", q.kind, "is", "the"] + q.ref.words()
    if q.template.startswith("action_"):
        head = ["what", "does", "the"] + q.ref.words() + ["do", q.order]
        if q.ref2 is None:
            return head + _VERB_GERUND[q.anchor_action]
        return head + ["the"] + q.ref2.words() + _VERB_3SG[q.anchor_action]
    if q.template.startswith("actor_"):
        return (["what", q.kind, "is", "the", "object", "that"]
                + _VERB_3SG[q.action] + [q.order, "the"] + q.ref2.words()
                + _VERB_3SG[q.anchor_action])
    if q.template == "rep_count":
        return (["how", "many", "times", "does", "the"] + q.ref.words()
                + _VERB_BASE[q.action])
    raise ValueError(f"unknown template {q.template!r}")


def _parse_ref(words: list[str]) -> Ref:
    size = color = shape = None
    for w in words:
        if w in SIZES:
            size = w
        elif w in COLORS:
            color = w
        elif w in SHAPES:
            shape = w
        elif w != "object":
            raise ValueError(f"unexpected reference word {w!r}")
    return Ref(shape=shape, color=color, size=size)


def _parse_verb(words: list[str], forms: dict[str, list[str]]) -> tuple[str, int]:
    for action, verb in forms.items():
        if words[:len(verb)] == verb:
            return action, len(verb)
    raise ValueError(f"no verb at {words!r}")


def parse_question(tokens: list[str]) -> Question:
    """Recover the structured question from its token rendering."""
    t = list(tokens)

    if t[:3] == ["is", "there", "a"]:
        return Question(template="exist", ref=_parse_ref(t[3:]))

    if t[:3] == ["how", "many", "times"]:
        assert t[3:5] == ["does", "the"]
        body = t[5:]
        for cut in range(1, len(body)):
            try:
                action, used = _parse_verb(body[cut:], _VERB_BASE)
            except ValueError:
                continue
            if cut + used == len(body):
                return Question(template="rep_count", ref=_parse_ref(body[:cut]),
                                action=action)
        raise ValueError(f"cannot parse repetition question: {tokens}")

    if t[:2] == ["how", "many"]:
        word = t[2]
        if word in SINGULAR_SHAPES:
            return Question(template="count", ref=Ref(shape=SINGULAR_SHAPES[word]))
        if word in COLORS:
            return Question(template="count", ref=Ref(color=word))
        if word in SIZES:
            return Question(template="count", ref=Ref(size=word))
        raise ValueError(f"cannot parse count question: {tokens}")

    if t[:2] == ["is", "the"]:
        body = t[2:]
        pivot = next(i for i in range(len(body) - 1)
                     if body[i] == "the" and body[i + 1] == "same")
        kind = body[pivot + 2]
        assert body[pivot + 3:pivot + 5] == ["as", "the"]
        return Question(template=f"compare_{kind}", kind=kind,
                        ref=_parse_ref(body[:pivot]),
                        ref2=_parse_ref(body[pivot + 5:]))

    if t[:3] == ["what", "does", "the"]:
        body = t[3:]
        do_at = body.index("do")
        ref = _parse_ref(body[:do_at])
        order = body[do_at + 1]
        rest = body[do_at + 2:]
        if rest[0] == "the":
            for cut in range(1, len(rest)):
                try:
                    anchor, used = _parse_verb(rest[cut:], _VERB_3SG)
                except ValueError:
                    continue
                if cut + used == len(rest):
                    return Question(template=f"action_{order}", ref=ref,
                                    ref2=_parse_ref(rest[1:cut]),
                                    anchor_action=anchor, order=order)
            raise ValueError(f"cannot parse sequencing question: {tokens}")
        anchor, used = _parse_verb(rest, _VERB_GERUND)
        if used != len(rest):
            raise ValueError(f"cannot parse sequencing question: {tokens}")
        return Question(template=f"action_{order}", ref=ref, ref2=None,
                        anchor_action=anchor, order=order)

    if t[0] == "what" and t[2:6] == ["is", "the", "object", "that"]:
        kind = t[1]
        body = t[6:]
        action, used = _parse_verb(body, _VERB_3SG)
        order = body[used]
        assert body[used + 1] == "the"
        rest = body[used + 2:]
        for cut in range(1, len(rest)):
            try:
                anchor, n = _parse_verb(rest[cut:], _VERB_3SG)
            except ValueError:
                continue
            if cut + n == len(rest):
                return Question(template=f"actor_{kind}_{order}", kind=kind,
                                action=action, order=order,
                                ref2=_parse_ref(rest[:cut]), anchor_action=anchor)
        raise ValueError(f"cannot parse actor question: {tokens}")

    if t[0] == "what" and t[2:4] == ["is", "the"]:
        kind = t[1]
        return Question(template=f"query_{kind}", kind=kind, ref=_parse_ref(t[4:]))

    raise ValueError(f"cannot parse question: {tokens}")

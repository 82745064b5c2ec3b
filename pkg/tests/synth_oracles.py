"""Independent second implementations for the synthetic task:

- an inverse renderer that reconstructs a scene program from the feature
  volume alone, and
- a brute-force question answerer that scans a per-frame timeline it builds
  itself from the event list.

Both are deliberately separate from the library's code paths.
"""

from __future__ import annotations

import numpy as np

from dpvqa.synth import Event, SceneObject, SceneProgram
from dpvqa.synth.questions import Question

SHAPES = ("cube", "sphere", "cylinder")
COLORS = ("gray", "red", "blue", "green", "brown", "yellow")
MOVES = {"move-left": (-1, 0), "move-right": (1, 0),
         "move-up": (0, -1), "move-down": (0, 1)}


# ---------------------------------------------------------------------------
# inverse renderer

def _signature(cell: np.ndarray) -> tuple[str, str, str]:
    shape = SHAPES[int(np.argmax(cell[0:3]))]
    color = COLORS[int(np.argmax(cell[3:9]))]
    size = "big" if cell[9] > 0.5 else "small"
    return shape, color, size


def decode_volume(volume: np.ndarray) -> SceneProgram:
    """Reconstruct objects, trajectories, and events from rendered features."""
    n_frames, grid, _, _ = volume.shape

    tracks: dict[tuple[str, str, str], dict] = {}
    for t in range(n_frames):
        for x in range(grid):
            for y in range(grid):
                cell = volume[t, x, y]
                if cell[14] < 0.5:
                    continue
                sig = _signature(cell)
                track = tracks.setdefault(sig, {"pos": {}, "flags": {}})
                track["pos"][t] = (x, y)
                track["flags"][t] = tuple(int(round(f)) for f in cell[10:14])

    objects = []
    events = []
    for uid, sig in enumerate(sorted(tracks)):
        track = tracks[sig]
        positions = [track["pos"][t] for t in range(n_frames)]
        flags = [track["flags"][t] for t in range(n_frames)]
        objects.append(SceneObject(uid=uid, shape=sig[0], color=sig[1],
                                   size=sig[2], start=positions[0]))
        events.extend(_decode_events(uid, positions, flags, n_frames))

    events.sort(key=lambda e: (e.start, e.obj))
    return SceneProgram(objects=objects, events=events,
                        n_frames=n_frames, grid=grid)


def _decode_events(uid: int, positions, flags, n_frames: int) -> list[Event]:
    directions = list(MOVES)
    events: list[Event] = []
    t = 0
    while t < n_frames:
        active = sum(flags[t])
        if active == 0:
            t += 1
            continue
        if active == 1:
            direction = directions[flags[t].index(1)]
            start = t
            while t < n_frames and flags[t] == flags[start]:
                t += 1
            end = t  # landing frame: the position changes here, flag already off
            changes = [x for x in range(start + 1, min(end + 1, n_frames))
                       if positions[x] != positions[x - 1]]
            events.append(Event(obj=uid, action=direction, start=start,
                                end=end, repeat=len(changes)))
        else:
            # All-four flags: rotation pulses separated by single off frames.
            start = t
            runs = []
            while t < n_frames and flags[t] == (1, 1, 1, 1):
                a = t
                while t < n_frames and flags[t] == (1, 1, 1, 1):
                    t += 1
                runs.append((a, t - 1))
                if t < n_frames and t + 1 < n_frames and flags[t + 1] == (1, 1, 1, 1) \
                        and flags[t] == (0, 0, 0, 0):
                    t += 1  # single-frame pulse gap stays inside the event
                else:
                    break
            end = runs[-1][1] + 2
            events.append(Event(obj=uid, action="rotate", start=start,
                                end=end, repeat=len(runs)))
            t = end
    # Post-motion halts are explicit stop events spanning the full idle gap.
    halted = []
    for event in sorted(events, key=lambda e: e.start):
        nxt = min((e.start for e in events if e.start >= event.end),
                  default=n_frames)
        if event.end < nxt:
            halted.append(Event(obj=uid, action="stop", start=event.end,
                                end=nxt, repeat=1))
    return events + halted


# ---------------------------------------------------------------------------
# brute-force timeline answerer

def _positions_by_scan(scene: SceneProgram) -> dict[int, list[tuple[int, int]]]:
    out = {}
    for obj in scene.objects:
        pos = []
        x, y = obj.start
        for t in range(scene.n_frames):
            for e in scene.events:
                if e.obj != obj.uid or e.action not in MOVES:
                    continue
                if e.start <= t < e.end:
                    period = (e.end - e.start) // e.repeat
                    dx, dy = MOVES[e.action]
                    steps = (t - e.start) // period
                    base = _pos_before(scene, obj, e)
                    x, y = base[0] + dx * steps, base[1] + dy * steps
                elif t == e.end:
                    dx, dy = MOVES[e.action]
                    base = _pos_before(scene, obj, e)
                    x, y = base[0] + dx * e.repeat, base[1] + dy * e.repeat
            pos.append((x, y))
        out[obj.uid] = pos
    return out


def _pos_before(scene: SceneProgram, obj: SceneObject, event: Event):
    x, y = obj.start
    for e in sorted(scene.events, key=lambda e: e.start):
        if e.obj == obj.uid and e.action in MOVES and e.end <= event.start:
            dx, dy = MOVES[e.action]
            x, y = x + dx * e.repeat, y + dy * e.repeat
    return x, y


def _match(scene: SceneProgram, ref) -> list[SceneObject]:
    out = []
    for o in scene.objects:
        if ref.shape is not None and o.shape != ref.shape:
            continue
        if ref.color is not None and o.color != ref.color:
            continue
        if ref.size is not None and o.size != ref.size:
            continue
        out.append(o)
    return out


def _value(obj: SceneObject, kind: str) -> str:
    return {"color": obj.color, "shape": obj.shape, "size": obj.size}[kind]


def timeline_answer(scene: SceneProgram, q: Question) -> str | int:
    """Answer by scanning start/end markers on a frame timeline."""
    starts: dict[int, list[tuple[int, str, Event]]] = {}
    ends: dict[int, list[tuple[int, str, Event]]] = {}
    for e in scene.events:
        starts.setdefault(e.start, []).append((e.obj, e.action, e))
        ends.setdefault(e.end, []).append((e.obj, e.action, e))

    if q.template == "exist":
        return "yes" if _match(scene, q.ref) else "no"
    if q.template == "count":
        return str(len(_match(scene, q.ref)))
    if q.template.startswith("compare_"):
        a = _match(scene, q.ref)[0]
        b = _match(scene, q.ref2)[0]
        return "yes" if _value(a, q.kind) == _value(b, q.kind) else "no"
    if q.template.startswith("query_"):
        return _value(_match(scene, q.ref)[0], q.kind)

    if q.template.startswith("action_"):
        anchor_obj = _match(scene, q.ref2 if q.ref2 else q.ref)[0]
        subject = _match(scene, q.ref)[0]
        anchor = [e for e in scene.events
                  if e.obj == anchor_obj.uid and e.action == q.anchor_action][0]
        if q.order == "after":
            for t in range(anchor.end, scene.n_frames + 1):
                for obj, action, _ in starts.get(t, []):
                    if obj == subject.uid:
                        return action
        else:
            for t in range(anchor.start, -1, -1):
                for obj, action, _ in ends.get(t, []):
                    if obj == subject.uid:
                        return action
        raise ValueError("timeline scan found no answer")

    if q.template.startswith("actor_"):
        anchor_obj = _match(scene, q.ref2)[0]
        anchor = [e for e in scene.events
                  if e.obj == anchor_obj.uid and e.action == q.anchor_action][0]
        if q.order == "after":
            for t in range(anchor.end, scene.n_frames + 1):
                hits = sorted(o for o, action, _ in starts.get(t, [])
                              if action == q.action)
                if hits:
                    actor = next(o for o in scene.objects if o.uid == hits[0])
                    return _value(actor, q.kind)
        else:
            for t in range(anchor.start, -1, -1):
                hits = sorted((o for o, action, _ in ends.get(t, [])
                               if action == q.action), reverse=True)
                if hits:
                    actor = next(o for o in scene.objects if o.uid == hits[0])
                    return _value(actor, q.kind)
        raise ValueError("timeline scan found no actor")

    if q.template == "rep_count":
        subject = _match(scene, q.ref)[0]
        event = [e for e in scene.events
                 if e.obj == subject.uid and e.action == q.action][0]
        if q.action == "rotate":
            return int(event.repeat)
        # Moves: count the cell transitions along the replayed trajectory.
        positions = _positions_by_scan(scene)[subject.uid]
        return sum(1 for t in range(event.start + 1, event.end + 1)
                   if positions[t] != positions[t - 1])

    raise ValueError(f"unknown template {q.template!r}")

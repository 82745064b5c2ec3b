"""Grid-world scene programs: objects with attributes and timed events.

A scene is 2-4 objects on a small grid, each with a unique
(shape, color, size) signature, plus a time-ordered event list. Movement
events shift the object one cell every p frames for `repeat` steps; rotation
events pulse in `repeat` visible bursts; every halt after motion is recorded
as an explicit stop event spanning the full idle gap, so the rendered volume
and the program describe exactly the same history.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SHAPES = ("cube", "sphere", "cylinder")
COLORS = ("gray", "red", "blue", "green", "brown", "yellow")
SIZES = ("small", "big")

MOVE_DELTAS = {
    "move-left": (-1, 0),
    "move-right": (1, 0),
    "move-up": (0, -1),
    "move-down": (0, 1),
}
MOVE_ACTIONS = tuple(MOVE_DELTAS)
ACTIONS = MOVE_ACTIONS + ("rotate", "stop")

MAX_MOVE_REPEAT = 3
MAX_ROTATE_REPEAT = 5


@dataclass(frozen=True)
class SceneObject:
    uid: int
    shape: str
    color: str
    size: str
    start: tuple[int, int]


@dataclass(frozen=True)
class Event:
    obj: int
    action: str
    start: int
    end: int
    repeat: int


@dataclass
class SceneProgram:
    objects: list[SceneObject]
    events: list[Event]
    n_frames: int
    grid: int

    def events_of(self, uid: int) -> list[Event]:
        return [e for e in self.events if e.obj == uid]

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "n_frames": self.n_frames,
            "objects": [
                {"uid": o.uid, "shape": o.shape, "color": o.color,
                 "size": o.size, "start": list(o.start)}
                for o in self.objects
            ],
            "events": [
                {"obj": e.obj, "action": e.action, "start": e.start,
                 "end": e.end, "repeat": e.repeat}
                for e in self.events
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SceneProgram":
        return cls(
            objects=[SceneObject(uid=o["uid"], shape=o["shape"], color=o["color"],
                                 size=o["size"], start=tuple(o["start"]))
                     for o in data["objects"]],
            events=[Event(obj=e["obj"], action=e["action"], start=e["start"],
                          end=e["end"], repeat=e["repeat"])
                    for e in data["events"]],
            n_frames=data["n_frames"],
            grid=data["grid"],
        )


def object_positions(scene: SceneProgram) -> np.ndarray:
    """Cell of every object at every frame, [n_frames, n_objects, 2].

    During a move event the object advances one cell each `p = (end-start) /
    repeat` frames, landing on its final cell at the event's end frame.
    """
    pos = np.zeros((scene.n_frames, len(scene.objects), 2), dtype=np.int64)
    for idx, obj in enumerate(scene.objects):
        x, y = obj.start
        moves = sorted((e for e in scene.events_of(obj.uid)
                        if e.action in MOVE_DELTAS), key=lambda e: e.start)
        cursor = 0
        for event in moves:
            dx, dy = MOVE_DELTAS[event.action]
            period = (event.end - event.start) // event.repeat
            pos[cursor:event.start, idx] = (x, y)
            for t in range(event.start, min(event.end, scene.n_frames)):
                steps = (t - event.start) // period
                pos[t, idx] = (x + dx * steps, y + dy * steps)
            x += dx * event.repeat
            y += dy * event.repeat
            cursor = event.end
        pos[cursor:, idx] = (x, y)
    return pos


def motion_flags(scene: SceneProgram) -> np.ndarray:
    """Per-frame motion channels, [n_frames, n_objects, 4] (left/right/up/down).

    Move events raise their direction flag for the whole event. Rotation
    raises all four flags in `repeat` pulses: within each p-frame sub-period
    the flags are up except on its final frame, which separates the pulses.
    """
    flags = np.zeros((scene.n_frames, len(scene.objects), 4), dtype=np.float32)
    index = {obj.uid: i for i, obj in enumerate(scene.objects)}
    direction = {a: i for i, a in enumerate(MOVE_ACTIONS)}
    for event in scene.events:
        idx = index[event.obj]
        if event.action in direction:
            flags[event.start:event.end, idx, direction[event.action]] = 1.0
        elif event.action == "rotate":
            period = (event.end - event.start) // event.repeat
            for j in range(event.repeat):
                lo = event.start + j * period
                flags[lo:lo + period - 1, idx, :] = 1.0
    return flags


def _valid_layout(scene: SceneProgram) -> bool:
    pos = object_positions(scene)
    if pos.min() < 0 or pos.max() >= scene.grid:
        return False
    for t in range(scene.n_frames):
        cells = {tuple(c) for c in pos[t]}
        if len(cells) != len(scene.objects):
            return False
    return True


def _sample_objects(rng: np.random.Generator, grid: int) -> list[SceneObject]:
    n = int(rng.choice([2, 3, 3, 4, 4]))
    # Themed scenes share one attribute value across all objects so that
    # high match counts and positive comparisons actually occur.
    theme = rng.choice(["none", "color", "color", "shape", "size"])
    fixed: dict[str, str] = {}
    if theme == "color":
        fixed["color"] = str(rng.choice(COLORS))
    elif theme == "shape":
        fixed["shape"] = str(rng.choice(SHAPES))
    elif theme == "size":
        fixed["size"] = str(rng.choice(SIZES))

    signatures: set[tuple[str, str, str]] = set()
    cells: set[tuple[int, int]] = set()
    objects = []
    for uid in range(n):
        for _ in range(64):
            shape = fixed.get("shape", str(rng.choice(SHAPES)))
            color = fixed.get("color", str(rng.choice(COLORS)))
            size = fixed.get("size", str(rng.choice(SIZES)))
            if (shape, color, size) not in signatures:
                break
        else:
            continue
        signatures.add((shape, color, size))
        while True:
            cell = (int(rng.integers(0, grid)), int(rng.integers(0, grid)))
            if cell not in cells:
                break
        cells.add(cell)
        objects.append(SceneObject(uid=uid, shape=shape, color=color,
                                   size=size, start=cell))
    return objects


@dataclass
class _Track:
    uid: int
    pos: tuple[int, int]
    events: list[Event] = field(default_factory=list)


def _feasible_moves(pos: tuple[int, int], grid: int) -> list[str]:
    x, y = pos
    room = {"move-left": x, "move-right": grid - 1 - x,
            "move-up": y, "move-down": grid - 1 - y}
    return [a for a, r in room.items() if r >= 1]


def _move_room(pos: tuple[int, int], action: str, grid: int) -> int:
    x, y = pos
    return {"move-left": x, "move-right": grid - 1 - x,
            "move-up": y, "move-down": grid - 1 - y}[action]


def _schedule_chain(rng: np.random.Generator, track: _Track, length: int,
                    allow_gap: bool, n_frames: int, grid: int) -> None:
    t = int(rng.integers(0, max(1, n_frames // 5)))
    gap_used = False
    prev_action = None
    for _ in range(length):
        # Repeating the previous action back-to-back would blur the event
        # boundary in the rendered volume, so it needs a stop in between.
        options = [a for a in _feasible_moves(track.pos, grid) if a != prev_action]
        if prev_action != "rotate":
            options = options + ["rotate", "rotate"]
        if not options:
            break
        # Short periods keep many events briefer than the sparse-sampling
        # stride, so full-coverage clip models see things frame samplers miss.
        action = str(rng.choice(options))
        if action == "rotate":
            repeat = int(rng.integers(2, MAX_ROTATE_REPEAT + 1))
            period = 2
        else:
            room = _move_room(track.pos, action, grid)
            repeat = int(rng.integers(1, min(MAX_MOVE_REPEAT, room) + 1))
            period = int(rng.integers(2, 4))
        duration = repeat * period
        if t + duration > n_frames - 1:
            break
        track.events.append(Event(obj=track.uid, action=action,
                                  start=t, end=t + duration, repeat=repeat))
        if action != "rotate":
            dx, dy = MOVE_DELTAS[action]
            track.pos = (track.pos[0] + dx * repeat, track.pos[1] + dy * repeat)
        t += duration
        prev_action = action
        if allow_gap and not gap_used and rng.random() < 0.5:
            gap = int(rng.integers(2, 6))
            if t + gap <= n_frames - 4:
                track.events.append(Event(obj=track.uid, action="stop",
                                          start=t, end=t + gap, repeat=1))
                t += gap
                gap_used = True
                prev_action = "stop"
    # The halt after the final motion is part of the recorded history: a
    # trailing stop always extends to the end of the scene.
    if track.events and t < n_frames:
        last = track.events[-1]
        if last.action == "stop":
            track.events[-1] = Event(obj=track.uid, action="stop",
                                     start=last.start, end=n_frames, repeat=1)
        else:
            track.events.append(Event(obj=track.uid, action="stop",
                                      start=t, end=n_frames, repeat=1))


def generate_scene(seed: int, n_frames: int = 40, grid: int = 4) -> SceneProgram:
    """Deterministic scene synthesis; the same seed always yields the same
    program. Collisions or empty schedules trigger an internal re-draw."""
    rng = np.random.default_rng(seed)
    for _ in range(200):
        objects = _sample_objects(rng, grid)
        if len(objects) < 2:
            continue
        n_active = int(rng.integers(1, min(3, len(objects)) + 1))
        active = list(rng.choice(len(objects), size=n_active, replace=False))
        tracks = [_Track(uid=objects[i].uid, pos=objects[i].start) for i in active]
        for track in tracks:
            length = int(rng.integers(1, 4))
            _schedule_chain(rng, track, length, allow_gap=rng.random() < 0.35,
                            n_frames=n_frames, grid=grid)
        events = sorted((e for tr in tracks for e in tr.events),
                        key=lambda e: (e.start, e.obj))
        if not 3 <= len(events) <= 8:
            continue
        scene = SceneProgram(objects=objects, events=events,
                             n_frames=n_frames, grid=grid)
        if _valid_layout(scene):
            return scene
    raise RuntimeError(f"could not draw a valid scene for seed {seed}")

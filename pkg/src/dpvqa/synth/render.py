"""Render scene programs to frame-feature volumes.

Channel layout per grid cell (D = 16):
  0..2   shape one-hot        (cube, sphere, cylinder)
  3..8   color one-hot        (gray, red, blue, green, brown, yellow)
  9      size flag            (big = 1, small = 0)
  10..13 motion flags         (left, right, up, down; rotation raises all 4)
  14     occupancy
  15     padding (always 0)
"""

from __future__ import annotations

import numpy as np

from .scenes import COLORS, SHAPES, SceneProgram, motion_flags, object_positions

FEATURE_DIM = 16

_SHAPE_AT = {s: i for i, s in enumerate(SHAPES)}
_COLOR_AT = {c: 3 + i for i, c in enumerate(COLORS)}
SIZE_CHANNEL = 9
MOTION_CHANNELS = slice(10, 14)
OCCUPANCY_CHANNEL = 14


def render_features(scene: SceneProgram) -> np.ndarray:
    """[N, W, H, 16] float32 volume; empty cells stay zero."""
    volume = np.zeros((scene.n_frames, scene.grid, scene.grid, FEATURE_DIM),
                      dtype=np.float32)
    pos = object_positions(scene)
    flags = motion_flags(scene)
    for idx, obj in enumerate(scene.objects):
        static = np.zeros(FEATURE_DIM, dtype=np.float32)
        static[_SHAPE_AT[obj.shape]] = 1.0
        static[_COLOR_AT[obj.color]] = 1.0
        static[SIZE_CHANNEL] = 1.0 if obj.size == "big" else 0.0
        static[OCCUPANCY_CHANNEL] = 1.0
        for t in range(scene.n_frames):
            x, y = pos[t, idx]
            volume[t, x, y] = static
            volume[t, x, y, MOTION_CHANNELS] = flags[t, idx]
    return volume

"""Synthetic surveillance-like sequences for demos and tests.

Each frame is rank-equalized so its gray-level histogram is exactly flat
(entropy 8 bits when the pixel count is a multiple of 256). The moving object
is a checkerboard that takes the darkest and brightest gray levels, while the
background is a smooth pattern in the mid range.
"""

from __future__ import annotations

import numpy as np

from .frames import Frame, FrameSequence


def _equalize(base: np.ndarray) -> np.ndarray:
    n = base.size
    order = np.argsort(base.ravel(), kind="stable")
    out = np.empty(n, dtype=np.uint8)
    out[order] = (np.arange(n) * 256 // n).astype(np.uint8)
    return out.reshape(base.shape)


def _background(h: int, w: int, pan: float) -> np.ndarray:
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    x = x + pan
    return np.sin(x / 9.0) + 0.8 * np.cos(y / 7.0) + 0.3 * np.sin((x + y) / 5.0)


def _scene(h, w, obj_x, obj_y, obj_size, pan, tint) -> Frame:
    base = _background(h, w, pan)
    y, x = np.mgrid[0:obj_size, 0:obj_size]
    checker = ((x // 4 + y // 4) % 2).astype(np.float64)
    # far outside the background's [-2.1, 2.1] range: object owns the extreme ranks
    obj = np.where(checker == 0, -10.0 - 0.001 * (x + y), 10.0 + 0.001 * (x + y))
    base[obj_y:obj_y + obj_size, obj_x:obj_x + obj_size] = obj
    g = _equalize(base).astype(np.int16)
    # small per-channel tint keeps colour while the luma stays close to g
    rgb = np.stack([g + tint[0], g + tint[1], g + tint[2]], axis=-1)
    return Frame(np.clip(rgb, 0, 255).astype(np.uint8))


def synthetic_sequence(kind: str = "static", n_frames: int = 10, size: int = 64,
                       obj_size: int = 32, step: int = 2, name: str | None = None,
                       fps: int = 25) -> FrameSequence:
    """A square scene with an object sliding left to right.

    ``kind='dynamic'`` also pans the background one pixel per frame, as a
    moving camera would.
    """
    if kind not in ("static", "dynamic"):
        raise ValueError(f"unknown background kind {kind!r}")
    frames = []
    span = size - obj_size
    tint = (0, 0, 0)
    for t in range(n_frames):
        pos = (t * step) % (2 * span) if span else 0
        obj_x = pos if pos <= span else 2 * span - pos
        obj_y = (size - obj_size) // 2
        pan = float(t) if kind == "dynamic" else 0.0
        frames.append(_scene(size, size, obj_x, obj_y, obj_size, pan, tint))
    return FrameSequence(frames, fps=fps, name=name or f"synthetic_{kind}",
                         background_kind=kind)


def block_scene(width: int, height: int, n_frames: int, value: int = 60,
                block=(4, 4, 4, 4), block_frame: int | None = None, delta: int = 100) -> FrameSequence:
    """Constant gray scene; optionally a block (x, y, w, h) offset by ``delta`` in one frame."""
    frames = []
    for t in range(n_frames):
        px = np.full((height, width, 3), value, dtype=np.uint8)
        if block_frame is not None and t == block_frame:
            bx, by, bw, bh = block
            px[by:by + bh, bx:bx + bw] = value + delta
        frames.append(Frame(px))
    return FrameSequence(frames, fps=25, name="block_scene")

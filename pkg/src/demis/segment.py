"""Foreground/background segmentation and FG payload split/merge.

Two segmenters are provided:

* :func:`gmm_step` - per-pixel mixture-of-Gaussians background model for
  static cameras.
* :func:`motion_diff_step` - frame differencing followed by a morphological
  closing.  This is a stand-in for the AFOM motion segmenter used for moving
  cameras; AFOM itself is not implemented here.

Masks are stored with a small run-length format shared with the encrypted
containers (see :func:`encode_mask_rle`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .frames import Frame
from .metrics import gray_array


class SegmentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RoiMask:
    """Boolean foreground mask, shape (height, width); True marks foreground."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise SegmentError(f"mask must be a non-empty 2-D grid, got shape {b.shape}")
        b = np.ascontiguousarray(b.astype(bool))
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def empty(cls, width: int, height: int) -> "RoiMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "RoiMask":
        return cls(np.ones((height, width), dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, RoiMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __repr__(self):
        return f"RoiMask({self.width}x{self.height}, fg={self.popcount})"


def _check_dims(what: str, a, b) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise SegmentError(
            f"{what}: dimension mismatch {a.width}x{a.height} vs {b.width}x{b.height}"
        )


# -- mask run-length encoding --------------------------------------------------

def encode_mask_rle(mask: RoiMask) -> bytes:
    """u32 width, u32 height, then u32 run lengths alternating 0-runs and 1-runs.

    The first run counts zeros and may be 0. All integers little-endian.
    """
    flat = mask.bits.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        runs.insert(0, 0)
    return struct.pack(f"<II{len(runs)}I", mask.width, mask.height, *runs)


def decode_mask_rle(data: bytes) -> RoiMask:
    if len(data) < 8 or (len(data) - 8) % 4:
        raise SegmentError(f"corrupt mask RLE: {len(data)} bytes is not header + u32 runs")
    width, height = struct.unpack_from("<II", data)
    if width < 1 or height < 1:
        raise SegmentError(f"corrupt mask RLE: dimensions {width}x{height}")
    runs = np.frombuffer(data, dtype="<u4", offset=8).astype(np.int64)
    if runs.sum() != width * height:
        raise SegmentError(
            f"corrupt mask RLE: runs cover {int(runs.sum())} pixels, expected {width * height}"
        )
    values = np.arange(runs.size) % 2 == 1
    return RoiMask(np.repeat(values, runs).reshape(height, width))


# -- GMM background model ----------------------------------------------------

@dataclass
class GmmParams:
    components: int = 3
    learning_rate: float = 0.02
    background_threshold: float = 0.8
    match_sigma: float = 2.5
    variance_floor: float = 4.0
    initial_variance: float = 225.0
    initial_weight: float = 0.05

    def __post_init__(self):
        if self.components < 1:
            raise SegmentError("GMM needs at least one component")
        if not 0 < self.learning_rate < 1:
            raise SegmentError("learning_rate must lie in (0, 1)")
        if not 0 < self.background_threshold < 1:
            raise SegmentError("background_threshold must lie in (0, 1)")
        if self.match_sigma <= 0 or self.variance_floor <= 0:
            raise SegmentError("match_sigma and variance_floor must be positive")
        if self.initial_variance < self.variance_floor:
            raise SegmentError("initial_variance below variance_floor")


@dataclass
class GmmPixelModel:
    """Per-pixel mixture state; arrays are shaped (components, height, width)."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    params: GmmParams

    @property
    def width(self) -> int:
        return self.means.shape[2]

    @property
    def height(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_frame(cls, frame: Frame, params: GmmParams | None = None) -> "GmmPixelModel":
        """Seed the model with one component centred on ``frame``'s gray levels."""
        params = params or GmmParams()
        k = params.components
        g = gray_array(frame).astype(np.float64)
        means = np.zeros((k,) + g.shape)
        means[0] = g
        variances = np.full((k,) + g.shape, params.initial_variance)
        weights = np.zeros((k,) + g.shape)
        weights[0] = 1.0
        return cls(means, variances, weights, params)

    def copy(self) -> "GmmPixelModel":
        return GmmPixelModel(self.means.copy(), self.variances.copy(), self.weights.copy(),
                             self.params)


def _background_components(model: GmmPixelModel) -> tuple[np.ndarray, np.ndarray]:
    """Rank components by weight/sigma and flag those covering the background threshold."""
    score = model.weights / np.sqrt(model.variances)
    order = np.argsort(-score, axis=0, kind="stable")
    w_sorted = np.take_along_axis(model.weights, order, axis=0)
    cum_before = np.cumsum(w_sorted, axis=0) - w_sorted
    bg_sorted = (cum_before < model.params.background_threshold) & (w_sorted > 0)
    is_bg = np.zeros_like(bg_sorted)
    np.put_along_axis(is_bg, order, bg_sorted, axis=0)
    return order, is_bg


def gmm_step(model: GmmPixelModel, frame: Frame) -> tuple[GmmPixelModel, RoiMask]:
    """Classify ``frame`` against ``model`` then fold it into a new model.

    A pixel is foreground when its gray level matches none of the background
    components, i.e. the highest-ranked components (by weight/sigma) whose
    cumulative weight first reaches the background threshold. A match means
    ``|g - mean| <= match_sigma * sigma``; the best-ranked matching component
    is updated, and when nothing matches the lowest-weight component is
    replaced by a fresh one centred on ``g``.
    """
    if (frame.width, frame.height) != (model.width, model.height):
        raise SegmentError(
            f"gmm_step: dimension mismatch frame {frame.width}x{frame.height} "
            f"vs model {model.width}x{model.height}"
        )
    p = model.params
    g = gray_array(frame).astype(np.float64)
    order, is_bg = _background_components(model)

    within = np.abs(g[None] - model.means) <= p.match_sigma * np.sqrt(model.variances)
    within &= model.weights > 0
    # best-ranked match per pixel
    within_sorted = np.take_along_axis(within, order, axis=0)
    any_match = within_sorted.any(axis=0)
    first_rank = np.argmax(within_sorted, axis=0)
    matched_k = np.take_along_axis(order, first_rank[None], axis=0)[0]
    matched_bg = np.take_along_axis(is_bg, matched_k[None], axis=0)[0]
    fg = ~(any_match & matched_bg)

    means = model.means.copy()
    variances = model.variances.copy()
    weights = model.weights.copy()
    a = p.learning_rate
    k_idx = np.arange(p.components)[:, None, None]
    hit = (k_idx == matched_k[None]) & any_match[None]

    weights = (1 - a) * weights + a * hit
    new_means = (1 - a) * means + a * g[None]
    new_vars = (1 - a) * variances + a * (g[None] - new_means) ** 2
    means = np.where(hit, new_means, means)
    variances = np.where(hit, new_vars, variances)

    miss = ~any_match
    if miss.any():
        weakest = np.argmin(weights, axis=0)
        replace = (k_idx == weakest[None]) & miss[None]
        means = np.where(replace, g[None], means)
        variances = np.where(replace, p.initial_variance, variances)
        weights = np.where(replace, p.initial_weight, weights)

    weights = weights / weights.sum(axis=0, keepdims=True)
    variances = np.maximum(variances, p.variance_floor)
    return GmmPixelModel(means, variances, weights, p), RoiMask(fg)


def gmm_segment(frames, params: GmmParams | None = None) -> list[RoiMask]:
    """Run the GMM over a frame list, seeding the model from frame 0."""
    frames = list(frames)
    if not frames:
        return []
    model = GmmPixelModel.from_frame(frames[0], params)
    masks = []
    for f in frames:
        model, m = gmm_step(model, f)
        masks.append(m)
    return masks


# -- motion differencing (AFOM stand-in) -------------------------------------

def _morph(bits: np.ndarray, radius: int, op) -> np.ndarray:
    """Square-window max/min filter with edge replication."""
    if radius == 0:
        return bits
    h, w = bits.shape
    padded = np.pad(bits, radius, mode="edge")
    out = padded[radius:radius + h, radius:radius + w].copy()
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            out = op(out, padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w])
    return out


def motion_diff_step(prev: Frame, curr: Frame, threshold: float = 25.0,
                     morph_radius: int = 1) -> RoiMask:
    """Mask of pixels whose gray level moved by more than ``threshold``.

    The raw difference mask is closed (dilate then erode) with a square
    window of side ``2 * morph_radius + 1``.
    """
    _check_dims("motion_diff_step", prev, curr)
    if morph_radius < 0:
        raise SegmentError("morph_radius must be >= 0")
    diff = np.abs(gray_array(curr).astype(np.int16) - gray_array(prev).astype(np.int16))
    bits = diff > threshold
    bits = _morph(bits, morph_radius, np.logical_or)
    bits = _morph(bits, morph_radius, np.logical_and)
    return RoiMask(bits)


def motion_diff_segment(frames, threshold: float = 25.0, morph_radius: int = 1) -> list[RoiMask]:
    """Frame 0 gets an empty mask; frame i is differenced against frame i-1."""
    frames = list(frames)
    if not frames:
        return []
    masks = [RoiMask.empty(frames[0].width, frames[0].height)]
    for prev, curr in zip(frames, frames[1:]):
        masks.append(motion_diff_step(prev, curr, threshold, morph_radius))
    return masks


# -- split / merge -----------------------------------------------------------

BG_FILL = 0


@dataclass(frozen=True)
class MergeFlags:
    deficit: bool = False
    surplus: bool = False

    @property
    def clean(self) -> bool:
        return not (self.deficit or self.surplus)


def split_frame(frame: Frame, mask: RoiMask) -> tuple[bytes, Frame]:
    """Pull masked pixels out as an RGB byte payload (row-major) and blank them in the BG."""
    _check_dims("split_frame", frame, mask)
    payload = frame.pixels[mask.bits].tobytes()
    bg = frame.pixels.copy()
    bg[mask.bits] = BG_FILL
    return payload, Frame(bg)


def merge_frame(payload: bytes, mask: RoiMask, bg: Frame) -> tuple[Frame, MergeFlags]:
    """Inverse of :func:`split_frame`, tolerant of wrong payload lengths.

    A short payload leaves the trailing masked pixels at 0 (deficit); extra
    bytes are ignored (surplus). Neither is an error.
    """
    _check_dims("merge_frame", bg, mask)
    expected = 3 * mask.popcount
    data = np.frombuffer(bytes(payload), dtype=np.uint8)
    flags = MergeFlags(deficit=data.size < expected, surplus=data.size > expected)
    fg = np.zeros(expected, dtype=np.uint8)
    n = min(expected, data.size)
    fg[:n] = data[:n]
    out = bg.pixels.copy()
    out[mask.bits] = fg.reshape(-1, 3)
    return Frame(out), flags

"""Image damage metrics: Shannon entropy, RGB histograms, MSE and global SSIM.

All scalar metrics work on 8-bit grayscale (BT.601 luma, rounded).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

LUMA = np.array([0.299, 0.587, 0.114])
CHANNELS = ("r", "g", "b", "gray")


class MetricError(ValueError):
    pass


def gray_array(frame) -> np.ndarray:
    """uint8 (H, W) luma of a Frame or an (H, W, 3) array."""
    px = frame.pixels if hasattr(frame, "pixels") else np.asarray(frame)
    g = np.rint(px.astype(np.float64) @ LUMA)
    return np.clip(g, 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class GrayFrame:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise MetricError(f"gray frame must be 2-D, got shape {v.shape}")
        if v.size and (v.min() < 0 or v.max() > 255):
            raise MetricError("gray values must lie in [0, 255]")
        object.__setattr__(self, "values", v.astype(np.uint8))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def to_gray(frame) -> GrayFrame:
    return GrayFrame(gray_array(frame))


def _values(x) -> np.ndarray:
    if isinstance(x, GrayFrame):
        return x.values
    if hasattr(x, "pixels"):
        return gray_array(x)
    return np.asarray(x)


def _pair(a, b, what: str) -> tuple[np.ndarray, np.ndarray]:
    x, y = _values(a), _values(b)
    if x.shape != y.shape:
        raise MetricError(f"{what}: dimension mismatch {x.shape} vs {y.shape}")
    return x, y


def entropy(g) -> float:
    """Shannon entropy in bits of the 256-bin gray-level distribution."""
    v = _values(g)
    if v.size == 0:
        raise MetricError("entropy of an empty frame")
    counts = np.bincount(v.ravel().astype(np.int64), minlength=256)
    p = counts[counts > 0] / v.size
    return float(-(p * np.log2(p)).sum()) + 0.0


@dataclass(frozen=True)
class Histogram:
    channel: str
    bins: np.ndarray

    @property
    def total(self) -> int:
        return int(self.bins.sum())


def histogram(frame, channel: str) -> Histogram:
    if channel not in CHANNELS:
        raise MetricError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    if channel == "gray":
        v = gray_array(frame)
    else:
        px = frame.pixels if hasattr(frame, "pixels") else np.asarray(frame)
        v = px[..., "rgb".index(channel)]
    return Histogram(channel, np.bincount(v.ravel(), minlength=256))


def mse(a, b) -> float:
    x, y = _pair(a, b, "mse")
    if x.size == 0:
        raise MetricError("mse of empty frames")
    d = x.astype(np.int64) - y.astype(np.int64)
    return float((d * d).sum() / d.size)


@dataclass(frozen=True)
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def ssim(a, b, params: SsimParams = SsimParams()) -> float:
    """Single-window SSIM over the whole frame, population moments."""
    x, y = _pair(a, b, "ssim")
    if x.size < 2:
        raise MetricError("ssim needs at least 2 pixels")
    x = x.astype(np.float64).ravel()
    y = y.astype(np.float64).ravel()
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    vx, vy = (dx * dx).mean(), (dy * dy).mean()
    cov = (dx * dy).mean()
    c1, c2 = params.c1, params.c2
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(num / den)


def masked(x, mask) -> np.ndarray:
    """Gray values of ``x`` restricted to ``mask`` as a 1-row array (diagnostic variant)."""
    bits = mask.bits if hasattr(mask, "bits") else np.asarray(mask, dtype=bool)
    return _values(x)[bits][None, :]


# -- per-frame report --------------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    frame: int
    entropy_original: float
    entropy_attacked: float
    mse: float
    ssim: float


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)

    def mean(self, attr: str) -> float:
        if not self.rows:
            return float("nan")
        return float(np.mean([getattr(r, attr) for r in self.rows]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "entropy_orig", "entropy_att", "mse", "ssim"])
        for r in self.rows:
            w.writerow([r.frame, f"{r.entropy_original:.4f}", f"{r.entropy_attacked:.4f}",
                        f"{r.mse:.4f}", f"{r.ssim:.4f}"])
        return buf.getvalue()


def report(original, attacked, frames=None, mask_by_frame=None) -> MetricReport:
    """Compare two sequences frame by frame.

    ``frames`` selects indices (default all). ``mask_by_frame`` restricts the
    metrics to each frame's mask; it is a diagnostic option, the default
    compares full frames.
    """
    orig = original.frames if hasattr(original, "frames") else list(original)
    att = attacked.frames if hasattr(attacked, "frames") else list(attacked)
    if len(orig) != len(att):
        raise MetricError(f"frame count mismatch {len(orig)} vs {len(att)}")
    idx = range(len(orig)) if frames is None else list(frames)
    rows = []
    for i in idx:
        if not 0 <= i < len(orig):
            raise MetricError(f"frame selection {i} out of range 0..{len(orig) - 1}")
        a, b = gray_array(orig[i]), gray_array(att[i])
        if a.shape != b.shape:
            raise MetricError(f"frame {i}: dimension mismatch {a.shape} vs {b.shape}")
        if mask_by_frame is not None:
            a, b = masked(a, mask_by_frame[i]), masked(b, mask_by_frame[i])
            if a.size < 2:
                continue
        rows.append(MetricRow(i, entropy(a), entropy(b), mse(a, b), ssim(a, b)))
    return MetricReport(rows)

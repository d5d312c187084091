"""Frame sequences on disk: numbered PPM/PNG frames plus a dataset manifest.

A sequence is a directory of ``frame_<index>.<ext>`` files. The index is
zero-padded and starts at 0; ordering always derives from it, never from the
directory listing.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

FORMATS = ("ppm", "png")
BACKGROUND_KINDS = ("static", "dynamic")
INDEX_WIDTH = 4

_FRAME_RE = re.compile(r"^frame_(\d+)\.(ppm|png)$", re.IGNORECASE)


class FrameStoreError(ValueError):
    """Bad input to the frame store; message names the offending file."""


@dataclass(frozen=True, eq=False)
class Frame:
    """An 8-bit RGB frame, pixels shaped (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise FrameStoreError(f"pixel grid must be (height, width, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise FrameStoreError("frame must be at least 1x1")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise FrameStoreError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> "Frame":
        if len(data) != width * height * 3:
            raise FrameStoreError(
                f"buffer of {len(data)} bytes does not fit {width}x{height} RGB"
            )
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3))

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Frame({self.width}x{self.height})"


@dataclass
class FrameSequence:
    frames: list[Frame]
    fps: int = 25
    name: str = "sequence"
    background_kind: str = "static"

    def __post_init__(self):
        if not self.frames:
            raise FrameStoreError(f"{self.name}: zero frames")
        if int(self.fps) != self.fps or self.fps < 1:
            raise FrameStoreError(f"{self.name}: fps must be a positive integer, got {self.fps}")
        if self.background_kind not in BACKGROUND_KINDS:
            raise FrameStoreError(f"{self.name}: unknown background kind {self.background_kind!r}")
        w, h = self.frames[0].width, self.frames[0].height
        for i, f in enumerate(self.frames):
            if (f.width, f.height) != (w, h):
                raise FrameStoreError(
                    f"{self.name}: frame {i} is {f.width}x{f.height}, expected {w}x{h}"
                )

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    background_kind: str
    width: int
    height: int
    fps: int
    frame_count: int
    path: Path


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, name: str) -> ManifestEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


# -- PPM ---------------------------------------------------------------------

def _read_ppm(data: bytes, name: str) -> np.ndarray:
    # P6 header: magic, width, height, maxval separated by whitespace, '#' comments allowed
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise FrameStoreError(f"{name}: truncated PPM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    if tokens[0] != b"P6":
        raise FrameStoreError(f"{name}: not a binary P6 PPM")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FrameStoreError(f"{name}: malformed PPM header") from None
    if maxval != 255:
        raise FrameStoreError(f"{name}: only maxval 255 supported, got {maxval}")
    if width < 1 or height < 1:
        raise FrameStoreError(f"{name}: empty image")
    body = data[pos:pos + width * height * 3]
    if len(body) != width * height * 3:
        raise FrameStoreError(f"{name}: pixel data truncated")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)


def encode_ppm(frame: Frame) -> bytes:
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.tobytes()


def read_frame(path: Path) -> Frame:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FrameStoreError(f"{path}: {exc.strerror or exc}") from None
    ext = path.suffix.lower().lstrip(".")
    if ext == "ppm":
        return Frame(_read_ppm(data, str(path)))
    if ext == "png":
        try:
            with Image.open(io.BytesIO(data)) as im:
                im.load()
                if im.mode != "RGB":
                    raise FrameStoreError(f"{path}: PNG must be 8-bit RGB, got mode {im.mode}")
                return Frame(np.array(im, dtype=np.uint8))
        except FrameStoreError:
            raise
        except Exception as exc:
            raise FrameStoreError(f"{path}: undecodable PNG ({exc})") from None
    raise FrameStoreError(f"{path}: unsupported frame format {ext!r}")


def write_frame(frame: Frame, path: Path) -> None:
    path = Path(path)
    ext = path.suffix.lower().lstrip(".")
    if ext == "ppm":
        path.write_bytes(encode_ppm(frame))
    elif ext == "png":
        Image.fromarray(np.asarray(frame.pixels), mode="RGB").save(path, format="PNG")
    else:
        raise FrameStoreError(f"{path}: unsupported (or lossy) format {ext!r}")


# -- sequences ---------------------------------------------------------------

def frame_filename(index: int, fmt: str) -> str:
    return f"frame_{index:0{INDEX_WIDTH}d}.{fmt}"


def _indexed_files(directory: Path, fmt: str | None) -> list[tuple[int, Path]]:
    found = []
    for p in directory.iterdir():
        m = _FRAME_RE.match(p.name)
        if not m or (fmt is not None and m.group(2).lower() != fmt):
            continue
        found.append((int(m.group(1)), p))
    found.sort(key=lambda t: (t[0], t[1].name))
    for (i, p), (j, q) in zip(found, found[1:]):
        if i == j:
            raise FrameStoreError(f"{q}: duplicate frame index {j} (also {p.name})")
    return found


def load_sequence(path, fmt: str | None = None, *, fps: int = 25, name: str | None = None,
                  background_kind: str = "static") -> FrameSequence:
    """Load a directory of numbered frames, or a :class:`ManifestEntry`.

    For a manifest entry, metadata comes from the entry and the frame count
    and resolution are checked against it.
    """
    entry = path if isinstance(path, ManifestEntry) else None
    directory = Path(entry.path if entry else path)
    if fmt is not None and fmt not in FORMATS:
        raise FrameStoreError(f"unsupported format {fmt!r}; expected one of {FORMATS}")
    if not directory.exists():
        raise FrameStoreError(f"{directory}: missing path")
    if not directory.is_dir():
        raise FrameStoreError(f"{directory}: not a directory")

    files = _indexed_files(directory, fmt)
    if not files:
        raise FrameStoreError(f"{directory}: zero frames")
    frames = []
    for _, p in files:
        f = read_frame(p)
        if frames and (f.width, f.height) != (frames[0].width, frames[0].height):
            raise FrameStoreError(
                f"{p}: mixed resolutions ({f.width}x{f.height} vs "
                f"{frames[0].width}x{frames[0].height})"
            )
        frames.append(f)

    if entry is not None:
        if len(frames) != entry.frame_count:
            raise FrameStoreError(
                f"{directory}: manifest declares {entry.frame_count} frames, found {len(frames)}"
            )
        if (frames[0].width, frames[0].height) != (entry.width, entry.height):
            raise FrameStoreError(
                f"{directory}: manifest declares {entry.width}x{entry.height}, "
                f"found {frames[0].width}x{frames[0].height}"
            )
        return FrameSequence(frames, fps=entry.fps, name=entry.name,
                             background_kind=entry.background_kind)
    return FrameSequence(frames, fps=fps, name=name or directory.name,
                         background_kind=background_kind)


def write_sequence(seq: FrameSequence, path, fmt: str = "png") -> list[Path]:
    if fmt not in FORMATS:
        raise FrameStoreError(f"unsupported format {fmt!r}; only lossless {FORMATS}")
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FrameStoreError(f"{directory}: {exc.strerror or exc}") from None
    written = []
    for i, frame in enumerate(seq.frames):
        p = directory / frame_filename(i, fmt)
        try:
            write_frame(frame, p)
        except OSError as exc:
            raise FrameStoreError(f"{p}: {exc.strerror or exc}") from None
        written.append(p)
    return written


# -- manifest ----------------------------------------------------------------

MANIFEST_FIELDS = ("name", "background", "width", "height", "fps", "count", "path")


def parse_manifest(text: str, base_dir: Path | None = None, *,
                   check_paths: bool = True) -> DatasetManifest:
    """Parse manifest text: ``name,background,width,height,fps,count,path`` per line.

    Relative paths resolve against ``base_dir``. With ``check_paths`` each
    entry's directory must exist and hold exactly ``count`` frames.
    """
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    entries: list[ManifestEntry] = []
    seen = set()
    for lineno, row in enumerate(csv.reader(lines), start=1):
        row = [c.strip() for c in row]
        if len(row) != len(MANIFEST_FIELDS):
            raise FrameStoreError(
                f"manifest record {lineno}: expected {len(MANIFEST_FIELDS)} fields, got {len(row)}"
            )
        name, kind, w, h, fps, count, p = row
        if kind not in BACKGROUND_KINDS:
            raise FrameStoreError(f"manifest record {lineno} ({name}): unknown background {kind!r}")
        try:
            w, h, fps, count = int(w), int(h), int(fps), int(count)
        except ValueError:
            raise FrameStoreError(f"manifest record {lineno} ({name}): non-integer field") from None
        if min(w, h, fps, count) < 1:
            raise FrameStoreError(f"manifest record {lineno} ({name}): fields must be positive")
        if name in seen:
            raise FrameStoreError(f"manifest record {lineno}: duplicate name {name!r}")
        seen.add(name)
        path = Path(p)
        if not path.is_absolute():
            path = base_dir / path
        entries.append(ManifestEntry(name, kind, w, h, fps, count, path))

    if check_paths:
        for e in entries:
            if not e.path.is_dir():
                raise FrameStoreError(f"manifest entry {e.name}: {e.path} not found")
            n = len(_indexed_files(e.path, None))
            if n != e.frame_count:
                raise FrameStoreError(
                    f"manifest entry {e.name}: count mismatch, declared {e.frame_count}, "
                    f"found {n} in {e.path}"
                )
    return DatasetManifest(entries)


def load_manifest(path, *, check_paths: bool = True) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FrameStoreError(f"{path}: {exc.strerror or exc}") from None
    return parse_manifest(text, path.parent, check_paths=check_paths)

"""Selective (foreground-only) encryption and the FG/BG container files.

The foreground payload of each frame is XORed with ChaCha20 under the FG key;
the background frame is written to a second container, in the clear by
default. Keys never go into containers; they live in a separate key file.

Container layout (little-endian)::

    magic "DEMISEVC" | version u16 | width u32 | height u32 | fps u8
    | frame_count u32 | stream_kind u8 (0 = FG, 1 = BG) | records...

    FG record: frame_index u32 | mask_rle_len u32 | mask RLE | ct_len u32 | ct
    BG record: frame_index u32 | encrypted u8 | data_len u32 | data
"""

from __future__ import annotations

import hashlib
import os
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chacha
from .frames import Frame, FrameSequence
from .segment import RoiMask, decode_mask_rle, encode_mask_rle, merge_frame, split_frame

MAGIC = b"DEMISEVC"
VERSION = 1
FG, BG = 0, 1
STREAM_TAGS = {FG: b"FG00", BG: b"BG00"}
PAYLOAD_COUNTER = 1

_HEADER = struct.Struct("<8sHIIBIB")


class ContainerError(ValueError):
    pass


# -- keys --------------------------------------------------------------------

@dataclass(frozen=True)
class KeyRing:
    fg_key: bytes
    bg_key: bytes
    created: float = 0.0

    def __post_init__(self):
        for name in ("fg_key", "bg_key"):
            if len(getattr(self, name)) != chacha.KEY_SIZE:
                raise ContainerError(f"{name} must be {chacha.KEY_SIZE} bytes")
        if self.fg_key == self.bg_key:
            raise ContainerError("fg_key and bg_key must differ")

    def dumps(self) -> str:
        return f"fg={self.fg_key.hex()}\nbg={self.bg_key.hex()}\n"

    @classmethod
    def loads(cls, text: str) -> "KeyRing":
        vals = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            k, sep, v = line.partition("=")
            if not sep or k not in ("fg", "bg") or k in vals:
                raise ContainerError(f"malformed key file line {line!r}")
            try:
                raw = bytes.fromhex(v)
            except ValueError:
                raise ContainerError(f"key {k}: not hex") from None
            if len(raw) != chacha.KEY_SIZE:
                raise ContainerError(f"key {k}: expected 64 hex digits")
            vals[k] = raw
        if set(vals) != {"fg", "bg"}:
            raise ContainerError("key file needs both fg= and bg= lines")
        return cls(vals["fg"], vals["bg"])


def _seeded_key(seed: int, label: bytes) -> bytes:
    return hashlib.sha256(b"demis-key|" + label + b"|" + str(int(seed)).encode()).digest()


def generate_keys(seed: int | None = None) -> KeyRing:
    """Fresh FG/BG keys from the OS CSPRNG, or derived from ``seed`` (test mode)."""
    if seed is not None:
        return KeyRing(_seeded_key(seed, b"fg"), _seeded_key(seed, b"bg"), created=0.0)
    try:
        fg, bg = os.urandom(32), os.urandom(32)
    except NotImplementedError as exc:
        raise ContainerError("no OS entropy source available") from exc
    return KeyRing(fg, bg, created=time.time())


def write_keys(keys: KeyRing, path) -> None:
    Path(path).write_text(keys.dumps(), encoding="ascii")


def read_keys(path) -> KeyRing:
    try:
        return KeyRing.loads(Path(path).read_text(encoding="ascii"))
    except OSError as exc:
        raise ContainerError(f"{path}: {exc.strerror or exc}") from None


def frame_nonce(stream_kind: int, frame_index: int) -> bytes:
    """4-byte stream tag followed by the frame index as u64 LE."""
    return STREAM_TAGS[stream_kind] + struct.pack("<Q", frame_index)


# -- containers --------------------------------------------------------------

@dataclass
class FgRecord:
    frame_index: int
    mask: RoiMask
    ciphertext: bytes


@dataclass
class BgRecord:
    frame_index: int
    encrypted: bool
    data: bytes


@dataclass
class EncryptedContainer:
    width: int
    height: int
    fps: int
    stream_kind: int
    records: list = field(default_factory=list)
    version: int = VERSION

    @property
    def frame_count(self) -> int:
        return len(self.records)

    def record(self, frame_index: int):
        for r in self.records:
            if r.frame_index == frame_index:
                return r
        raise ContainerError(f"no record for frame {frame_index}")

    def to_bytes(self) -> bytes:
        if not 0 <= self.fps <= 255:
            raise ContainerError(f"fps {self.fps} does not fit in u8")
        out = [_HEADER.pack(MAGIC, self.version, self.width, self.height, self.fps,
                            self.frame_count, self.stream_kind)]
        for r in self.records:
            if self.stream_kind == FG:
                rle = encode_mask_rle(r.mask)
                out.append(struct.pack("<II", r.frame_index, len(rle)))
                out.append(rle)
                out.append(struct.pack("<I", len(r.ciphertext)))
                out.append(r.ciphertext)
            else:
                out.append(struct.pack("<IBI", r.frame_index, int(r.encrypted), len(r.data)))
                out.append(r.data)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncryptedContainer":
        if len(data) < _HEADER.size:
            raise ContainerError("container truncated in header")
        magic, version, width, height, fps, count, kind = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ContainerError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ContainerError(f"unsupported container version {version}")
        if kind not in (FG, BG):
            raise ContainerError(f"unknown stream kind {kind}")
        pos = _HEADER.size
        records = []

        def take(n):
            nonlocal pos
            if pos + n > len(data):
                raise ContainerError(f"container truncated in record {len(records)}")
            chunk = data[pos:pos + n]
            pos += n
            return chunk

        for _ in range(count):
            if kind == FG:
                idx, rle_len = struct.unpack("<II", take(8))
                mask = decode_mask_rle(take(rle_len))
                if (mask.width, mask.height) != (width, height):
                    raise ContainerError(f"frame {idx}: mask size differs from header")
                (ct_len,) = struct.unpack("<I", take(4))
                records.append(FgRecord(idx, mask, take(ct_len)))
            else:
                idx, enc, n = struct.unpack("<IBI", take(9))
                records.append(BgRecord(idx, bool(enc), take(n)))
        if pos != len(data):
            raise ContainerError(f"{len(data) - pos} trailing bytes after last record")
        return cls(width, height, fps, kind, records, version)

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "EncryptedContainer":
        try:
            return cls.from_bytes(Path(path).read_bytes())
        except OSError as exc:
            raise ContainerError(f"{path}: {exc.strerror or exc}") from None


# -- encrypt / decrypt -------------------------------------------------------

def encrypt_frame_payload(key: bytes, frame_index: int, payload: bytes) -> bytes:
    return chacha.xor_stream(key, frame_nonce(FG, frame_index), PAYLOAD_COUNTER, payload)


def encrypt_sequence(seq: FrameSequence, masks, keys: KeyRing, encrypt_bg: bool = False):
    """Return (fg_container, bg_container) for ``seq`` under per-frame ``masks``."""
    masks = list(masks)
    if len(masks) != len(seq.frames):
        raise ContainerError(f"{len(masks)} masks for {len(seq.frames)} frames")
    fg = EncryptedContainer(seq.width, seq.height, seq.fps, FG)
    bg = EncryptedContainer(seq.width, seq.height, seq.fps, BG)
    for i, (frame, mask) in enumerate(zip(seq.frames, masks)):
        if (mask.width, mask.height) != (frame.width, frame.height):
            raise ContainerError(
                f"frame {i}: mask {mask.width}x{mask.height} vs frame {frame.width}x{frame.height}"
            )
        payload, bg_frame = split_frame(frame, mask)
        fg.records.append(FgRecord(i, mask, encrypt_frame_payload(keys.fg_key, i, payload)))
        data = bg_frame.tobytes()
        if encrypt_bg:
            data = chacha.xor_stream(keys.bg_key, frame_nonce(BG, i), PAYLOAD_COUNTER, data)
        bg.records.append(BgRecord(i, encrypt_bg, data))
    return fg, bg


def decrypt_containers(fg: EncryptedContainer, bg: EncryptedContainer, keys: KeyRing,
                       *, fps: int | None = None, name: str = "decrypted",
                       background_kind: str = "static"):
    """Rebuild frames from both containers.

    Returns ``(FrameSequence, [MergeFlags per frame])``. Payload length
    anomalies from tampering are reported in the flags, not raised.
    """
    if fg.stream_kind != FG or bg.stream_kind != BG:
        raise ContainerError("expected one FG and one BG container")
    if (fg.width, fg.height, fg.frame_count) != (bg.width, bg.height, bg.frame_count):
        raise ContainerError(
            f"header mismatch: FG {fg.width}x{fg.height}x{fg.frame_count} "
            f"vs BG {bg.width}x{bg.height}x{bg.frame_count}"
        )
    bg_by_index = {r.frame_index: r for r in bg.records}
    frames, flags = [], []
    for rec in fg.records:
        b = bg_by_index.get(rec.frame_index)
        if b is None:
            raise ContainerError(f"BG container lacks frame {rec.frame_index}")
        data = b.data
        if b.encrypted:
            data = chacha.xor_stream(keys.bg_key, frame_nonce(BG, rec.frame_index),
                                     PAYLOAD_COUNTER, data)
        bg_frame = Frame.from_bytes(bg.width, bg.height, data)
        payload = encrypt_frame_payload(keys.fg_key, rec.frame_index, rec.ciphertext)
        frame, f = merge_frame(payload, rec.mask, bg_frame)
        frames.append(frame)
        flags.append(f)
    seq = FrameSequence(frames, fps=fps or max(fg.fps, 1), name=name,
                        background_kind=background_kind)
    return seq, flags


def nonce_pairs(keys: KeyRing, fg: EncryptedContainer, bg: EncryptedContainer) -> list:
    """Every (key, nonce) pair a container pair consumes; used to audit reuse."""
    pairs = [(keys.fg_key, frame_nonce(FG, r.frame_index)) for r in fg.records]
    pairs += [(keys.bg_key, frame_nonce(BG, r.frame_index)) for r in bg.records if r.encrypted]
    return pairs


def ciphertext_view(fg: EncryptedContainer) -> list[Frame]:
    """What an observer of the FG container sees: ciphertext bytes painted into the mask."""
    out = []
    for r in fg.records:
        px = np.zeros((fg.height, fg.width, 3), dtype=np.uint8)
        ct = np.frombuffer(r.ciphertext, dtype=np.uint8)
        need = 3 * r.mask.popcount
        buf = np.zeros(need, dtype=np.uint8)
        buf[:min(need, ct.size)] = ct[:need]
        px[r.mask.bits] = buf.reshape(-1, 3)
        out.append(Frame(px))
    return out

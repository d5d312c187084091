"""Ciphertext tampering attacks on FG containers and outcome classification.

Modification attacks rewrite byte classes in place and keep the length:

* ``inverse``   - every 0x30 (ASCII '0') becomes 0x31 ('1')
* ``lowercase`` - 0x41..0x5A ('A'..'Z') become 0x61..0x7A
* ``uppercase`` - 0x61..0x7A ('a'..'z') become 0x41..0x5A

Injection attacks grow the stream:

* ``random_insert`` - ``count`` random bytes at distinct random gaps
* ``malleability``  - an extension spliced in at ``offset`` (0 = prepend)

Random insertion draws from :class:`XorShift64`, a fixed xorshift64 generator,
so a seed pins the output byte for byte on every platform.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .metrics import entropy, gray_array, mse, ssim
from .selective import EncryptedContainer, FG, FgRecord

KINDS = ("inverse", "lowercase", "uppercase", "random_insert", "malleability")
MODIFICATION_KINDS = KINDS[:3]
INJECTION_KINDS = KINDS[3:]
DEFAULT_INSERT_COUNT = 8
DEFAULT_EXTENSION = bytes(range(0xA0, 0xB0))


class AttackError(ValueError):
    pass


# -- byte transforms ---------------------------------------------------------

def _table(src_lo: int, src_hi: int, delta: int) -> bytes:
    t = bytearray(range(256))
    for v in range(src_lo, src_hi + 1):
        t[v] = v + delta
    return bytes(t)


_INVERSE = _table(0x30, 0x30, 1)
_LOWER = _table(0x41, 0x5A, 0x20)
_UPPER = _table(0x61, 0x7A, -0x20)


def inverse_attack(ct: bytes) -> bytes:
    return bytes(ct).translate(_INVERSE)


def lowercase_attack(ct: bytes) -> bytes:
    return bytes(ct).translate(_LOWER)


def uppercase_attack(ct: bytes) -> bytes:
    return bytes(ct).translate(_UPPER)


class XorShift64:
    """xorshift64 (shifts 13, 7, 17) over 64-bit state.

    The state is ``seed XOR 0x9E3779B97F4A7C15`` masked to 64 bits; a zero
    state is replaced by that constant. Each :meth:`next` applies
    ``x ^= x << 13; x ^= x >> 7; x ^= x << 17`` and returns the new state.
    """

    GOLDEN = 0x9E3779B97F4A7C15
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = (int(seed) ^ self.GOLDEN) & self.MASK or self.GOLDEN

    def next(self) -> int:
        x = self.state
        x ^= (x << 13) & self.MASK
        x ^= x >> 7
        x ^= (x << 17) & self.MASK
        self.state = x
        return x

    def below(self, n: int) -> int:
        return self.next() % n


def insertion_plan(length: int, count: int, seed: int) -> list[tuple[int, int]]:
    """(gap position, byte value) pairs, sorted by position.

    Gap ``p`` means "before input byte p"; gaps range over 0..length. For
    each insertion the generator yields a position (redrawn until unused)
    then a byte value (low 8 bits).
    """
    if count < 1:
        raise AttackError("random_insert count must be >= 1")
    if count > length + 1:
        raise AttackError(f"cannot insert {count} bytes at distinct gaps of a {length}-byte stream")
    rng = XorShift64(seed)
    used: set[int] = set()
    plan = []
    for _ in range(count):
        p = rng.below(length + 1)
        while p in used:
            p = rng.below(length + 1)
        used.add(p)
        plan.append((p, rng.next() & 0xFF))
    return sorted(plan)


def random_insert_attack(ct: bytes, count: int = DEFAULT_INSERT_COUNT, seed: int = 0) -> bytes:
    ct = bytes(ct)
    out = bytearray()
    prev = 0
    for p, v in insertion_plan(len(ct), count, seed):
        out += ct[prev:p]
        out.append(v)
        prev = p
    out += ct[prev:]
    return bytes(out)


def malleability_attack(ct: bytes, extension: bytes = DEFAULT_EXTENSION, offset: int = 0) -> bytes:
    ct = bytes(ct)
    if not extension:
        raise AttackError("malleability extension must be non-empty")
    if not 0 <= offset <= len(ct):
        raise AttackError(f"malleability offset {offset} outside 0..{len(ct)}")
    return ct[:offset] + bytes(extension) + ct[offset:]


# -- attack specs ------------------------------------------------------------

@dataclass(frozen=True)
class AttackSpec:
    kind: str
    count: int = DEFAULT_INSERT_COUNT
    seed: int | None = None
    extension: bytes = DEFAULT_EXTENSION
    offset: int = 0
    frames: tuple[int, ...] | None = None  # None = all frames

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AttackError(f"unknown attack kind {self.kind!r}; expected one of {KINDS}")
        if self.count < 1:
            raise AttackError("random_insert count must be >= 1")
        if not self.extension:
            raise AttackError("malleability extension must be non-empty")
        if self.offset < 0:
            raise AttackError("malleability offset must be >= 0")

    def applicable(self, length: int) -> bool:
        if self.kind == "random_insert":
            return self.count <= length + 1
        if self.kind == "malleability":
            return self.offset <= length
        return True

    def transform(self, ct: bytes, frame_index: int = 0) -> bytes:
        if self.kind == "inverse":
            return inverse_attack(ct)
        if self.kind == "lowercase":
            return lowercase_attack(ct)
        if self.kind == "uppercase":
            return uppercase_attack(ct)
        if self.kind == "random_insert":
            return random_insert_attack(ct, self.count, (self.seed or 0) + frame_index)
        return malleability_attack(ct, self.extension, self.offset)

    def __str__(self):
        params = []
        if self.kind == "random_insert":
            params = [f"count={self.count}"] + ([] if self.seed is None else [f"seed={self.seed}"])
        elif self.kind == "malleability":
            params = [f"ext={self.extension.hex()}", f"offset={self.offset}"]
        frames = "all" if self.frames is None else _format_frames(self.frames)
        return self.kind + (":" + ",".join(params) if params else "") + "@" + frames


def _format_frames(frames) -> str:
    return ",".join(str(f) for f in frames)


def parse_frames(text: str) -> tuple[int, ...] | None:
    """``all`` or a comma list of indices and inclusive ranges (``0-3,7``)."""
    text = text.strip()
    if text in ("", "all", "*"):
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not m:
            raise AttackError(f"bad frame selection {part!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo:
            raise AttackError(f"bad frame range {part!r}")
        out.extend(range(lo, hi + 1))
    return tuple(sorted(set(out)))


_PARAM_NAMES = {
    "random_insert": {"count", "seed"},
    "malleability": {"ext", "offset"},
}


def parse_attack(text: str) -> AttackSpec:
    """Parse ``kind[:param=value,...][@frames]``.

    Parameters: ``count``/``seed`` for random_insert, ``ext`` (hex) and
    ``offset`` for malleability. Frames default to ``all``.
    """
    text = text.strip()
    body, _, frames = text.partition("@")
    kind, _, params = body.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise AttackError(f"unknown attack kind {kind!r}; expected one of {KINDS}")
    kw: dict = {}
    allowed = _PARAM_NAMES.get(kind, set())
    for item in filter(None, (p.strip() for p in params.split(","))):
        k, sep, v = item.partition("=")
        if not sep or k not in allowed:
            raise AttackError(f"{kind}: unexpected parameter {item!r}")
        try:
            if k == "ext":
                kw["extension"] = bytes.fromhex(v)
            else:
                kw[k] = int(v, 0)
        except ValueError:
            raise AttackError(f"{kind}: bad value for {k}: {v!r}") from None
    return AttackSpec(kind, frames=parse_frames(frames), **kw)


def parse_attack_file(text: str) -> list[AttackSpec]:
    return [parse_attack(ln) for ln in text.splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]


# -- container level ---------------------------------------------------------

def apply_attack(container: EncryptedContainer, spec: AttackSpec) -> EncryptedContainer:
    """Return a new FG container with the targeted ciphertext records transformed.

    With ``frames=all``, records too short for the attack (fewer than
    ``count - 1`` bytes for random_insert, shorter than ``offset`` for
    malleability) are left untouched; an explicitly targeted short record
    raises :class:`AttackError`.
    """
    if container.stream_kind != FG:
        raise AttackError("attacks target the FG container")
    present = {r.frame_index for r in container.records}
    targets = present if spec.frames is None else set(spec.frames)
    missing = sorted(targets - present)
    if missing:
        raise AttackError(f"attack targets missing frame(s) {missing}")
    records = []
    for r in container.records:
        if r.frame_index in targets and (spec.frames is not None or spec.applicable(len(r.ciphertext))):
            r = FgRecord(r.frame_index, r.mask, spec.transform(r.ciphertext, r.frame_index))
        records.append(r)
    return replace(container, records=records)


@dataclass(frozen=True)
class AttackOutcome:
    detectable: bool
    ssim: float
    mse: float
    entropy_delta: float
    kind: str | None = None
    bytes_altered: int = 0
    bytes_inserted: int = 0

    @property
    def successful(self) -> bool:
        return not self.detectable

    @property
    def metrics_delta(self) -> tuple[float, float, float]:
        return (self.mse, self.ssim, self.entropy_delta)


def byte_damage(before: bytes, after: bytes) -> tuple[int, int]:
    """(altered, inserted) byte counts between a stream and its attacked form."""
    inserted = len(after) - len(before)
    if inserted == 0:
        a = np.frombuffer(before, dtype=np.uint8)
        b = np.frombuffer(after, dtype=np.uint8)
        return int((a != b).sum()), 0
    return 0, max(inserted, 0)


def classify_outcome(original, attacked_decrypted, tau: float = 0.9, *, kind=None,
                     bytes_altered: int = 0, bytes_inserted: int = 0) -> AttackOutcome:
    """An attacked frame is detectable when its SSIM to the original drops below ``tau``.

    A detectable attack counts as unsuccessful.
    """
    a, b = gray_array(original), gray_array(attacked_decrypted)
    if a.shape != b.shape:
        raise AttackError(f"classify_outcome: dimension mismatch {a.shape} vs {b.shape}")
    s = ssim(a, b)
    return AttackOutcome(
        detectable=bool(s < tau),
        ssim=s,
        mse=mse(a, b),
        entropy_delta=entropy(b) - entropy(a),
        kind=kind,
        bytes_altered=bytes_altered,
        bytes_inserted=bytes_inserted,
    )

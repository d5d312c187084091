import random
from importlib import resources

import numpy as np
import pytest
from PIL import Image

from conftest import random_sequence
from demis.frames import (DatasetManifest, Frame, FrameSequence, FrameStoreError, encode_ppm,
                          load_manifest, load_sequence, parse_manifest, write_sequence)

# two hand-made 2x2 frames
PIX_A = bytes([255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30])
PIX_B = bytes([1, 2, 3, 4, 5, 6, 7, 8, 9, 250, 251, 252])


def _ppm(pixels: bytes, w=2, h=2) -> bytes:
    return b"P6\n%d %d\n255\n" % (w, h) + pixels


def test_load_two_handwritten_ppms(tmp_path):
    (tmp_path / "frame_0000.ppm").write_bytes(_ppm(PIX_A))
    (tmp_path / "frame_0001.ppm").write_bytes(_ppm(PIX_B))
    seq = load_sequence(tmp_path, "ppm")
    assert len(seq) == 2 and (seq.width, seq.height) == (2, 2)
    assert seq.frames[0].tobytes() == PIX_A
    assert seq.frames[1].tobytes() == PIX_B


def test_ppm_header_with_comment(tmp_path):
    (tmp_path / "frame_0000.ppm").write_bytes(b"P6\n# made by hand\n2 2\n255\n" + PIX_A)
    assert load_sequence(tmp_path).frames[0].tobytes() == PIX_A


def test_empty_directory(tmp_path):
    with pytest.raises(FrameStoreError, match="zero frames"):
        load_sequence(tmp_path)


def test_missing_path(tmp_path):
    with pytest.raises(FrameStoreError, match="missing path"):
        load_sequence(tmp_path / "nope")


def test_mixed_resolutions_names_file(tmp_path):
    (tmp_path / "frame_0000.ppm").write_bytes(_ppm(PIX_A))
    (tmp_path / "frame_0001.ppm").write_bytes(_ppm(bytes(3), 1, 1))
    with pytest.raises(FrameStoreError, match="frame_0001.ppm.*mixed resolutions"):
        load_sequence(tmp_path)


def test_undecodable_file_names_file(tmp_path):
    (tmp_path / "frame_0000.ppm").write_bytes(b"P3\n2 2\n255\n")
    with pytest.raises(FrameStoreError, match="frame_0000.ppm"):
        load_sequence(tmp_path)
    (tmp_path / "frame_0000.ppm").unlink()
    (tmp_path / "frame_0000.png").write_bytes(b"\x89PNG garbage")
    with pytest.raises(FrameStoreError, match="frame_0000.png"):
        load_sequence(tmp_path)


def test_truncated_ppm(tmp_path):
    (tmp_path / "frame_0000.ppm").write_bytes(_ppm(PIX_A[:-1]))
    with pytest.raises(FrameStoreError, match="truncated"):
        load_sequence(tmp_path)


def test_png_with_alpha_rejected(tmp_path):
    Image.new("RGBA", (2, 2)).save(tmp_path / "frame_0000.png")
    with pytest.raises(FrameStoreError, match="RGB"):
        load_sequence(tmp_path)


def test_order_from_index_not_listing(tmp_path, rng, monkeypatch):
    seq = random_sequence(rng, 3, 2, 12)
    write_sequence(seq, tmp_path, "ppm")
    real_iterdir = type(tmp_path).iterdir

    def shuffled(self):
        items = list(real_iterdir(self))
        random.Random(3).shuffle(items)
        return iter(items)

    monkeypatch.setattr(type(tmp_path), "iterdir", shuffled)
    assert load_sequence(tmp_path).frames == seq.frames


@pytest.mark.parametrize("fmt", ["ppm", "png"])
def test_roundtrip_random(tmp_path, rng, fmt):
    seq = random_sequence(rng, 8, 8, 3)
    write_sequence(seq, tmp_path, fmt)
    assert load_sequence(tmp_path, fmt).frames == seq.frames


@pytest.mark.parametrize("fmt", ["ppm", "png"])
def test_roundtrip_constant(tmp_path, fmt):
    seq = FrameSequence([Frame(np.full((5, 7, 3), 77, np.uint8))])
    write_sequence(seq, tmp_path, fmt)
    assert load_sequence(tmp_path).frames == seq.frames


def test_ppm_roundtrip_is_byte_identical(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    original = _ppm(PIX_A)
    (src / "frame_0000.ppm").write_bytes(original)
    write_sequence(load_sequence(src), tmp_path / "dst", "ppm")
    written = (tmp_path / "dst" / "frame_0000.ppm").read_bytes()
    assert written.split() == original.split()
    assert written[-12:] == PIX_A


def test_lossy_format_rejected(tmp_path, rng):
    with pytest.raises(FrameStoreError, match="lossless"):
        write_sequence(random_sequence(rng, 2, 2, 1), tmp_path, "jpg")


def test_frame_invariants():
    with pytest.raises(FrameStoreError):
        Frame(np.zeros((0, 3, 3), np.uint8))
    with pytest.raises(FrameStoreError):
        Frame(np.zeros((2, 2), np.uint8))
    with pytest.raises(FrameStoreError):
        Frame.from_bytes(2, 2, bytes(11))
    with pytest.raises(FrameStoreError, match="zero frames"):
        FrameSequence([])
    with pytest.raises(FrameStoreError, match="frame 1"):
        FrameSequence([Frame(np.zeros((2, 2, 3))), Frame(np.zeros((3, 2, 3)))])


# -- manifest ------------------------------------------------------------------

def _datasets_text():
    return resources.files("demis.data").joinpath("datasets.manifest").read_text()


def test_bundled_dataset_manifest():
    m = parse_manifest(_datasets_text(), check_paths=False)
    assert len(m) == 6
    pet = m["PET"]
    assert (pet.background_kind, pet.width, pet.height, pet.fps, pet.frame_count) == (
        "static", 768, 576, 7, 84)
    hw = m["Highway"]
    assert (hw.background_kind, hw.width, hw.height, hw.fps, hw.frame_count) == (
        "static", 1280, 720, 25, 127)


def test_empty_manifest(tmp_path):
    p = tmp_path / "m.manifest"
    p.write_text("# nothing here\n\n")
    assert load_manifest(p) == DatasetManifest([])


def _write_frames(d, n, w=2, h=2):
    d.mkdir(parents=True)
    for i in range(n):
        (d / f"frame_{i:04d}.ppm").write_bytes(_ppm(bytes(w * h * 3), w, h))


def test_count_mismatch(tmp_path):
    _write_frames(tmp_path / "clip", 9)
    p = tmp_path / "m.manifest"
    p.write_text("clip,static,2,2,25,10,clip\n")
    with pytest.raises(FrameStoreError, match="count mismatch"):
        load_manifest(p)


def test_duplicate_names(tmp_path):
    _write_frames(tmp_path / "clip", 1)
    p = tmp_path / "m.manifest"
    p.write_text("clip,static,2,2,25,1,clip\nclip,static,2,2,25,1,clip\n")
    with pytest.raises(FrameStoreError, match="duplicate"):
        load_manifest(p)


def test_parse_errors(tmp_path):
    with pytest.raises(FrameStoreError, match="expected 7 fields"):
        parse_manifest("a,static,1,1\n", check_paths=False)
    with pytest.raises(FrameStoreError, match="non-integer"):
        parse_manifest("a,static,x,1,1,1,p\n", check_paths=False)
    with pytest.raises(FrameStoreError, match="background"):
        parse_manifest("a,moving,1,1,1,1,p\n", check_paths=False)


def test_load_sequence_from_manifest_entry(tmp_path):
    _write_frames(tmp_path / "clip", 3, 4, 2)
    p = tmp_path / "m.manifest"
    p.write_text("clip,dynamic,4,2,7,3,clip\n")
    seq = load_sequence(load_manifest(p)["clip"])
    assert (seq.name, seq.fps, seq.background_kind, len(seq)) == ("clip", 7, "dynamic", 3)


def test_highway_entry_loads_at_full_size(tmp_path):
    """Highway entry: 1280x720, 25 fps, 127 frames (constant placeholder frames)."""
    d = tmp_path / "highway"
    d.mkdir()
    im = Image.new("RGB", (1280, 720), (90, 90, 90))
    for i in range(127):
        im.save(d / f"frame_{i:04d}.png")
    entry = parse_manifest(_datasets_text(), tmp_path, check_paths=False)["Highway"]
    seq = load_sequence(entry)
    assert (seq.width, seq.height, seq.fps, len(seq)) == (1280, 720, 25, 127)


def test_encode_ppm_header():
    f = Frame(np.zeros((2, 3, 3), np.uint8))
    assert encode_ppm(f).startswith(b"P6\n3 2\n255\n")

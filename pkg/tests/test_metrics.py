import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_sequence
from demis import metrics as m
from demis.frames import Frame
from oracles import luma_oracle, mse_oracle, ssim_oracle


def solid(rgb, w=4, h=4):
    return Frame(np.broadcast_to(np.array(rgb, np.uint8), (h, w, 3)).copy())


def test_to_gray_red():
    assert m.to_gray(solid((255, 0, 0), 1, 1)).values[0, 0] == 76


def test_to_gray_matches_oracle(rng):
    px = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
    g = m.gray_array(Frame(px))
    for r, gg, b, v in zip(px[..., 0].ravel(), px[..., 1].ravel(), px[..., 2].ravel(), g.ravel()):
        assert abs(int(v) - luma_oracle(int(r), int(gg), int(b))) <= 0.5


def test_entropy_values():
    assert m.entropy(np.full((8, 8), 7)) == 0.0
    assert m.entropy(np.arange(256).reshape(16, 16)) == pytest.approx(8.0, abs=1e-12)
    assert m.entropy(np.array([[0, 255]])) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(st.lists(st.integers(0, 255), min_size=1, max_size=300))
def test_entropy_bounds(vals):
    h = m.entropy(np.array([vals]))
    assert 0.0 <= h <= min(8.0, math.log2(len(vals))) + 1e-9


def test_histogram():
    f = solid((10, 20, 30), 3, 2)
    hist = m.histogram(f, "g")
    assert hist.total == 6 and hist.bins[20] == 6
    assert m.histogram(f, "gray").bins[round(luma_oracle(10, 20, 30))] == 6
    with pytest.raises(m.MetricError):
        m.histogram(f, "alpha")


def test_mse_hand():
    assert m.mse(np.full((2, 2), 10), np.full((2, 2), 13)) == 9.0
    with pytest.raises(m.MetricError):
        m.mse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_ssim_oracle_value():
    a, b = [0, 0, 255, 255], [0, 0, 0, 0]
    assert abs(m.ssim(np.array([a]), np.array([b])) - 9 / 6275009) < 1e-9
    assert float(ssim_oracle(a, b)) == pytest.approx(9 / 6275009, rel=1e-12)


def test_ssim_identical_and_constant():
    x = np.random.default_rng(3).integers(0, 256, (8, 8))
    assert m.ssim(x, x) == 1.0
    assert m.ssim(np.full((3, 3), 5), np.full((3, 3), 5)) == 1.0


pixels = st.lists(st.integers(0, 255), min_size=2, max_size=64)


@settings(max_examples=100)
@given(st.data())
def test_ssim_properties(data):
    a = data.draw(pixels)
    b = data.draw(st.lists(st.integers(0, 255), min_size=len(a), max_size=len(a)))
    x, y = np.array([a]), np.array([b])
    s = m.ssim(x, y)
    assert -1.0 <= s <= 1.0
    assert s == pytest.approx(m.ssim(y, x), abs=1e-12)
    assert s == pytest.approx(float(ssim_oracle(a, b)), abs=1e-9)
    perm = np.random.default_rng(len(a)).permutation(len(a))
    assert s == pytest.approx(m.ssim(x[:, perm], y[:, perm]), abs=1e-9)
    assert m.mse(x, y) == pytest.approx(float(mse_oracle(a, b)))


def test_ssim_needs_two_pixels():
    with pytest.raises(m.MetricError):
        m.ssim(np.zeros((1, 1)), np.zeros((1, 1)))


def test_report_consistency(rng):
    a = random_sequence(rng, 6, 5, 4)
    b = random_sequence(rng, 6, 5, 4)
    rep = m.report(a, b)
    assert [r.frame for r in rep.rows] == [0, 1, 2, 3]
    for r, fa, fb in zip(rep.rows, a.frames, b.frames):
        assert r.ssim == m.ssim(fa, fb)
        assert r.mse == m.mse(fa, fb)
        assert r.entropy_original == m.entropy(fa)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "frame,entropy_orig,entropy_att,mse,ssim" and len(lines) == 5
    assert [r.frame for r in m.report(a, b, frames=[2]).rows] == [2]
    with pytest.raises(m.MetricError):
        m.report(a, b, frames=[9])
    with pytest.raises(m.MetricError):
        m.report(a, random_sequence(rng, 6, 5, 3))


def test_report_self_is_perfect(rng):
    a = random_sequence(rng, 6, 5, 3)
    rep = m.report(a, a)
    assert rep.mean("ssim") == 1.0 and rep.mean("mse") == 0.0


def test_masked_report(rng):
    a = random_sequence(rng, 4, 4, 2)
    b = random_sequence(rng, 4, 4, 2)
    mask = np.zeros((4, 4), bool)
    mask[:2] = True
    rep = m.report(a, b, mask_by_frame=[mask, mask])
    assert rep.rows[0].ssim == m.ssim(m.gray_array(a.frames[0])[:2], m.gray_array(b.frames[0])[:2])

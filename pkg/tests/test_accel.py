import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dift_soc.accel import (CMD, DONE, DIFT_ERROR, E_ROW, ROWS, SRC_ADDR, STATUS, BlurAccelerator,
                            InvalidPatch, PatchParams, blur_kernel)
from dift_soc.memory import BusFault

from helpers import accel_rig, image_and_patch, read_buffer
from oracles import brute_blur


def test_constant_image_is_fixed_point():
    img = np.full((8, 12), 7, dtype=np.uint8)
    assert np.array_equal(blur_kernel(img, PatchParams(0, 8, 0, 12)), img)
    assert np.array_equal(blur_kernel(img, PatchParams(2, 5, 3, 9)), img)


def test_single_bright_pixel():
    img = np.array([[0, 0, 0], [0, 9, 0], [0, 0, 0]], dtype=np.uint8)
    expect = [[2, 1, 2], [1, 1, 1], [2, 1, 2]]
    assert brute_blur(img.tolist(), (0, 3, 0, 3)) == expect
    assert blur_kernel(img, PatchParams(0, 3, 0, 3)).tolist() == expect


def test_empty_patch_copies():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4)
    assert np.array_equal(blur_kernel(img, PatchParams(2, 2, 0, 4)), img)
    assert np.array_equal(blur_kernel(img, PatchParams(0, 4, 1, 1)), img)


def test_invalid_patch():
    with pytest.raises(InvalidPatch):
        blur_kernel(np.zeros((4, 4), np.uint8), PatchParams(0, 5, 0, 4))
    with pytest.raises(InvalidPatch):
        blur_kernel(np.zeros((4, 4), np.uint8), PatchParams(3, 2, 0, 4))


@settings(max_examples=300)
@given(image_and_patch())
def test_kernel_matches_brute_force(case):
    img, p = case
    out = blur_kernel(img, p)
    assert out.tolist() == brute_blur(img.tolist(), (p.i_row, p.e_row, p.i_col, p.e_col))
    outside = ~p.mask(*img.shape)
    assert np.array_equal(out[outside], img[outside])
    assert out.dtype == np.uint8


def test_patch_parse_and_mask():
    p = PatchParams.parse("8,24,8,9")
    assert p == PatchParams(8, 24, 8, 9) and str(p) == "8,24,8,9"
    assert p.area == 16 and p.mask(32, 32).sum() == 16
    assert p.contains(8, 8) and not p.contains(8, 9) and not p.contains(24, 8)
    with pytest.raises(ValueError):
        PatchParams.parse("1,2,3")


# -- register file --------------------------------------------------------------

def test_register_round_trip_and_cmd_reads_zero():
    acc = BlurAccelerator()
    acc.reg_access(ROWS, True, 32)
    assert acc.reg_access(ROWS, False) == 32
    assert acc.reg_access(CMD, False) == 0
    acc.reg_access(STATUS, True, 2)
    assert acc.reg_access(STATUS, False) == 0
    with pytest.raises(BusFault):
        acc.reg_access(0x28, False)
    with pytest.raises(BusFault):
        acc.read(ROWS, 2)


def test_start_runs_to_completion():
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    mem, acc, dst = accel_rig(img, np.zeros_like(img), PatchParams(2, 6, 0, 8), shelled=False)
    acc.write(CMD, 4, 1, 0)
    assert acc.read(STATUS, 4) == (DONE, 0)
    out, _ = read_buffer(mem, dst, 8, 8)
    assert np.array_equal(out, blur_kernel(img, PatchParams(2, 6, 0, 8)))


def test_bad_config_sets_error_without_writes():
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    mem, acc, dst = accel_rig(img, np.zeros_like(img), PatchParams(2, 6, 0, 8), shelled=False)
    acc.reg_access(E_ROW, True, 9)
    before = mem.snapshot()
    acc.reg_access(CMD, True, 1)
    assert acc.reg_access(STATUS, False) == DIFT_ERROR
    assert mem.snapshot() == before


def test_dma_fault_sets_error():
    img = np.zeros((4, 4), dtype=np.uint8)
    mem, acc, _ = accel_rig(img, np.zeros_like(img), PatchParams(0, 4, 0, 4), shelled=False)
    acc.reg_access(SRC_ADDR, True, 0x0800_0000)
    acc.reg_access(CMD, True, 1)
    assert acc.reg_access(STATUS, False) == DIFT_ERROR and acc.last_fault is not None


def test_bare_mode_drops_tags():
    img = np.full((4, 8), 200, dtype=np.uint8)
    img[1, 1] = 0
    tags = np.ones_like(img)
    mem, acc, dst = accel_rig(img, tags, PatchParams(1, 3, 0, 4), shelled=False)
    assert acc.execute(mem, "bare") == "done"
    out, out_tags = read_buffer(mem, dst, 4, 8)
    assert not out_tags.any()
    assert np.array_equal(out, blur_kernel(img, PatchParams(1, 3, 0, 4)))
    with pytest.raises(ValueError):
        acc.execute(mem, "wormhole")


def test_shelled_mode_catches_sensitive_pixel_outside_patch():
    img = np.arange(32, dtype=np.uint8).reshape(4, 8)
    tags = np.zeros_like(img)
    tags[2, 6] = 1
    mem, acc, dst = accel_rig(img, tags, PatchParams(0, 4, 0, 4), shelled=True)
    acc.reg_access(CMD, True, 1)
    assert acc.reg_access(STATUS, False) == DIFT_ERROR
    v = acc.last_violation
    assert v.addr == dst + 2 * 8 + 4 and v.coord == (2, 6) and v.tag == 0b0100
    assert acc.dma_writes == 5

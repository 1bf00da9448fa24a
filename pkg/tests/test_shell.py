import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dift_soc.accel import PatchParams
from dift_soc.shell import DiftShell, ShellConfig, ShellFault, ShellViolation, out_tag

from helpers import SENTINEL, SRC, accel_rig, image_and_patch, read_buffer

P = PatchParams(0, 2, 0, 4)


def shell_for(image, tags, patch=P):
    mem, _, dst = accel_rig(image, tags, patch, shelled=True)
    rows, cols = np.shape(image)
    return DiftShell(mem, ShellConfig(SRC, dst, rows, cols, patch)), mem, dst


def test_out_tag_rule():
    assert out_tag((0, 0), 1, P) == 0
    assert out_tag((3, 0), 1, P) == 1
    assert out_tag((3, 0), 0, P) == 0


def test_read_records_lane_tags():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4)
    tags = np.zeros_like(img)
    tags[1, :2] = 1
    sh, _, _ = shell_for(img, tags)
    assert sh.read(SRC + 4) == 0x07060504
    assert sh.input_tag_map[1].tolist() == [1, 1, 0, 0]
    assert sh.read(SRC) == 0x03020100
    assert sh.input_tag_map[0].tolist() == [0, 0, 0, 0]
    assert (sh.input_tag_map[2:] == -1).all()
    with pytest.raises(ShellFault):
        sh.read(SRC - 4)
    with pytest.raises(ShellFault):
        sh.read(SRC + 16)


def test_write_inside_patch_declassifies():
    img = np.zeros((4, 4), dtype=np.uint8)
    sh, mem, dst = shell_for(img, np.ones_like(img))
    sh.read(SRC)
    assert sh.write(dst, 0x01020304) is None
    assert mem.read(dst, 4) == (0x01020304, 0)


def test_write_of_sensitive_pixel_outside_patch_blocked():
    img = np.zeros((4, 4), dtype=np.uint8)
    tags = np.zeros_like(img)
    tags[3, 1] = 1
    sh, mem, dst = shell_for(img, tags)
    for off in range(0, 16, 4):
        sh.read(SRC + off)
    assert sh.write(dst + 8, 0) is None
    assert mem.read(dst + 8, 4) == (0, 0)
    v = sh.write(dst + 12, 0x11111111)
    assert v == ShellViolation(dst + 12, (3, 1), 0b0010)
    assert mem.read(dst + 12, 4) == (SENTINEL * 0x01010101, 0b1111)
    with pytest.raises(ShellFault):
        sh.write(dst + 16, 0)


def test_unread_input_is_treated_as_sensitive():
    img = np.zeros((4, 4), dtype=np.uint8)
    sh, mem, dst = shell_for(img, np.zeros_like(img))
    assert isinstance(sh.write(dst + 12, 0), ShellViolation)
    sh.read(SRC + 12)
    assert sh.write(dst + 12, 0) is None


def shelled_run(img, tags, patch):
    mem, acc, dst = accel_rig(img, tags, patch, shelled=True)
    outcome = acc.execute(mem, "shelled")
    return outcome, acc, mem, dst


@settings(max_examples=200, deadline=None)
@given(image_and_patch(max_rows=6, max_cols=12, cols_multiple=4), st.data())
def test_no_sensitive_egress(case, data):
    img, patch = case
    tags = data.draw(arrays(np.uint8, img.shape, elements=st.integers(0, 1)))
    outcome, acc, mem, dst = shelled_run(img, tags, patch)
    rows, cols = img.shape
    out, out_tags = read_buffer(mem, dst, rows, cols)
    escaped = tags.astype(bool) & ~patch.mask(rows, cols)
    if escaped.any():
        assert outcome == "dift_error"
        first = int(np.flatnonzero(escaped.ravel())[0]) // 4
        assert acc.last_violation.addr == dst + 4 * first
        flat, flat_tags = out.ravel(), out_tags.ravel()
        assert (flat[4 * first:] == SENTINEL).all() and flat_tags[4 * first:].all()
    else:
        assert outcome == "done"
        assert not out_tags.any()


@settings(max_examples=100, deadline=None)
@given(image_and_patch(max_rows=6, max_cols=12, cols_multiple=4))
def test_transparent_on_untagged_inputs(case):
    img, patch = case
    zeros = np.zeros_like(img)
    o1, _, mem1, dst1 = shelled_run(img, zeros, patch)
    mem2, acc2, dst2 = accel_rig(img, zeros, patch, shelled=False)
    o2 = acc2.execute(mem2, "bare")
    assert o1 == o2 == "done"
    assert np.array_equal(read_buffer(mem1, dst1, *img.shape)[0], read_buffer(mem2, dst2, *img.shape)[0])

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dift_soc.accel import (COLS, DST_ADDR, E_COL, E_ROW, I_COL, I_ROW, ROWS, SRC_ADDR, BlurAccelerator,
                            PatchParams)
from dift_soc.memory import DMEM_BASE, MemoryMap

SRC = DMEM_BASE + 0x40
SENTINEL = 0xA5


def accel_rig(image, sensitive_mask, patch, shelled, dst_fill=SENTINEL, dst_tag_fill=1):
    """Accelerator on a fresh memory map with the image at SRC and a pre-filled DST."""
    image = np.asarray(image, dtype=np.uint8)
    rows, cols = image.shape
    n = rows * cols
    dst = SRC + n
    mem = MemoryMap.default()
    mem.load_blob(SRC, image.tobytes(), np.asarray(sensitive_mask, dtype=np.uint8).ravel().tobytes())
    mem.load_blob(dst, bytes([dst_fill]) * n, [dst_tag_fill] * n)
    acc = BlurAccelerator(mem, shelled=shelled)
    for off, v in ((SRC_ADDR, SRC), (DST_ADDR, dst), (ROWS, rows), (COLS, cols), (I_ROW, patch.i_row),
                   (E_ROW, patch.e_row), (I_COL, patch.i_col), (E_COL, patch.e_col)):
        acc.reg_access(off, True, v)
    return mem, acc, dst


def read_buffer(mem, addr, rows, cols):
    data, tags = bytearray(), []
    for off in range(0, rows * cols, 4):
        v, t = mem.read(addr + off, 4)
        data += v.to_bytes(4, "little")
        tags += [(t >> i) & 1 for i in range(4)]
    return (np.frombuffer(bytes(data), dtype=np.uint8).reshape(rows, cols),
            np.array(tags, dtype=np.uint8).reshape(rows, cols))


@st.composite
def image_and_patch(draw, max_rows=9, max_cols=12, cols_multiple=1):
    rows = draw(st.integers(1, max_rows))
    cols = cols_multiple * draw(st.integers(1, max_cols // cols_multiple))
    img = draw(arrays(np.uint8, (rows, cols)))
    r0 = draw(st.integers(0, rows))
    r1 = draw(st.integers(r0, rows))
    c0 = draw(st.integers(0, cols))
    c1 = draw(st.integers(c0, cols))
    return img, PatchParams(r0, r1, c0, c1)

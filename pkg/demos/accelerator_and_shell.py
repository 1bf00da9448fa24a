"""Blur accelerator with and without the DIFT shell around it."""
from __future__ import annotations

import numpy as np

from dift_soc.accel import (COLS, DST_ADDR, E_COL, E_ROW, I_COL, I_ROW, ROWS, SRC_ADDR, BlurAccelerator,
                            PatchParams, blur_kernel)
from dift_soc.memory import DMEM_BASE, MemoryMap

rows, cols = 8, 8
img = (np.indices((rows, cols)).sum(axis=0) % 2 * 200 + 20).astype(np.uint8)
sensitive = np.zeros_like(img)
sensitive[2:6, 2:6] = 1

print("input:\n", img)
print("blurred central patch:\n", blur_kernel(img, PatchParams(2, 6, 2, 6)))


def launch(patch, shelled):
    src, dst = DMEM_BASE + 0x40, DMEM_BASE + 0x40 + rows * cols
    mem = MemoryMap.default()
    mem.load_blob(src, img.tobytes(), sensitive.ravel().tobytes())
    acc = BlurAccelerator(mem, shelled=shelled)
    for reg, v in ((SRC_ADDR, src), (DST_ADDR, dst), (ROWS, rows), (COLS, cols), (I_ROW, patch.i_row),
                   (E_ROW, patch.e_row), (I_COL, patch.i_col), (E_COL, patch.e_col)):
        acc.reg_access(reg, True, v)
    return acc.execute(mem, "shelled" if shelled else "bare"), acc


# Legitimate patch covers the sensitive block: both variants complete.
for shelled in (False, True):
    print("legit, shelled" if shelled else "legit, bare", "->", launch(PatchParams(2, 6, 2, 6), shelled)[0])

# A shrunken patch would copy sensitive pixels through unblurred.
outcome, acc = launch(PatchParams(2, 6, 2, 3), shelled=False)
print("attack, bare    ->", outcome)
outcome, acc = launch(PatchParams(2, 6, 2, 3), shelled=True)
v = acc.last_violation
print("attack, shelled ->", outcome, f"at {v.addr:#010x}, pixel {v.coord}, lane tags {v.tag:04b}")

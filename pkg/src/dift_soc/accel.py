"""Face-obfuscation accelerator: MMIO register file, blur kernel and DMA engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .memory import WORD_MASK, BusFault, MemoryFault, MemoryMap

CMD, STATUS, SRC_ADDR, DST_ADDR, ROWS, COLS, I_ROW, E_ROW, I_COL, E_COL = range(0, 0x28, 4)
REG_NAMES = {CMD: "CMD", STATUS: "STATUS", SRC_ADDR: "SRC_ADDR", DST_ADDR: "DST_ADDR",
             ROWS: "ROWS", COLS: "COLS", I_ROW: "I_ROW", E_ROW: "E_ROW", I_COL: "I_COL", E_COL: "E_COL"}

IDLE, BUSY, DONE, DIFT_ERROR = 0, 1, 2, 3


class InvalidPatch(ValueError):
    pass


@dataclass(frozen=True)
class PatchParams:
    """Blur rectangle: rows ``[i_row, e_row)``, columns ``[i_col, e_col)``."""

    i_row: int
    e_row: int
    i_col: int
    e_col: int

    @classmethod
    def parse(cls, text: str) -> PatchParams:
        parts = [int(p, 0) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected r0,r1,c0,c1, got {text!r}")
        return cls(*parts)

    def __str__(self) -> str:
        return f"{self.i_row},{self.e_row},{self.i_col},{self.e_col}"

    def validate(self, rows: int, cols: int) -> None:
        if not (0 <= self.i_row <= self.e_row <= rows and 0 <= self.i_col <= self.e_col <= cols):
            raise InvalidPatch(f"patch {self} invalid for a {rows}x{cols} image")

    @property
    def empty(self) -> bool:
        return self.i_row == self.e_row or self.i_col == self.e_col

    @property
    def area(self) -> int:
        return (self.e_row - self.i_row) * (self.e_col - self.i_col)

    def contains(self, r: int, c: int) -> bool:
        return self.i_row <= r < self.e_row and self.i_col <= c < self.e_col

    def mask(self, rows: int, cols: int) -> np.ndarray:
        m = np.zeros((rows, cols), dtype=bool)
        m[self.i_row:self.e_row, self.i_col:self.e_col] = True
        return m


def blur_kernel(image: np.ndarray, patch: PatchParams) -> np.ndarray:
    """3x3 box blur restricted to ``patch``.

    Each patched pixel becomes the floor of the mean of its in-bounds 3x3
    neighbourhood in the original image. Everything else is copied.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    rows, cols = img.shape
    patch.validate(rows, cols)
    out = img.astype(np.uint8, copy=True)
    if patch.empty:
        return out
    padded = np.pad(img.astype(np.int64), 1)
    ones = np.pad(np.ones((rows, cols), dtype=np.int64), 1)
    total = np.zeros((rows, cols), dtype=np.int64)
    count = np.zeros((rows, cols), dtype=np.int64)
    for dr in range(3):
        for dc in range(3):
            total += padded[dr:dr + rows, dc:dc + cols]
            count += ones[dr:dr + rows, dc:dc + cols]
    sl = (slice(patch.i_row, patch.e_row), slice(patch.i_col, patch.e_col))
    out[sl] = (total[sl] // count[sl]).astype(np.uint8)
    return out


class BareAdapter:
    """Bus access for a DIFT-unaware master: read tags dropped, writes carry tag 0."""

    def __init__(self, mem: MemoryMap):
        self.mem = mem

    def read(self, addr: int) -> int:
        return self.mem.read(addr, 4)[0]

    def write(self, addr: int, data: int):
        self.mem.write(addr, 4, data, 0)


class BlurAccelerator:
    """Memory-mapped blur accelerator.

    Writing 1 to CMD runs the whole job before the bus write returns, so the
    CPU sees STATUS 2 (done) or 3 (error) on its next poll. ``shelled``
    routes the DMA traffic through a :class:`~dift_soc.shell.DiftShell`.
    """

    def __init__(self, mem: MemoryMap | None = None, shelled: bool = False):
        self.mem = mem
        self.shelled = shelled
        self.regs = dict.fromkeys(REG_NAMES, 0)
        self.last_violation = None
        self.last_fault: MemoryFault | Exception | None = None
        self.dma_writes = 0

    # MMIO device protocol
    def read(self, offset: int, width: int) -> tuple[int, int]:
        if width != 4:
            raise _bus_fault(offset)
        return self.reg_access(offset, False), 0

    def write(self, offset: int, width: int, value: int, tag: int) -> None:
        if width != 4:
            raise _bus_fault(offset)
        self.reg_access(offset, True, value)

    def reg_access(self, offset: int, is_write: bool, value: int = 0) -> int:
        if offset not in REG_NAMES:
            raise _bus_fault(offset)
        if not is_write:
            return 0 if offset == CMD else self.regs[offset]
        if offset == STATUS:
            return 0  # read-only, ignored
        if offset == CMD:
            if value == 1 and self.regs[STATUS] != BUSY:
                self.start()
            return 0
        self.regs[offset] = value & WORD_MASK
        return 0

    @property
    def patch(self) -> PatchParams:
        r = self.regs
        return PatchParams(r[I_ROW], r[E_ROW], r[I_COL], r[E_COL])

    def config_error(self) -> str | None:
        r = self.regs
        if r[SRC_ADDR] % 4 or r[DST_ADDR] % 4:
            return "unaligned buffer"
        if r[COLS] % 4:
            return "COLS not a multiple of 4"
        try:
            self.patch.validate(r[ROWS], r[COLS])
        except InvalidPatch as e:
            return str(e)
        return None

    def start(self) -> str:
        self.regs[STATUS] = BUSY
        self.last_violation = None
        self.last_fault = None
        if self.mem is None or self.config_error():
            self.regs[STATUS] = DIFT_ERROR
            return "fault"
        outcome = self.execute(self.mem, "shelled" if self.shelled else "bare")
        self.regs[STATUS] = DONE if outcome == "done" else DIFT_ERROR
        return outcome

    def execute(self, mem: MemoryMap, bus_adapter: str = "bare") -> str:
        """Run one DMA job; returns ``"done"``, ``"dift_error"`` or ``"fault"``."""
        from .shell import DiftShell, ShellConfig, ShellFault

        r = self.regs
        rows, cols, src, dst = r[ROWS], r[COLS], r[SRC_ADDR], r[DST_ADDR]
        patch = self.patch
        if bus_adapter == "shelled":
            bus = DiftShell(mem, ShellConfig(src, dst, rows, cols, patch))
        elif bus_adapter == "bare":
            bus = BareAdapter(mem)
        else:
            raise ValueError(f"unknown bus adapter {bus_adapter!r}")
        n = rows * cols
        self.dma_writes = 0
        try:
            buf = bytearray()
            for off in range(0, n, 4):
                buf += bus.read(src + off).to_bytes(4, "little")
            image = np.frombuffer(bytes(buf), dtype=np.uint8).reshape(rows, cols)
            out = blur_kernel(image, patch).tobytes()
            for off in range(0, n, 4):
                res = bus.write(dst + off, int.from_bytes(out[off:off + 4], "little"))
                if res is not None:
                    self.last_violation = res
                    return "dift_error"
                self.dma_writes += 1
        except (MemoryFault, ShellFault) as e:
            self.last_fault = e
            return "fault"
        return "done"


def _bus_fault(offset: int) -> BusFault:
    return BusFault(offset, f"accelerator register access at offset {offset:#x}")

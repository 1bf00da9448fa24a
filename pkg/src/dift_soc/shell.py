"""DIFT shell: a bus interposer around a tag-unaware accelerator.

The shell records the tag of every input byte the accelerator reads, gives
each output pixel the tag of the input pixel at the same coordinate
(cleared inside the blur patch) and refuses any write that would carry a
sensitive pixel out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accel import PatchParams
from .memory import MemoryMap

UNKNOWN = -1


class ShellFault(Exception):
    def __init__(self, addr: int, message: str):
        self.addr = addr
        super().__init__(message)


@dataclass(frozen=True)
class ShellConfig:
    src_base: int
    dst_base: int
    rows: int
    cols: int
    patch: PatchParams


@dataclass(frozen=True)
class ShellViolation:
    addr: int
    coord: tuple[int, int]  # first offending pixel in the word
    tag: int  # per-lane bits that would have been written


def out_tag(coord: tuple[int, int], in_tag_bit: int, patch: PatchParams) -> int:
    """Blurred pixels are declassified; all others inherit their input tag."""
    return 0 if patch.contains(*coord) else in_tag_bit


class DiftShell:
    def __init__(self, mem: MemoryMap, config: ShellConfig):
        self.mem = mem
        self.config = config
        self.reset()

    def reset(self) -> None:
        c = self.config
        # per-pixel input tag: UNKNOWN until read
        self.input_tag_map = np.full((c.rows, c.cols), UNKNOWN, dtype=np.int8)

    def _coord(self, base: int, addr: int, what: str) -> tuple[int, int]:
        c = self.config
        off = addr - base
        if off < 0 or off + 4 > c.rows * c.cols or off % 4:
            raise ShellFault(addr, f"{what} at {addr:#010x} outside the configured buffer")
        return divmod(off, c.cols)

    def read(self, addr: int) -> int:
        r, col = self._coord(self.config.src_base, addr, "read")
        data, tag = self.mem.read(addr, 4)
        for lane in range(4):
            self.input_tag_map[r, col + lane] = (tag >> lane) & 1
        return data

    def write(self, addr: int, data: int) -> ShellViolation | None:
        r, col = self._coord(self.config.dst_base, addr, "write")
        patch = self.config.patch
        tag = 0
        for lane in range(4):
            t_in = int(self.input_tag_map[r, col + lane])
            if t_in == UNKNOWN:
                t_in = 1
            tag |= out_tag((r, col + lane), t_in, patch) << lane
        if tag:
            first = (tag & -tag).bit_length() - 1
            return ShellViolation(addr, (r, col + first), tag)
        self.mem.write(addr, 4, data, 0)
        return None

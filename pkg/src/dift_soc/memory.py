"""Coupled tagged memory and the system memory map.

Every 32-bit RAM word carries a 4-bit tag at the same address, one bit per
byte lane. Bit ``i`` set means byte lane ``i`` (little-endian) holds
sensitive data. MMIO regions forward accesses to a device handler.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol

TAG_BITS_PER_WORD = 4
TAG_MASK = 0xF
WORD_MASK = 0xFFFF_FFFF

IMEM_BASE = 0x0000_0000
IMEM_SIZE = 32 * 1024
DMEM_BASE = 0x0010_0000
DMEM_SIZE = 32 * 1024
ACCEL_BASE = 0x1A20_0000
ACCEL_SIZE = 64
SINK_BASE = 0x1A30_0000
SINK_SIZE = 4


class MemoryFault(Exception):
    """Base class for bus-level access errors."""

    kind = "Fault"

    def __init__(self, addr: int, message: str = ""):
        self.addr = addr
        super().__init__(message or f"{self.kind} at {addr:#010x}")


class MisalignedAccess(MemoryFault):
    kind = "Misaligned"


class UnmappedAddress(MemoryFault):
    kind = "Unmapped"


class ReadOnlyRegion(MemoryFault):
    kind = "ReadOnly"


class NonExecutable(MemoryFault):
    kind = "NonExecutable"


class BusFault(MemoryFault):
    """A device rejected the access (undefined register, wrong width, ...)."""

    kind = "BusFault"


class RangeViolation(MemoryFault):
    kind = "RangeViolation"


class OverlappingRegion(ValueError):
    pass


class Device(Protocol):
    """MMIO handler. Offsets are relative to the region base."""

    def read(self, offset: int, width: int) -> tuple[int, int]: ...

    def write(self, offset: int, width: int, value: int, tag: int) -> None: ...


@dataclass(frozen=True)
class Region:
    base: int
    size: int
    kind: str = "ram"  # "ram" | "mmio"
    executable: bool = False
    name: str = ""

    def __post_init__(self):
        if self.base % 4 or self.size % 4 or self.size <= 0:
            raise ValueError(f"region {self.name!r} must be 4-byte aligned with positive size")
        if self.kind not in ("ram", "mmio"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.base + self.size > 1 << 32:
            raise ValueError(f"region {self.name!r} wraps the address space")

    @property
    def end(self) -> int:
        return self.base + self.size

    def contains(self, addr: int, width: int = 1) -> bool:
        return self.base <= addr and addr + width <= self.end

    def overlaps(self, other: Region) -> bool:
        return self.base < other.end and other.base < self.end


class RamStore:
    """Backing store of one RAM region: a byte array plus one 4-bit tag per word."""

    __slots__ = ("data", "tags")

    def __init__(self, size: int):
        self.data = bytearray(size)
        self.tags = bytearray(size // 4)  # low nibble used

    def read(self, off: int, width: int) -> tuple[int, int]:
        value = int.from_bytes(self.data[off:off + width], "little")
        tag = (self.tags[off >> 2] >> (off & 3)) & ((1 << width) - 1)
        return value, tag

    def write(self, off: int, width: int, value: int, tag: int) -> None:
        self.data[off:off + width] = (value & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
        lanes = ((1 << width) - 1) << (off & 3)
        w = off >> 2
        self.tags[w] = (self.tags[w] & ~lanes & TAG_MASK) | ((tag << (off & 3)) & lanes)

    @property
    def tag_bits(self) -> int:
        return len(self.tags) * TAG_BITS_PER_WORD


class MemoryMap:
    """Ordered set of disjoint regions with their backing stores.

    Accesses must be naturally aligned and fall inside a single region;
    anything else faults. The executable region is writable only through
    :meth:`load_blob` (the trusted loader).
    """

    def __init__(self):
        self.regions: list[Region] = []
        self._stores: dict[Region, RamStore | Device] = {}
        self._last: Region | None = None
        # decoded-instruction cache for the executable region, see dift_core
        self.icache: dict[int, object] = {}

    @classmethod
    def default(cls) -> MemoryMap:
        """Instruction RAM and data RAM; devices are mapped by the SoC builder."""
        m = cls()
        m.add_ram(Region(IMEM_BASE, IMEM_SIZE, "ram", executable=True, name="imem"))
        m.add_ram(Region(DMEM_BASE, DMEM_SIZE, "ram", name="dmem"))
        return m

    def _check_free(self, region: Region) -> None:
        for r in self.regions:
            if r.overlaps(region):
                raise OverlappingRegion(f"{region.name or hex(region.base)} overlaps {r.name or hex(r.base)}")
        if region.executable and any(r.executable for r in self.regions):
            raise ValueError("only one executable region is allowed")

    def add_ram(self, region: Region) -> RamStore:
        if region.kind != "ram":
            raise ValueError("add_ram needs a ram region")
        self._check_free(region)
        store = RamStore(region.size)
        self.regions.append(region)
        self.regions.sort(key=lambda r: r.base)
        self._stores[region] = store
        return store

    def map_device(self, region: Region, handler: Device) -> None:
        if region.kind != "mmio" or region.executable:
            raise ValueError("devices need a non-executable mmio region")
        self._check_free(region)
        self.regions.append(region)
        self.regions.sort(key=lambda r: r.base)
        self._stores[region] = handler

    def region_at(self, addr: int, width: int = 1) -> Region:
        last = self._last
        if last is not None and last.base <= addr and addr + width <= last.end:
            return last
        for r in self.regions:
            if r.contains(addr, width):
                self._last = r
                return r
        raise UnmappedAddress(addr)

    def store(self, region: Region) -> RamStore | Device:
        return self._stores[region]

    @property
    def executable_region(self) -> Region:
        for r in self.regions:
            if r.executable:
                return r
        raise LookupError("no executable region")

    def _locate(self, addr: int, width: int) -> tuple[Region, RamStore | Device]:
        if width not in (1, 2, 4):
            raise ValueError(f"bad access width {width}")
        if addr % width:
            raise MisalignedAccess(addr)
        r = self.region_at(addr, width)
        return r, self._stores[r]

    def read(self, addr: int, width: int = 4) -> tuple[int, int]:
        """Return ``(value, tag_bits)``; tag bit ``i`` belongs to the i-th accessed byte."""
        r, s = self._locate(addr, width)
        return s.read(addr - r.base, width)

    def write(self, addr: int, width: int, value: int, tag: int = 0) -> None:
        r, s = self._locate(addr, width)
        if r.executable:
            raise ReadOnlyRegion(addr)
        s.write(addr - r.base, width, value, tag & ((1 << width) - 1))

    def load_blob(self, addr: int, blob: bytes, tags: list[int] | bytes | None = None) -> None:
        """Trusted bulk load. ``tags`` holds one 0/1 sensitivity flag per byte."""
        n = len(blob)
        if tags is not None and len(tags) != n:
            raise ValueError("tag stream length must match the blob")
        r = next((r for r in self.regions if r.contains(addr, max(n, 1))), None)
        if r is None or r.kind != "ram":
            raise RangeViolation(addr, f"blob [{addr:#x}, {addr + n:#x}) is not inside one RAM region")
        s: RamStore = self._stores[r]  # type: ignore[assignment]
        off = addr - r.base
        s.data[off:off + n] = blob
        for i in range(n):
            o = off + i
            bit = 1 << (o & 3)
            if tags is not None and tags[i]:
                s.tags[o >> 2] |= bit
            else:
                s.tags[o >> 2] &= ~bit & TAG_MASK
        if r.executable:
            self.icache.clear()

    def ram_stores(self) -> list[tuple[Region, RamStore]]:
        return [(r, s) for r, s in self._stores.items() if r.kind == "ram"]  # type: ignore[misc]

    def snapshot(self) -> list[tuple[int, bytes, bytes]]:
        """Byte-exact copy of every RAM region (data and tags), for comparisons."""
        return [(r.base, bytes(s.data), bytes(s.tags)) for r, s in self.ram_stores()]


def tag_overhead_ratio(mem: MemoryMap) -> Fraction:
    """Total tag bits over total data bits across all RAM regions."""
    stores = mem.ram_stores()
    if not stores:
        raise ValueError("memory map has no RAM region")
    tag_bits = sum(s.tag_bits for _, s in stores)
    data_bits = sum(8 * len(s.data) for _, s in stores)
    return Fraction(tag_bits, data_bits)

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dift_soc.memory import (DMEM_BASE, MemoryMap, MisalignedAccess, OverlappingRegion, RangeViolation,
                             ReadOnlyRegion, Region, UnmappedAddress, tag_overhead_ratio)

from oracles import ByteLaneMemory

A = DMEM_BASE


@pytest.fixture
def mem():
    return MemoryMap.default()


def test_fresh_ram_reads_zero(mem):
    assert mem.read(A, 4) == (0, 0)


def test_word_round_trip(mem):
    mem.write(A, 4, 0xDEADBEEF, 0b1111)
    assert mem.read(A, 4) == (0xDEADBEEF, 0b1111)


def test_sub_word_read_returns_lane_tag(mem):
    mem.write(A, 4, 0x11223344, 0b0100)
    assert mem.read(A + 2, 1) == (0x22, 0b1)
    assert mem.read(A + 3, 1) == (0x11, 0b0)
    assert mem.read(A + 2, 2) == (0x1122, 0b01)


def test_byte_store_clears_only_its_lane(mem):
    mem.write(A, 4, 0xCAFEF00D, 0b1111)
    mem.write(A, 1, 0x00, 0b0)
    assert mem.read(A, 4) == (0xCAFEF000, 0b1110)


def test_byte_lane_oracle_exhaustive(mem):
    """Every (word tag, lane, width) against the per-byte model."""
    for word_tag, value in itertools.product(range(16), (0x11223344, 0xFFFFFFFF)):
        ref = ByteLaneMemory()
        mem.write(A, 4, value, word_tag)
        ref.write(A, 4, value, word_tag)
        for width in (1, 2, 4):
            for off in range(0, 4, width):
                assert mem.read(A + off, width) == ref.read(A + off, width)


def test_lane_independence_exhaustive(mem):
    for base_tag, width in itertools.product(range(16), (1, 2)):
        for off in range(0, 4, width):
            for new_tag in range(1 << width):
                mem.write(A, 4, 0x11223344, base_tag)
                mem.write(A + off, width, 0xAABB, new_tag)
                ref = ByteLaneMemory()
                ref.write(A, 4, 0x11223344, base_tag)
                ref.write(A + off, width, 0xAABB, new_tag)
                assert mem.read(A, 4) == ref.read(A, 4)


@given(st.sampled_from([1, 2, 4]), st.integers(0, 255), st.integers(0, 2**32 - 1), st.integers(0, 15))
def test_round_trip_property(width, word_index, value, tag):
    mem = MemoryMap.default()
    addr = A + 4 * word_index
    value &= (1 << 8 * width) - 1
    tag &= (1 << width) - 1
    mem.write(addr, width, value, tag)
    assert mem.read(addr, width) == (value, tag)


def test_misaligned_and_unmapped(mem):
    with pytest.raises(MisalignedAccess):
        mem.read(A + 2, 4)
    with pytest.raises(MisalignedAccess):
        mem.write(A + 1, 2, 0, 0)
    with pytest.raises(UnmappedAddress):
        mem.write(0xFFFF_FFF0, 4, 1, 0)
    # gap between imem and dmem
    with pytest.raises(UnmappedAddress):
        mem.read(0x0008_0000, 4)


def test_instruction_ram_read_only_after_load(mem):
    mem.load_blob(0, b"\x13\x00\x00\x00")
    assert mem.read(0, 4) == (0x13, 0)
    with pytest.raises(ReadOnlyRegion):
        mem.write(0, 4, 0, 0)


def test_load_blob_tags(mem):
    mem.load_blob(A, bytes(16))
    assert all(mem.read(A + i, 4)[1] == 0 for i in range(0, 16, 4))
    mem.load_blob(A, b"\x01\x02\x03\x04", [1, 1, 0, 0])
    assert mem.read(A, 4) == (0x04030201, 0b0011)


def test_load_blob_range_violation(mem):
    with pytest.raises(RangeViolation):
        mem.load_blob(A + 32 * 1024 - 2, b"1234")


class Probe:
    def __init__(self):
        self.seen = []

    def read(self, offset, width):
        self.seen.append(("r", offset))
        return 0x1234, 0

    def write(self, offset, width, value, tag):
        self.seen.append(("w", offset, value))


def test_device_dispatch(mem):
    dev = Probe()
    mem.map_device(Region(0x1A20_0000, 64, "mmio"), dev)
    assert mem.read(0x1A20_0004, 4) == (0x1234, 0)
    mem.write(0x1A20_0008, 4, 7, 0)
    assert dev.seen == [("r", 4), ("w", 8, 7)]
    with pytest.raises(OverlappingRegion):
        mem.map_device(Region(0x1A20_0020, 64, "mmio"), Probe())
    with pytest.raises(UnmappedAddress):
        mem.read(0x1A20_0040, 4)


def test_tag_overhead_is_one_eighth():
    assert tag_overhead_ratio(MemoryMap.default()) == Fraction(1, 8)
    m = MemoryMap()
    m.add_ram(Region(0, 32 * 1024, executable=True))
    m.add_ram(Region(0x10_0000, 32 * 1024))
    assert tag_overhead_ratio(m) == Fraction(1, 8)
    tiny = MemoryMap()
    tiny.add_ram(Region(0, 8))
    assert tag_overhead_ratio(tiny) == Fraction(8, 64)
    with pytest.raises(ValueError):
        tag_overhead_ratio(MemoryMap())


def test_32k_data_ram_grows_to_36k():
    m = MemoryMap()
    store = m.add_ram(Region(0x10_0000, 32 * 1024))
    assert (8 * len(store.data) + store.tag_bits) // 8 == 36 * 1024

"""Tagged memory: one tag bit per byte, four per 32-bit word."""
from __future__ import annotations

from dift_soc.memory import DMEM_BASE, MemoryMap, tag_overhead_ratio

mem = MemoryMap.default()
print("tag overhead:", tag_overhead_ratio(mem), "=", float(tag_overhead_ratio(mem)))

# Mark bytes 1 and 2 of the first data word as sensitive.
mem.load_blob(DMEM_BASE, bytes([0x11, 0x22, 0x33, 0x44]), [0, 1, 1, 0])
value, tag = mem.read(DMEM_BASE, 4)
print(f"word  {value:#010x}  tag {tag:04b}")

for lane in range(4):
    v, t = mem.read(DMEM_BASE + lane, 1)
    print(f"byte {lane}: {v:#04x}  tag {t:b}")

# A word store overwrites the tag along with the data.
mem.write(DMEM_BASE, 4, 0xCAFEF00D, 0)
print("after untagged store:", mem.read(DMEM_BASE, 4))

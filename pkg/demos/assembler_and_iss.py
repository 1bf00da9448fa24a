"""Assemble a small program and watch taint move through the register file."""
from __future__ import annotations

from dift_soc import CpuState, MemoryMap, PolicyConfig, assemble, disassemble, run
from dift_soc.core import load_program
from dift_soc.harness import OutputSink
from dift_soc.memory import DMEM_BASE, SINK_BASE, SINK_SIZE, Region

src = f"""
    li   s0, {DMEM_BASE:#x}
    li   s1, {SINK_BASE:#x}
    lw   t0, 0(s0)        # tagged word
    addi t1, t0, 1        # taint follows the data
    dift.untag t1         # explicit declassification
    sw   t1, 0(s1)        # allowed: t1 is clean now
    sw   t0, 0(s1)        # blocked: t0 still carries the tag
    ebreak
"""
prog = assemble(src)
for i, w in enumerate(prog.words):
    print(f"{4 * i:04x}: {w:08x}  {disassemble(w)}")

mem = MemoryMap.default()
sink = OutputSink()
mem.map_device(Region(SINK_BASE, SINK_SIZE, "mmio"), sink)
load_program(mem, prog.words)
mem.load_blob(DMEM_BASE, (1234).to_bytes(4, "little"), [1, 1, 1, 1])
cpu = CpuState()
out = run(cpu, mem, PolicyConfig(sink_ranges=[(SINK_BASE, SINK_SIZE)]))
print("outcome:", out.event)
print("instret:", out.instret)
print("t0 tag:", bin(cpu.xtag[5]), " t1 tag:", bin(cpu.xtag[6]))
print("sink received:", sink.words)

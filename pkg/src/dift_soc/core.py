"""Functional model of a tag-tracking RV32I core.

Tags are propagated alongside every instruction without affecting control
flow or the retired-instruction count. A store whose written tag bits are
nonzero and whose target intersects a sink range is stopped before it
reaches memory.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Union

from .isa import IllegalInstruction, Instruction, decode
from .memory import TAG_MASK, WORD_MASK, MemoryFault, MemoryMap, NonExecutable

CONSERVATIVE_WORD = "conservative-word"
BYTE_LANE = "byte-lane"


@dataclass
class PolicyConfig:
    sink_ranges: list[tuple[int, int]] = field(default_factory=list)  # (base, size)
    propagation: str = CONSERVATIVE_WORD
    untag_enabled: bool = True

    def __post_init__(self):
        if self.propagation not in (CONSERVATIVE_WORD, BYTE_LANE):
            raise ValueError(f"unknown propagation mode {self.propagation!r}")
        spans = sorted(self.sink_ranges)
        for base, size in spans:
            if base % 4 or size % 4 or size <= 0:
                raise ValueError("sink ranges must be 4-byte aligned")
        for (b0, s0), (b1, _) in zip(spans, spans[1:]):
            if b0 + s0 > b1:
                raise ValueError("sink ranges overlap")

    def hits_sink(self, addr: int, width: int) -> bool:
        return any(addr < b + s and b < addr + width for b, s in self.sink_ranges)


@dataclass
class CpuState:
    pc: int = 0
    x: list[int] = field(default_factory=lambda: [0] * 32)
    xtag: list[int] = field(default_factory=lambda: [0] * 32)
    instret: int = 0
    halted: bool = False

    @property
    def regs(self) -> list[tuple[int, int]]:
        return list(zip(self.x, self.xtag))


# -- step events --------------------------------------------------------------

@dataclass(frozen=True)
class Continue:
    pass


@dataclass(frozen=True)
class Halted:
    exit_code: int


@dataclass(frozen=True)
class DiftViolation:
    pc: int
    store_addr: int
    tag: int


@dataclass(frozen=True)
class MemFault:
    kind: str
    addr: int


@dataclass(frozen=True)
class IllegalInstructionEvent:
    word: int
    pc: int


@dataclass(frozen=True)
class Timeout:
    steps: int


StepEvent = Union[Continue, Halted, DiftViolation, MemFault, IllegalInstructionEvent]
CONTINUE = Continue()


@dataclass
class RunOutcome:
    event: StepEvent | Timeout
    instret: int
    cpu: CpuState


# -- tag propagation ----------------------------------------------------------

def propagate_tag(op_class: str, operand_tags: list[int], width: int = 4,
                  mode: str = CONSERVATIVE_WORD) -> int:
    """Tag produced by one instruction class.

    ``width`` is the access width for loads and stores. Load and store tags
    are relative to the accessed lanes (bit 0 = lowest accessed byte).
    """
    if not operand_tags:
        raise ValueError("propagate_tag needs at least one operand tag")
    if op_class == "alu":
        t = 0
        for o in operand_tags:
            t |= o
        if mode == CONSERVATIVE_WORD:
            return TAG_MASK if t else 0
        return t & TAG_MASK
    if op_class == "load":
        t = operand_tags[0] & ((1 << width) - 1)
        if width == 4:
            return t
        return TAG_MASK if t else 0
    if op_class == "store":
        t = operand_tags[0] & TAG_MASK
        if width == 4:
            return t
        return (1 << width) - 1 if t else 0
    if op_class == "jump":
        return 0
    raise ValueError(f"unknown op class {op_class!r}")


# -- execution ----------------------------------------------------------------

def _s32(v: int) -> int:
    return v - (1 << 32) if v & 0x8000_0000 else v


def _alu(cpu: CpuState, policy: PolicyConfig, rd: int, value: int, *tags: int) -> None:
    if rd:
        cpu.x[rd] = value & WORD_MASK
        t = 0
        for o in tags:
            t |= o
        if t and policy.propagation == CONSERVATIVE_WORD:
            t = TAG_MASK
        cpu.xtag[rd] = t
    cpu.pc = (cpu.pc + 4) & WORD_MASK


def _reg_reg(fn: Callable[[int, int], int]):
    def h(cpu, mem, policy, i):
        a, b = cpu.x[i.rs1], cpu.x[i.rs2]
        _alu(cpu, policy, i.rd, fn(a, b), cpu.xtag[i.rs1], cpu.xtag[i.rs2])
    return h


def _reg_imm(fn: Callable[[int, int], int]):
    def h(cpu, mem, policy, i):
        _alu(cpu, policy, i.rd, fn(cpu.x[i.rs1], i.imm), cpu.xtag[i.rs1])
    return h


_ARITH = {
    "ADD": lambda a, b: a + b,
    "SUB": lambda a, b: a - b,
    "SLL": lambda a, b: a << (b & 31),
    "SLT": lambda a, b: int(_s32(a) < _s32(b)),
    "SLTU": lambda a, b: int(a < b),
    "XOR": lambda a, b: a ^ b,
    "SRL": lambda a, b: a >> (b & 31),
    "SRA": lambda a, b: _s32(a) >> (b & 31),
    "OR": lambda a, b: a | b,
    "AND": lambda a, b: a & b,
}
_ARITH_IMM = {
    "ADDI": lambda a, imm: a + imm,
    "SLTI": lambda a, imm: int(_s32(a) < imm),
    "SLTIU": lambda a, imm: int(a < (imm & WORD_MASK)),
    "XORI": lambda a, imm: a ^ imm,
    "ORI": lambda a, imm: a | imm,
    "ANDI": lambda a, imm: a & imm,
    "SLLI": lambda a, sh: a << sh,
    "SRLI": lambda a, sh: a >> sh,
    "SRAI": lambda a, sh: _s32(a) >> sh,
}
_BRANCH = {
    "BEQ": lambda a, b: a == b,
    "BNE": lambda a, b: a != b,
    "BLT": lambda a, b: _s32(a) < _s32(b),
    "BGE": lambda a, b: _s32(a) >= _s32(b),
    "BLTU": lambda a, b: a < b,
    "BGEU": lambda a, b: a >= b,
}
_LOADS = {"LB": (1, True), "LH": (2, True), "LW": (4, False), "LBU": (1, False), "LHU": (2, False)}
_STORES = {"SB": 1, "SH": 2, "SW": 4}


def _lui(cpu, mem, policy, i):
    _alu(cpu, policy, i.rd, i.imm << 12)


def _auipc(cpu, mem, policy, i):
    _alu(cpu, policy, i.rd, cpu.pc + (i.imm << 12))


def _jal(cpu, mem, policy, i):
    link = cpu.pc + 4
    cpu.pc = (cpu.pc + i.imm) & WORD_MASK
    if i.rd:
        cpu.x[i.rd], cpu.xtag[i.rd] = link & WORD_MASK, 0


def _jalr(cpu, mem, policy, i):
    link = cpu.pc + 4
    cpu.pc = (cpu.x[i.rs1] + i.imm) & WORD_MASK & ~1
    if i.rd:
        cpu.x[i.rd], cpu.xtag[i.rd] = link & WORD_MASK, 0


def _branch(fn):
    def h(cpu, mem, policy, i):
        if fn(cpu.x[i.rs1], cpu.x[i.rs2]):
            cpu.pc = (cpu.pc + i.imm) & WORD_MASK
        else:
            cpu.pc = (cpu.pc + 4) & WORD_MASK
    return h


def _load(width: int, signed: bool):
    bits = 8 * width

    def h(cpu, mem, policy, i):
        addr = (cpu.x[i.rs1] + i.imm) & WORD_MASK
        value, tag = mem.read(addr, width)
        if signed and value >> (bits - 1):
            value -= 1 << bits
        if i.rd:
            cpu.x[i.rd] = value & WORD_MASK
            cpu.xtag[i.rd] = tag if width == 4 else (TAG_MASK if tag else 0)
        cpu.pc = (cpu.pc + 4) & WORD_MASK
    return h


def _store(width: int):
    def h(cpu, mem, policy, i):
        addr = (cpu.x[i.rs1] + i.imm) & WORD_MASK
        tag = propagate_tag("store", [cpu.xtag[i.rs2]], width)
        if tag and policy.hits_sink(addr, width):
            return DiftViolation(cpu.pc, addr, tag)
        mem.write(addr, width, cpu.x[i.rs2], tag)
        cpu.pc = (cpu.pc + 4) & WORD_MASK
    return h


def _ecall(cpu, mem, policy, i):
    cpu.halted = True
    return Halted(cpu.x[10])


def _ebreak(cpu, mem, policy, i):
    cpu.halted = True
    return Halted(0)


def _untag(cpu, mem, policy, i):
    if policy.untag_enabled and i.rd:
        cpu.xtag[i.rd] = 0
    cpu.pc = (cpu.pc + 4) & WORD_MASK


HANDLERS: dict[str, Callable] = {
    "LUI": _lui, "AUIPC": _auipc, "JAL": _jal, "JALR": _jalr,
    "ECALL": _ecall, "EBREAK": _ebreak, "DIFT_UNTAG": _untag,
    **{k: _reg_reg(f) for k, f in _ARITH.items()},
    **{k: _reg_imm(f) for k, f in _ARITH_IMM.items()},
    **{k: _branch(f) for k, f in _BRANCH.items()},
    **{k: _load(*v) for k, v in _LOADS.items()},
    **{k: _store(w) for k, w in _STORES.items()},
}


def fetch(mem: MemoryMap, pc: int) -> tuple[Instruction, Callable]:
    """Fetch and decode from the executable region, through the decode cache.

    Raises MemoryFault or IllegalInstruction.
    """
    hit = mem.icache.get(pc)
    if hit is not None:
        return hit
    region = mem.region_at(pc, 4) if pc % 4 == 0 else None
    if region is None:
        mem.read(pc, 4)  # raises the appropriate fault
    if not region.executable:
        raise NonExecutable(pc)
    word, _ = mem.read(pc, 4)
    ins = decode(word)
    entry = (ins, HANDLERS[ins.op])
    mem.icache[pc] = entry
    return entry


def step(cpu: CpuState, mem: MemoryMap, policy: PolicyConfig) -> StepEvent:
    if cpu.halted:
        raise RuntimeError("step on a halted core")
    pc = cpu.pc
    try:
        ins, handler = fetch(mem, pc)
    except IllegalInstruction as e:
        return IllegalInstructionEvent(e.word, pc)
    except MemoryFault as e:
        return MemFault(e.kind, e.addr)
    try:
        ev = handler(cpu, mem, policy, ins)
    except MemoryFault as e:
        cpu.pc = pc
        return MemFault(e.kind, e.addr)
    if ev is None:
        cpu.instret += 1
        return CONTINUE
    if isinstance(ev, Halted):
        cpu.instret += 1
    return ev


def run(cpu: CpuState, mem: MemoryMap, policy: PolicyConfig, max_steps: int = 10**8) -> RunOutcome:
    """Step until a non-Continue event or ``max_steps`` retired steps."""
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    ev: StepEvent | Timeout = CONTINUE
    for _ in range(max_steps):
        ev = step(cpu, mem, policy)
        if ev is not CONTINUE:
            break
    else:
        ev = Timeout(max_steps)
    return RunOutcome(ev, cpu.instret, copy.deepcopy(cpu))


def load_program(mem: MemoryMap, words: list[int], base: int = 0) -> None:
    """Raw image format: little-endian 32-bit words at ``base`` (entry pc 0)."""
    blob = b"".join((w & WORD_MASK).to_bytes(4, "little") for w in words)
    mem.load_blob(base, blob)

"""RV32I instruction forms plus the ``dift.untag`` declassification instruction.

Decoding is strict: every field that the encoding fixes must hold its fixed
value, so ``encode(decode(w)) == w`` for every word that decodes.
"""

from __future__ import annotations

from dataclasses import dataclass

REG_NAMES = [f"x{i}" for i in range(32)]
ABI_NAMES = ("zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
             "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6").split()

OP_LUI, OP_AUIPC, OP_JAL, OP_JALR = 0b0110111, 0b0010111, 0b1101111, 0b1100111
OP_BRANCH, OP_LOAD, OP_STORE = 0b1100011, 0b0000011, 0b0100011
OP_IMM, OP_REG, OP_SYSTEM, OP_CUSTOM0 = 0b0010011, 0b0110011, 0b1110011, 0b0001011

BRANCH_F3 = {"BEQ": 0, "BNE": 1, "BLT": 4, "BGE": 5, "BLTU": 6, "BGEU": 7}
LOAD_F3 = {"LB": 0, "LH": 1, "LW": 2, "LBU": 4, "LHU": 5}
STORE_F3 = {"SB": 0, "SH": 1, "SW": 2}
IMM_F3 = {"ADDI": 0, "SLTI": 2, "SLTIU": 3, "XORI": 4, "ORI": 6, "ANDI": 7}
SHIFT_IMM = {"SLLI": (1, 0), "SRLI": (5, 0), "SRAI": (5, 0x20)}
REG_OPS = {"ADD": (0, 0), "SUB": (0, 0x20), "SLL": (1, 0), "SLT": (2, 0), "SLTU": (3, 0),
           "XOR": (4, 0), "SRL": (5, 0), "SRA": (5, 0x20), "OR": (6, 0), "AND": (7, 0)}

_BRANCH_BY_F3 = {v: k for k, v in BRANCH_F3.items()}
_LOAD_BY_F3 = {v: k for k, v in LOAD_F3.items()}
_STORE_BY_F3 = {v: k for k, v in STORE_F3.items()}
_IMM_BY_F3 = {v: k for k, v in IMM_F3.items()}
_SHIFT_BY_F3F7 = {v: k for k, v in SHIFT_IMM.items()}
_REG_BY_F3F7 = {v: k for k, v in REG_OPS.items()}

U_TYPE = {"LUI", "AUIPC"}
ALL_OPS = (U_TYPE | {"JAL", "JALR"} | set(BRANCH_F3) | set(LOAD_F3) | set(STORE_F3)
           | set(IMM_F3) | set(SHIFT_IMM) | set(REG_OPS) | {"EBREAK", "ECALL", "DIFT_UNTAG"})


class IllegalInstruction(ValueError):
    def __init__(self, word: int):
        self.word = word
        super().__init__(f"illegal instruction {word:#010x}")


class RangeOverflow(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    """Decoded instruction.

    ``imm`` is the sign-extended immediate for I/S/B/J forms (byte offset
    for branches and jumps), the shift amount for shift-immediates, and the
    raw 20-bit upper field for LUI/AUIPC.
    """

    op: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0

    def __str__(self) -> str:
        return disassemble_instruction(self)


def _sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def decode(word: int) -> Instruction:
    if not 0 <= word <= 0xFFFF_FFFF:
        raise IllegalInstruction(word & 0xFFFF_FFFF)
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    f3 = (word >> 12) & 7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    f7 = word >> 25
    i_imm = _sext(word >> 20, 12)

    if opcode == OP_LUI:
        return Instruction("LUI", rd=rd, imm=word >> 12)
    if opcode == OP_AUIPC:
        return Instruction("AUIPC", rd=rd, imm=word >> 12)
    if opcode == OP_JAL:
        imm = (((word >> 31) & 1) << 20 | ((word >> 12) & 0xFF) << 12
               | ((word >> 20) & 1) << 11 | ((word >> 21) & 0x3FF) << 1)
        return Instruction("JAL", rd=rd, imm=_sext(imm, 21))
    if opcode == OP_JALR and f3 == 0:
        return Instruction("JALR", rd=rd, rs1=rs1, imm=i_imm)
    if opcode == OP_BRANCH and f3 in _BRANCH_BY_F3:
        imm = (((word >> 31) & 1) << 12 | ((word >> 7) & 1) << 11
               | ((word >> 25) & 0x3F) << 5 | ((word >> 8) & 0xF) << 1)
        return Instruction(_BRANCH_BY_F3[f3], rs1=rs1, rs2=rs2, imm=_sext(imm, 13))
    if opcode == OP_LOAD and f3 in _LOAD_BY_F3:
        return Instruction(_LOAD_BY_F3[f3], rd=rd, rs1=rs1, imm=i_imm)
    if opcode == OP_STORE and f3 in _STORE_BY_F3:
        imm = _sext((f7 << 5) | rd, 12)
        return Instruction(_STORE_BY_F3[f3], rs1=rs1, rs2=rs2, imm=imm)
    if opcode == OP_IMM:
        if f3 in _IMM_BY_F3:
            return Instruction(_IMM_BY_F3[f3], rd=rd, rs1=rs1, imm=i_imm)
        op = _SHIFT_BY_F3F7.get((f3, f7))
        if op:
            return Instruction(op, rd=rd, rs1=rs1, imm=rs2)
    if opcode == OP_REG:
        op = _REG_BY_F3F7.get((f3, f7))
        if op:
            return Instruction(op, rd=rd, rs1=rs1, rs2=rs2)
    if opcode == OP_SYSTEM:
        if word == 0x0000_0073:
            return Instruction("ECALL")
        if word == 0x0010_0073:
            return Instruction("EBREAK")
    if opcode == OP_CUSTOM0 and f3 == 0 and f7 == 0 and rs1 == 0 and rs2 == 0:
        return Instruction("DIFT_UNTAG", rd=rd)
    raise IllegalInstruction(word)


def _check_reg(*regs: int) -> None:
    for r in regs:
        if not 0 <= r < 32:
            raise RangeOverflow(f"register x{r} out of range")


def _check_signed(value: int, bits: int, what: str) -> None:
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if not lo <= value <= hi:
        raise RangeOverflow(f"{what} {value} outside [{lo}, {hi}]")


def encode(ins: Instruction) -> int:
    op, rd, rs1, rs2, imm = ins.op, ins.rd, ins.rs1, ins.rs2, ins.imm
    _check_reg(rd, rs1, rs2)
    if op in U_TYPE:
        if not 0 <= imm <= 0xFFFFF:
            raise RangeOverflow(f"upper immediate {imm:#x} outside 20 bits")
        return (imm << 12) | (rd << 7) | (OP_LUI if op == "LUI" else OP_AUIPC)
    if op == "JAL":
        _check_signed(imm, 21, "jump offset")
        if imm & 1:
            raise RangeOverflow(f"jump offset {imm} is odd")
        u = imm & 0x1FFFFF
        return (((u >> 20) & 1) << 31 | ((u >> 1) & 0x3FF) << 21 | ((u >> 11) & 1) << 20
                | ((u >> 12) & 0xFF) << 12 | rd << 7 | OP_JAL)
    if op in BRANCH_F3:
        _check_signed(imm, 13, "branch offset")
        if imm & 1:
            raise RangeOverflow(f"branch offset {imm} is odd")
        u = imm & 0x1FFF
        return (((u >> 12) & 1) << 31 | ((u >> 5) & 0x3F) << 25 | rs2 << 20 | rs1 << 15
                | BRANCH_F3[op] << 12 | ((u >> 1) & 0xF) << 8 | ((u >> 11) & 1) << 7 | OP_BRANCH)
    if op in STORE_F3:
        _check_signed(imm, 12, "immediate")
        u = imm & 0xFFF
        return (u >> 5) << 25 | rs2 << 20 | rs1 << 15 | STORE_F3[op] << 12 | (u & 0x1F) << 7 | OP_STORE
    if op in SHIFT_IMM:
        if not 0 <= imm < 32:
            raise RangeOverflow(f"shift amount {imm} outside [0, 31]")
        f3, f7 = SHIFT_IMM[op]
        return f7 << 25 | imm << 20 | rs1 << 15 | f3 << 12 | rd << 7 | OP_IMM
    if op in LOAD_F3 or op in IMM_F3 or op == "JALR":
        _check_signed(imm, 12, "immediate")
        if op in LOAD_F3:
            f3, opc = LOAD_F3[op], OP_LOAD
        elif op == "JALR":
            f3, opc = 0, OP_JALR
        else:
            f3, opc = IMM_F3[op], OP_IMM
        return (imm & 0xFFF) << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opc
    if op in REG_OPS:
        f3, f7 = REG_OPS[op]
        return f7 << 25 | rs2 << 20 | rs1 << 15 | f3 << 12 | rd << 7 | OP_REG
    if op == "ECALL":
        return 0x0000_0073
    if op == "EBREAK":
        return 0x0010_0073
    if op == "DIFT_UNTAG":
        return rd << 7 | OP_CUSTOM0
    raise ValueError(f"unknown instruction {op!r}")


def disassemble_instruction(ins: Instruction) -> str:
    op, m = ins.op, ins.op.lower()
    rd, rs1, rs2 = (REG_NAMES[r] for r in (ins.rd, ins.rs1, ins.rs2))
    if op in U_TYPE:
        return f"{m} {rd}, {ins.imm:#x}"
    if op == "JAL":
        return f"{m} {rd}, {ins.imm}"
    if op in BRANCH_F3:
        return f"{m} {rs1}, {rs2}, {ins.imm}"
    if op in LOAD_F3 or op == "JALR":
        return f"{m} {rd}, {ins.imm}({rs1})"
    if op in STORE_F3:
        return f"{m} {rs2}, {ins.imm}({rs1})"
    if op in IMM_F3 or op in SHIFT_IMM:
        return f"{m} {rd}, {rs1}, {ins.imm}"
    if op in REG_OPS:
        return f"{m} {rd}, {rs1}, {rs2}"
    if op == "DIFT_UNTAG":
        return f"dift.untag {rd}"
    return m


def disassemble(word: int) -> str:
    """Assembler-syntax text for ``word``; ``.word`` fallback for illegal encodings.

    Branch and jump offsets are printed relative to the instruction, which
    is also how the assembler reads numeric targets.
    """
    try:
        return disassemble_instruction(decode(word))
    except IllegalInstruction:
        return f".word {word & 0xFFFF_FFFF:#010x}"

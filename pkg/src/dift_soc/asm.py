"""Two-pass assembler for the RV32I subset plus ``dift.untag``.

Syntax: ``#`` comments, ``label:`` definitions, the directives ``.org``,
``.word`` and ``.equ name, value``, and the pseudo-instructions ``nop``,
``mv``, ``li``, ``j``, ``beqz``, ``bnez`` and ``ret``. Numeric branch and
jump operands are offsets relative to the instruction; symbolic ones are
resolved to labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .isa import (ABI_NAMES, BRANCH_F3, IMM_F3, LOAD_F3, REG_OPS, SHIFT_IMM, STORE_F3,
                  Instruction, RangeOverflow, disassemble, encode)

__all__ = ["AsmError", "AsmProgram", "assemble", "disassemble", "encode"]

REGISTERS = {f"x{i}": i for i in range(32)}
REGISTERS.update({name: i for i, name in enumerate(ABI_NAMES)})
REGISTERS["fp"] = 8

_LABEL = re.compile(r"^([A-Za-z_.][\w.]*)\s*:")
_MEM_OPERAND = re.compile(r"^(.*)\((\s*\w+\s*)\)$")
_SYMBOL = re.compile(r"^[A-Za-z_.][\w.]*$")


class AsmError(Exception):
    KINDS = ("UnknownMnemonic", "BadOperand", "DuplicateLabel", "UndefinedLabel", "RangeOverflow")

    def __init__(self, line: int, column: int, kind: str, message: str):
        assert kind in self.KINDS
        self.line, self.column, self.kind, self.message = line, column, kind, message
        super().__init__(f"line {line}, col {column}: {kind}: {message}")


@dataclass
class AsmProgram:
    words: list[int]
    symbols: dict[str, int] = field(default_factory=dict)
    origin: int = 0

    def to_bytes(self) -> bytes:
        return b"".join(w.to_bytes(4, "little") for w in self.words)


@dataclass
class _Stmt:
    line: int
    column: int
    mnemonic: str
    operands: list[str]
    addr: int
    size: int  # in words


class _Undefined(Exception):
    pass


def _split_operands(text: str) -> list[str]:
    text = text.strip()
    return [t.strip() for t in text.split(",")] if text else []


def _parse_int(tok: str) -> int | None:
    try:
        return int(tok, 0)
    except ValueError:
        return None


class _Assembler:
    def __init__(self, source: str):
        self.source = source
        self.equs: dict[str, int] = {}
        self.labels: dict[str, int] = {}
        self.stmts: list[_Stmt] = []
        self.origin: int | None = None

    # -- helpers ------------------------------------------------------------
    def err(self, st: _Stmt | tuple[int, int], kind: str, msg: str) -> AsmError:
        line, col = (st.line, st.column) if isinstance(st, _Stmt) else st
        return AsmError(line, col, kind, msg)

    def value(self, tok: str, st: _Stmt, *, pass1: bool = False) -> int:
        tok = tok.strip()
        v = _parse_int(tok)
        if v is not None:
            return v
        m = re.match(r"^(.+?)\s*([+-])\s*(\w+)$", tok)
        if m and _SYMBOL.match(m.group(1)):
            base = self.value(m.group(1), st, pass1=pass1)
            off = self.value(m.group(3), st, pass1=pass1)
            return base + off if m.group(2) == "+" else base - off
        if not _SYMBOL.match(tok):
            raise self.err(st, "BadOperand", f"cannot parse value {tok!r}")
        if tok in self.equs:
            return self.equs[tok]
        if tok in self.labels:
            return self.labels[tok]
        if pass1:
            raise _Undefined(tok)
        raise self.err(st, "UndefinedLabel", f"undefined symbol {tok!r}")

    def reg(self, tok: str, st: _Stmt) -> int:
        r = REGISTERS.get(tok.strip().lower())
        if r is None:
            raise self.err(st, "BadOperand", f"bad register {tok!r}")
        return r

    def mem_operand(self, tok: str, st: _Stmt) -> tuple[int, int]:
        m = _MEM_OPERAND.match(tok.strip())
        if not m:
            raise self.err(st, "BadOperand", f"expected offset(reg), got {tok!r}")
        off = m.group(1).strip()
        return (self.value(off, st) if off else 0), self.reg(m.group(2), st)

    def target(self, tok: str, st: _Stmt) -> int:
        tok = tok.strip()
        v = _parse_int(tok)
        if v is not None:
            return v
        return self.value(tok, st) - st.addr

    def want(self, st: _Stmt, n: int) -> None:
        if len(st.operands) != n:
            raise self.err(st, "BadOperand", f"{st.mnemonic} takes {n} operands, got {len(st.operands)}")

    # -- pass 1 -------------------------------------------------------------
    def pass1(self) -> None:
        loc = None
        for lineno, raw in enumerate(self.source.splitlines(), start=1):
            text = raw.split("#", 1)[0]
            col = 1
            while True:
                stripped = text.lstrip()
                col += len(text) - len(stripped)
                text = stripped
                m = _LABEL.match(text)
                if not m:
                    break
                name = m.group(1)
                if name in self.labels or name in self.equs:
                    raise self.err((lineno, col), "DuplicateLabel", f"{name!r} already defined")
                if loc is None:
                    loc = self.origin = 0
                self.labels[name] = loc
                col += m.end()
                text = text[m.end():]
            text = text.rstrip()
            if not text:
                continue
            parts = text.split(None, 1)
            mnemonic = parts[0].lower()
            st = _Stmt(lineno, col, mnemonic, _split_operands(parts[1] if len(parts) > 1 else ""),
                       loc if loc is not None else 0, 0)
            if mnemonic == ".equ":
                self.want(st, 2)
                name = st.operands[0]
                if not _SYMBOL.match(name):
                    raise self.err(st, "BadOperand", f"bad symbol name {name!r}")
                if name in self.labels or name in self.equs:
                    raise self.err(st, "DuplicateLabel", f"{name!r} already defined")
                try:
                    self.equs[name] = self.value(st.operands[1], st, pass1=True)
                except _Undefined as u:
                    raise self.err(st, "UndefinedLabel", f".equ uses undefined symbol {u}")
                continue
            if mnemonic == ".org":
                self.want(st, 1)
                try:
                    addr = self.value(st.operands[0], st, pass1=True)
                except _Undefined as u:
                    raise self.err(st, "UndefinedLabel", f".org uses undefined symbol {u}")
                if addr % 4 or addr < 0:
                    raise self.err(st, "BadOperand", f".org address {addr:#x} not word aligned")
                if loc is None:
                    self.origin = loc = addr
                elif addr < loc:
                    raise self.err(st, "BadOperand", ".org moves backwards")
                else:
                    st.size = (addr - loc) // 4
                    st.mnemonic = ".pad"
                    self.stmts.append(st)
                    loc = addr
                continue
            if loc is None:
                loc = self.origin = 0
                st.addr = 0
            st.size = self.size_of(st)
            self.stmts.append(st)
            loc += 4 * st.size

    def size_of(self, st: _Stmt) -> int:
        if st.mnemonic == ".word":
            if not st.operands:
                raise self.err(st, "BadOperand", ".word needs at least one value")
            return len(st.operands)
        if st.mnemonic == "li":
            self.want(st, 2)
            try:
                v = self.value(st.operands[1], st, pass1=True)
            except _Undefined:
                return 2
            return 1 if -2048 <= _to_signed32(v, st, self) <= 2047 else 2
        return 1

    # -- pass 2 -------------------------------------------------------------
    def pass2(self) -> list[int]:
        words: list[int] = []
        for st in self.stmts:
            if st.mnemonic == ".pad":
                words.extend([0] * st.size)
                continue
            if st.mnemonic == ".word":
                for tok in st.operands:
                    v = self.value(tok, st)
                    if not -(1 << 31) <= v <= 0xFFFF_FFFF:
                        raise self.err(st, "RangeOverflow", f".word value {v} exceeds 32 bits")
                    words.append(v & 0xFFFF_FFFF)
                continue
            instrs = self.expand(st)
            assert len(instrs) == st.size
            for ins in instrs:
                try:
                    words.append(encode(ins))
                except RangeOverflow as e:
                    raise self.err(st, "RangeOverflow", str(e))
        return words

    def expand(self, st: _Stmt) -> list[Instruction]:
        m, ops = st.mnemonic, st.operands
        if m == "nop":
            self.want(st, 0)
            return [Instruction("ADDI")]
        if m == "mv":
            self.want(st, 2)
            return [Instruction("ADDI", rd=self.reg(ops[0], st), rs1=self.reg(ops[1], st))]
        if m == "li":
            rd = self.reg(ops[0], st)
            v = _to_signed32(self.value(ops[1], st), st, self)
            if st.size == 1:
                return [Instruction("ADDI", rd=rd, imm=v)]
            hi = ((v + 0x800) >> 12) & 0xFFFFF
            lo = v - _signed32(hi << 12)
            lo = _signed32(lo & 0xFFFF_FFFF)
            return [Instruction("LUI", rd=rd, imm=hi), Instruction("ADDI", rd=rd, rs1=rd, imm=lo)]
        if m == "j":
            self.want(st, 1)
            return [Instruction("JAL", imm=self.target(ops[0], st))]
        if m in ("beqz", "bnez"):
            self.want(st, 2)
            return [Instruction("BEQ" if m == "beqz" else "BNE", rs1=self.reg(ops[0], st),
                                imm=self.target(ops[1], st))]
        if m == "ret":
            self.want(st, 0)
            return [Instruction("JALR", rs1=1)]
        if m == "dift.untag":
            self.want(st, 1)
            return [Instruction("DIFT_UNTAG", rd=self.reg(ops[0], st))]
        op = m.upper()
        if op in ("ECALL", "EBREAK"):
            self.want(st, 0)
            return [Instruction(op)]
        if op in ("LUI", "AUIPC"):
            self.want(st, 2)
            v = self.value(ops[1], st)
            if not 0 <= v <= 0xFFFFF:
                raise self.err(st, "RangeOverflow", f"upper immediate {v} outside 20 bits")
            return [Instruction(op, rd=self.reg(ops[0], st), imm=v)]
        if op == "JAL":
            if len(ops) == 1:
                return [Instruction("JAL", rd=1, imm=self.target(ops[0], st))]
            self.want(st, 2)
            return [Instruction("JAL", rd=self.reg(ops[0], st), imm=self.target(ops[1], st))]
        if op == "JALR" or op in LOAD_F3:
            if op == "JALR" and len(ops) == 1:
                return [Instruction("JALR", rd=1, rs1=self.reg(ops[0], st))]
            if op == "JALR" and len(ops) == 3:
                return [Instruction("JALR", rd=self.reg(ops[0], st), rs1=self.reg(ops[1], st),
                                    imm=self.value(ops[2], st))]
            self.want(st, 2)
            imm, rs1 = self.mem_operand(ops[1], st)
            return [Instruction(op, rd=self.reg(ops[0], st), rs1=rs1, imm=imm)]
        if op in STORE_F3:
            self.want(st, 2)
            imm, rs1 = self.mem_operand(ops[1], st)
            return [Instruction(op, rs1=rs1, rs2=self.reg(ops[0], st), imm=imm)]
        if op in BRANCH_F3:
            self.want(st, 3)
            return [Instruction(op, rs1=self.reg(ops[0], st), rs2=self.reg(ops[1], st),
                                imm=self.target(ops[2], st))]
        if op in IMM_F3 or op in SHIFT_IMM:
            self.want(st, 3)
            return [Instruction(op, rd=self.reg(ops[0], st), rs1=self.reg(ops[1], st),
                                imm=self.value(ops[2], st))]
        if op in REG_OPS:
            self.want(st, 3)
            return [Instruction(op, rd=self.reg(ops[0], st), rs1=self.reg(ops[1], st),
                                rs2=self.reg(ops[2], st))]
        raise self.err(st, "UnknownMnemonic", f"unknown mnemonic {st.mnemonic!r}")


def _signed32(v: int) -> int:
    v &= 0xFFFF_FFFF
    return v - (1 << 32) if v >> 31 else v


def _to_signed32(v: int, st: _Stmt, asm: _Assembler) -> int:
    if not -(1 << 31) <= v <= 0xFFFF_FFFF:
        raise asm.err(st, "RangeOverflow", f"constant {v} exceeds 32 bits")
    return _signed32(v)


def assemble(source: str) -> AsmProgram:
    """Assemble ``source``; raises :class:`AsmError` at the first problem."""
    a = _Assembler(source)
    a.pass1()
    words = a.pass2()
    symbols = dict(a.labels)
    return AsmProgram(words=words, symbols=symbols, origin=a.origin or 0)

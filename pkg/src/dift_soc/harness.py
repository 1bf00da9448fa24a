"""SoC assembly, attack injection and the demo scenarios."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .accel import BlurAccelerator, InvalidPatch, PatchParams, blur_kernel
from .asm import AsmProgram, assemble
from .core import CpuState, DiftViolation, Halted, PolicyConfig, RunOutcome, load_program, run
from .memory import (ACCEL_BASE, ACCEL_SIZE, DMEM_BASE, DMEM_SIZE, IMEM_SIZE, SINK_BASE, SINK_SIZE,
                     BusFault, MemoryMap, Region)

PARAM_BASE = DMEM_BASE
PARAM_WORDS = 9  # SRC, DST, ROWS, COLS, I_ROW, E_ROW, I_COL, E_COL, USE_ACCEL
SRC_BASE = DMEM_BASE + 0x40
STEP_BUDGET = 10**8

EXPECTED_CLEAN = "clean"
EXPECTED_SUCCEEDED = "attack_succeeded"
EXPECTED_BLOCKED = "attack_blocked"

_PRESETS = {  # id -> (use_accel, use_shell, attacked)
    1: (False, False, False),
    2: (True, False, False),
    3: (True, False, True),
    4: (True, True, True),
    5: (False, False, True),
}


class PgmError(ValueError):
    pass


class CapacityError(ValueError):
    pass


# -- images -------------------------------------------------------------------

def load_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM whose width is a multiple of 4."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise PgmError(f"{path}: unsupported format {raw[:2]!r}, only binary P5 is accepted")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and (raw[pos:pos + 1].isspace() or raw[pos:pos + 1] == b"#"):
            if raw[pos:pos + 1] == b"#":
                while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(raw) and raw[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: malformed header")
        fields.append(int(raw[start:pos]))
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise PgmError(f"{path}: malformed header")
    pos += 1
    cols, rows, maxval = fields
    if maxval != 255:
        raise PgmError(f"{path}: unsupported maxval {maxval}")
    if cols % 4 or cols <= 0 or rows <= 0:
        raise PgmError(f"{path}: geometry {rows}x{cols} unsupported (cols must be a positive multiple of 4)")
    data = raw[pos:pos + rows * cols]
    if len(data) != rows * cols:
        raise PgmError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(rows, cols).copy()


def save_pgm(image: np.ndarray, path: str | os.PathLike) -> None:
    img = np.asarray(image, dtype=np.uint8)
    rows, cols = img.shape
    if cols % 4:
        raise PgmError(f"geometry {rows}x{cols} unsupported (cols must be a multiple of 4)")
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (cols, rows) + img.tobytes())


def checkerboard(rows: int = 64, cols: int = 64, lo: int = 16, hi: int = 240) -> np.ndarray:
    """High-contrast test image: blurring changes every pixel of it."""
    r, c = np.indices((rows, cols))
    return np.where((r + c) % 2, hi, lo).astype(np.uint8)


# -- SoC ----------------------------------------------------------------------

class OutputSink:
    """Write-only output port; records every word (and its tag) that arrives."""

    def __init__(self):
        self.words: list[tuple[int, int]] = []

    def read(self, offset: int, width: int) -> tuple[int, int]:
        raise BusFault(SINK_BASE + offset, "output sink is write-only")

    def write(self, offset: int, width: int, value: int, tag: int) -> None:
        if width != 4:
            raise BusFault(SINK_BASE + offset, "output sink takes word writes only")
        self.words.append((value, tag))

    def image(self, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
        """Emitted pixels (row-major prefix) and the mask of pixels that were emitted."""
        n = rows * cols
        data = b"".join(v.to_bytes(4, "little") for v, _ in self.words)[:n]
        flat = np.zeros(n, dtype=np.uint8)
        flat[:len(data)] = np.frombuffer(data, dtype=np.uint8)
        mask = np.zeros(n, dtype=bool)
        mask[:len(data)] = True
        return flat.reshape(rows, cols), mask.reshape(rows, cols)


@lru_cache(maxsize=None)
def application() -> AsmProgram:
    src = resources.files("dift_soc").joinpath("programs/blur_app.s").read_text()
    return assemble(src)


@dataclass
class ScenarioConfig:
    id: int
    use_accel: bool
    use_shell: bool
    attack: PatchParams | None
    image_path: str | None
    sensitive_region: PatchParams
    legit_patch: PatchParams
    image: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def preset(cls, scenario: int, image: str | os.PathLike | np.ndarray,
               sensitive: PatchParams, attack: PatchParams | None = None) -> ScenarioConfig:
        """Scenario ``1..5`` with legit patch == sensitive region.

        Attacked scenarios without an explicit ``attack`` use
        :func:`default_attack`.
        """
        use_accel, use_shell, attacked = _PRESETS[scenario]
        if attacked and attack is None:
            attack = default_attack(sensitive)
        if not attacked:
            attack = None
        path, arr = (None, np.asarray(image, dtype=np.uint8)) if isinstance(image, np.ndarray) else (str(image), None)
        return cls(scenario, use_accel, use_shell, attack, path, sensitive, sensitive, arr)

    def load_image(self) -> np.ndarray:
        if self.image is not None:
            return self.image
        if self.image_path is None:
            raise ValueError("scenario has no image")
        return load_pgm(self.image_path)

    @property
    def protected(self) -> bool:
        """Whether every path the data takes to the sink is DIFT-checked."""
        return self.use_shell or not self.use_accel


def default_attack(sensitive: PatchParams) -> PatchParams:
    """Shrink the patch to its first four columns."""
    return PatchParams(sensitive.i_row, sensitive.e_row, sensitive.i_col,
                       min(sensitive.i_col + 4, sensitive.e_col))


@dataclass
class Soc:
    cfg: ScenarioConfig
    mem: MemoryMap
    cpu: CpuState
    policy: PolicyConfig
    sink: OutputSink
    accel: BlurAccelerator | None
    image: np.ndarray
    src: int
    dst: int


def _write_params(soc: Soc, patch: PatchParams) -> None:
    rows, cols = soc.image.shape
    vals = [soc.src, soc.dst, rows, cols, patch.i_row, patch.e_row, patch.i_col, patch.e_col,
            int(soc.cfg.use_accel)]
    blob = b"".join((v & 0xFFFF_FFFF).to_bytes(4, "little") for v in vals)
    soc.mem.load_blob(PARAM_BASE, blob)


def build_soc(cfg: ScenarioConfig, program: AsmProgram | None = None) -> Soc:
    program = program or application()
    image = cfg.load_image()
    rows, cols = image.shape
    if cols % 4:
        raise PgmError(f"image width {cols} is not a multiple of 4")
    if 4 * len(program.words) > IMEM_SIZE:
        raise CapacityError(f"program of {4 * len(program.words)} bytes exceeds instruction RAM")
    n = rows * cols
    dst = SRC_BASE + n
    if dst + n > DMEM_BASE + DMEM_SIZE:
        raise CapacityError(f"{rows}x{cols} image needs {2 * n} bytes of buffers; data RAM is {DMEM_SIZE} bytes")
    cfg.sensitive_region.validate(rows, cols)
    cfg.legit_patch.validate(rows, cols)

    mem = MemoryMap.default()
    sink = OutputSink()
    mem.map_device(Region(SINK_BASE, SINK_SIZE, "mmio", name="sink"), sink)
    accel = None
    if cfg.use_accel:
        accel = BlurAccelerator(mem, shelled=cfg.use_shell)
        mem.map_device(Region(ACCEL_BASE, ACCEL_SIZE, "mmio", name="accel"), accel)
    load_program(mem, program.words, program.origin)
    mem.load_blob(SRC_BASE, image.tobytes(), cfg.sensitive_region.mask(rows, cols).ravel().tobytes())
    policy = PolicyConfig(sink_ranges=[(SINK_BASE, SINK_SIZE)])
    soc = Soc(cfg, mem, CpuState(pc=program.origin), policy, sink, accel, image, SRC_BASE, dst)
    _write_params(soc, cfg.legit_patch)
    return soc


def inject_attack(soc: Soc, corrupted: PatchParams) -> None:
    """Overwrite the application's patch parameters with untagged attacker data."""
    _write_params(soc, corrupted)


# -- reporting ----------------------------------------------------------------

def count_leaked_pixels(input_image: np.ndarray, emitted: np.ndarray, sensitive: PatchParams,
                        reference: np.ndarray, emitted_mask: np.ndarray | None = None) -> int:
    """Sensitive pixels emitted verbatim although the legit blur would change them."""
    inp = np.asarray(input_image)
    if emitted_mask is None:
        emitted_mask = np.ones(inp.shape, dtype=bool)
    leaked = (sensitive.mask(*inp.shape) & emitted_mask
              & (np.asarray(emitted) == inp) & (np.asarray(reference) != inp))
    return int(leaked.sum())


@dataclass
class ScenarioReport:
    scenario: int
    violation: bool
    violation_site: str  # "cpu-sink" | "shell" | "none"
    violation_addr: int | None
    leaked_pixels: int
    instret: int
    output_image_path: str | None
    expected_outcome: str
    passed: bool
    output: np.ndarray = field(repr=False, compare=False, default=None)
    outcome: RunOutcome | None = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "violation": self.violation,
            "violation_site": self.violation_site,
            "violation_addr": None if self.violation_addr is None else f"{self.violation_addr:#010x}",
            "leaked_pixels": self.leaked_pixels,
            "instret": self.instret,
            "output_image": self.output_image_path,
            "expected": self.expected_outcome,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def expected_outcome(cfg: ScenarioConfig, image: np.ndarray) -> str:
    if cfg.attack is None:
        return EXPECTED_CLEAN
    rows, cols = image.shape
    exposed = cfg.sensitive_region.mask(rows, cols) & ~cfg.attack.mask(rows, cols)
    if cfg.protected:
        return EXPECTED_BLOCKED if exposed.any() else EXPECTED_CLEAN
    reference = blur_kernel(image, cfg.legit_patch)
    leak = count_leaked_pixels(image, blur_kernel(image, cfg.attack), cfg.sensitive_region, reference)
    return EXPECTED_SUCCEEDED if leak else EXPECTED_CLEAN


def run_scenario(cfg: ScenarioConfig, out_path: str | os.PathLike | None = None,
                 report_path: str | os.PathLike | None = None,
                 max_steps: int = STEP_BUDGET, program: AsmProgram | None = None) -> ScenarioReport:
    soc = build_soc(cfg, program)
    image = soc.image
    rows, cols = image.shape
    if cfg.attack is not None:
        try:
            cfg.attack.validate(rows, cols)
        except InvalidPatch as e:
            raise ValueError(f"attack parameters: {e}") from None
        inject_attack(soc, cfg.attack)
    outcome = run(soc.cpu, soc.mem, soc.policy, max_steps)
    ev = outcome.event

    site, addr = "none", None
    if isinstance(ev, DiftViolation):
        site, addr = "cpu-sink", ev.store_addr
    elif soc.accel is not None and soc.accel.last_violation is not None:
        site, addr = "shell", soc.accel.last_violation.addr
    violation = site != "none"

    emitted, mask = soc.sink.image(rows, cols)
    reference = blur_kernel(image, cfg.legit_patch)
    leaked = count_leaked_pixels(image, emitted, cfg.sensitive_region, reference, mask)
    expected = expected_outcome(cfg, image)

    if expected == EXPECTED_BLOCKED:
        passed = violation and leaked == 0
    else:
        applied = cfg.attack or cfg.legit_patch
        completed = isinstance(ev, Halted) and ev.exit_code == 0 and bool(mask.all())
        passed = (not violation and completed and np.array_equal(emitted, blur_kernel(image, applied))
                  and (leaked > 0) == (expected == EXPECTED_SUCCEEDED))

    if out_path is not None:
        save_pgm(emitted, out_path)
    report = ScenarioReport(cfg.id, violation, site, addr, leaked, outcome.instret,
                            None if out_path is None else str(out_path), expected, bool(passed),
                            output=emitted, outcome=outcome)
    if report_path is not None:
        Path(report_path).write_text(report.to_json())
    return report

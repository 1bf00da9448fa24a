"""Instruction-level model of a DIFT-protected SoC with a blur accelerator."""

from .accel import BlurAccelerator, PatchParams, blur_kernel
from .asm import AsmError, AsmProgram, assemble, disassemble, encode
from .core import CpuState, PolicyConfig, propagate_tag, run, step
from .harness import (ScenarioConfig, ScenarioReport, build_soc, count_leaked_pixels, inject_attack,
                      load_pgm, run_scenario, save_pgm)
from .isa import Instruction, decode
from .memory import MemoryMap, Region, tag_overhead_ratio
from .shell import DiftShell, ShellConfig, out_tag

__version__ = "0.1.0"

"""``demo`` command: run scenarios and assemble programs."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .accel import PatchParams
from .asm import AsmError, assemble
from .harness import ScenarioConfig, load_pgm, run_scenario


def _patch(text: str) -> PatchParams:
    try:
        return PatchParams.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _summary(rep) -> str:
    where = f" at {rep.violation_site} {rep.to_dict()['violation_addr']}" if rep.violation else ""
    return (f"scenario {rep.scenario}: violation={rep.violation}{where} leaked={rep.leaked_pixels} "
            f"instret={rep.instret} expected={rep.expected_outcome} "
            f"{'PASS' if rep.passed else 'FAIL'}")


def _run_one(args: tuple) -> object:
    cfg, out, report = args
    return run_scenario(cfg, out, report)


def cmd_run(ns: argparse.Namespace) -> int:
    cfg = ScenarioConfig.preset(ns.scenario, ns.image, ns.sensitive, ns.attack)
    rep = run_scenario(cfg, ns.out, ns.report)
    print(_summary(rep))
    return 0 if rep.passed else 1


def cmd_scenarios(ns: argparse.Namespace) -> int:
    image = load_pgm(ns.image)
    rows, cols = image.shape
    sensitive = ns.sensitive or PatchParams(rows // 4, 3 * rows // 4, cols // 4, 3 * cols // 4)
    ids = [1, 2, 3, 4] + ([5] if ns.extension else []) if ns.all else ns.scenario
    if not ids:
        print("nothing to run: pass --all or --scenario N", file=sys.stderr)
        return 2
    outdir = Path(ns.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [(ScenarioConfig.preset(i, ns.image, sensitive, ns.attack),
             outdir / f"scenario{i}.pgm", outdir / f"scenario{i}.json") for i in ids]
    with ProcessPoolExecutor(max_workers=min(len(jobs), ns.jobs)) as pool:
        reports = list(pool.map(_run_one, jobs))
    for rep in reports:
        print(_summary(rep))
    return 0 if all(r.passed for r in reports) else 1


def cmd_asm(ns: argparse.Namespace) -> int:
    try:
        prog = assemble(Path(ns.source).read_text())
    except AsmError as e:
        print(f"{ns.source}:{e.line}:{e.column}: {e.kind}: {e.message}", file=sys.stderr)
        return 1
    Path(ns.output).write_bytes(prog.to_bytes())
    print(f"{ns.output}: {len(prog.words)} words at {prog.origin:#x}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--scenario", type=int, choices=[1, 2, 3, 4, 5], required=True)
    r.add_argument("--image", required=True, help="binary PGM input")
    r.add_argument("--sensitive", type=_patch, required=True, metavar="r0,r1,c0,c1")
    r.add_argument("--attack", type=_patch, metavar="r0,r1,c0,c1",
                   help="corrupted patch (scenarios 3-5 default to shrinking the columns)")
    r.add_argument("--out", required=True, help="output PGM")
    r.add_argument("--report", required=True, help="output JSON report")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("scenarios", help="run several scenarios as independent simulations")
    s.add_argument("--all", action="store_true", help="scenarios 1-4")
    s.add_argument("--extension", action="store_true", help="with --all, also run scenario 5")
    s.add_argument("--scenario", type=int, action="append", choices=[1, 2, 3, 4, 5], default=[])
    s.add_argument("--image", required=True)
    s.add_argument("--sensitive", type=_patch, metavar="r0,r1,c0,c1",
                   help="default: the central half of the image")
    s.add_argument("--attack", type=_patch, metavar="r0,r1,c0,c1")
    s.add_argument("--outdir", default=".")
    s.add_argument("--jobs", type=int, default=4)
    s.set_defaults(func=cmd_scenarios)

    a = sub.add_parser("asm", help="assemble to a raw little-endian word stream")
    a.add_argument("source")
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=cmd_asm)
    return p


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())

"""The end-to-end scenarios on a 64x64 checkerboard."""
from __future__ import annotations

from dift_soc import PatchParams, ScenarioConfig, run_scenario
from dift_soc.harness import checkerboard

img = checkerboard(64, 64)
sensitive = PatchParams(16, 48, 16, 48)
attack = PatchParams(16, 48, 16, 20)

names = {1: "software blur", 2: "accelerator", 3: "accelerator + attack",
         4: "shelled accelerator + attack", 5: "software + attack"}

for sid in range(1, 6):
    rep = run_scenario(ScenarioConfig.preset(sid, img, sensitive, attack if sid >= 3 else None))
    site = f"{rep.violation_site} @ {rep.violation_addr:#010x}" if rep.violation else "-"
    print(f"{sid} {names[sid]:<30} instret={rep.instret:>7}  leaked={rep.leaked_pixels:>4}  "
          f"violation={site:<24} expected={rep.expected_outcome}  passed={rep.passed}")

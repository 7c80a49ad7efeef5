"""Acceptance criteria 1-13, run from the shipped presets at their stated tolerances."""
import pytest

from asclt_lab.cli import load_config, preset_dir
from asclt_lab.experiments import execute

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

CRITERIA = {n: sorted(p.stem for p in preset_dir().glob(f"c{n:02d}*.yaml")) for n in range(1, 14)}


def _summary(res) -> str:
    return ", ".join(f"{c['metric']}={c['value']:.4g}" for c in res.checks if c["value"] is not None)


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(criterion, capsys):
    names = CRITERIA[criterion]
    assert names, f"no preset for criterion {criterion}"
    parts, ok = [], True
    for name in names:
        res = execute(load_config(preset_dir() / f"{name}.yaml"), 1)
        parts.append(f"{name}: {'PASS' if res.passed else 'FAIL'} ({_summary(res)}; {res.runtime:.1f}s)")
        ok &= res.passed
    with capsys.disabled():
        print(f"\ncriterion {criterion:2d} {'PASS' if ok else 'FAIL'}  " + " | ".join(parts), flush=True)
    assert ok, "; ".join(parts)

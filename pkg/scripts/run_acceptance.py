"""Run every shipped preset and print one PASS/FAIL line per acceptance criterion."""
import argparse
import re
import sys
from collections import defaultdict
from pathlib import Path

from asclt_lab.cli import load_config, preset_dir, resolve_threads, write_bundle
from asclt_lab.experiments import execute


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/acceptance")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    args = ap.parse_args()
    threads = resolve_threads(args.threads)
    groups = defaultdict(list)
    for p in sorted(preset_dir().glob("c*.yaml")):
        groups[int(re.match(r"c(\d+)", p.stem).group(1))].append(p)
    failed = 0
    for n in sorted(groups):
        if args.only and n not in args.only:
            continue
        ok, parts = True, []
        for p in groups[n]:
            cfg = load_config(p)
            res = execute(cfg, threads)
            write_bundle(Path(args.out), cfg, res)
            vals = ", ".join(f"{c['metric']}={c['value']:.4g}" for c in res.checks if c["value"] is not None)
            parts.append(f"{cfg.name} {'PASS' if res.passed else 'FAIL'} ({vals}; {res.runtime:.1f}s)")
            ok &= res.passed
        failed += not ok
        print(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  " + " | ".join(parts), flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

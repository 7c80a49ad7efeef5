"""asclt-lab: run experiment configs, collect reports, list presets."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .experiments import ConfigError, ExperimentConfig, Result, execute, resolve

THREADS_ENV = "ASCLT_LAB_THREADS"
HASH_PREFIX = "# config_hash="
REPORT_HEADER = ["name", "kind", "law", "statistic", "value", "tolerance", "status", "runtime_s", "seed", "config_hash"]


class MissingBundle(FileNotFoundError):
    pass


class HashMismatch(RuntimeError):
    pass


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return resolve(raw)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_table(path: Path, header: list[str], rows: np.ndarray, config_hash: str) -> None:
    buf = io.StringIO()
    buf.write(f"{HASH_PREFIX}{config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in np.atleast_2d(rows):
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def write_bundle(out: Path, cfg: ExperimentConfig, res: Result) -> Path:
    bundle = out / cfg.name
    bundle.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    for name, (header, rows) in res.tables.items():
        write_table(bundle / f"{name}.csv", header, rows, h)
    record = {
        "config": cfg.to_dict(),
        "config_hash": h,
        "kind": cfg.kind,
        "law": res.law,
        "statistic": res.statistic,
        "metrics": {k: _jsonable(v) for k, v in res.metrics.items()},
        "checks": [{k: _jsonable(v) for k, v in c.items()} for c in res.checks],
        "pass": res.passed,
        "runtime_s": round(res.runtime, 3),
        "seed": cfg.seed,
        "tables": sorted(f"{n}.csv" for n in res.tables),
    }
    (bundle / "result.json").write_text(json.dumps(record, indent=2, sort_keys=True, default=float) + "\n")
    return bundle


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"not an integer: {env!r}") from None
    return 1


def config_paths(target: Path) -> list[Path]:
    if target.is_dir():
        return sorted(p for p in target.iterdir() if p.suffix in (".yaml", ".yml"))
    if not target.exists():
        raise FileNotFoundError(target)
    return [target]


def cmd_run(args) -> int:
    threads = resolve_threads(args.threads)
    out = Path(args.out)
    ok = True
    for path in config_paths(Path(args.config)):
        try:
            cfg = load_config(path)
        except ConfigError as e:
            print(f"{path}: config error at {e}", file=sys.stderr)
            return 2
        res = execute(cfg, threads)
        bundle = write_bundle(out, cfg, res)
        status = "PASS" if res.passed else "FAIL"
        detail = ", ".join(f"{c['metric']}={c['value']:.4g}" for c in res.checks if c["value"] is not None)
        print(f"{status}  {cfg.name}  ({detail})  {res.runtime:.1f}s  -> {bundle}", flush=True)
        ok &= res.passed
    return 0 if ok else 1


def _check_hashes(bundle: Path, record: dict) -> None:
    for name in record.get("tables", []):
        path = bundle / name
        if not path.exists():
            raise MissingBundle(f"{path} listed in result.json but missing")
        first = path.open().readline().strip()
        if first != f"{HASH_PREFIX}{record['config_hash']}":
            raise HashMismatch(f"{path} was written by a different config ({first!r})")


def collect(paths: list[Path]) -> list[dict]:
    rows = []
    for root in paths:
        if not root.exists():
            raise MissingBundle(f"{root} does not exist")
        found = sorted(root.rglob("result.json")) if root.is_dir() else [root]
        for res_path in found:
            record = json.loads(res_path.read_text())
            _check_hashes(res_path.parent, record)
            checks = record.get("checks", [])
            tol = "; ".join(
                f"{c['metric']}" + (f"<={c['max']:g}" if "max" in c else "") + (f">={c['min']:g}" if "min" in c else "")
                for c in checks)
            val = "; ".join(f"{c['metric']}={c['value']:.6g}" if c["value"] is not None else f"{c['metric']}=NA"
                            for c in checks)
            rows.append({"name": record["config"]["name"], "kind": record["kind"], "law": record["law"],
                         "statistic": record["statistic"], "value": val, "tolerance": tol,
                         "status": "PASS" if record["pass"] else "FAIL", "runtime_s": record["runtime_s"],
                         "seed": record["seed"], "config_hash": record["config_hash"]})
    return rows


def cmd_report(args) -> int:
    paths = [Path(p) for p in args.dirs]
    try:
        rows = collect(paths)
    except (MissingBundle, HashMismatch) as e:
        print(f"report: {e}", file=sys.stderr)
        return 2
    buf = io.StringIO()
    w = csv.DictWriter(buf, REPORT_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    text = buf.getvalue()
    if args.csv:
        Path(args.csv).write_text(text)
    widths = {h: max([len(h)] + [len(str(r[h])) for r in rows]) for h in ("status", "name", "kind", "runtime_s")}
    print("  ".join(h.ljust(widths[h]) for h in widths) + "  value / tolerance")
    for r in rows:
        print("  ".join(str(r[h]).ljust(widths[h]) for h in widths) + f"  {r['value']}  [{r['tolerance']}]")
    return 1 if any(r["status"] == "FAIL" for r in rows) else 0


def preset_dir() -> Path:
    return Path(str(resources.files("asclt_lab") / "presets"))


def cmd_presets(args) -> int:
    d = preset_dir()
    if args.copy:
        dest = Path(args.copy)
        dest.mkdir(parents=True, exist_ok=True)
        for p in sorted(d.glob("*.yaml")):
            (dest / p.name).write_text(p.read_text())
    print(f"# {d}")
    for p in sorted(d.glob("*.yaml")):
        raw = yaml.safe_load(p.read_text())
        print(f"{p.stem:28s} {raw.get('kind', '?'):18s} {raw.get('name', '')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asclt-lab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or every config in a directory")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=None, help=f"worker threads (env {THREADS_ENV})")
    r.add_argument("--out", default="results")
    r.set_defaults(func=cmd_run)
    rp = sub.add_parser("report", help="summarize result bundles")
    rp.add_argument("dirs", nargs="*", default=["results"])
    rp.add_argument("--csv", default=None, help="also write the table here")
    rp.set_defaults(func=cmd_report)
    p = sub.add_parser("presets", help="list shipped presets")
    p.add_argument("--copy", default=None, help="copy presets into this directory")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Run every problem in ``specs/`` plus the spy, bench and transform commands.

Usage: ``python demos/run_demos.py [OUTDIR]`` (default ``demos/output``).
Each run writes its files under ``OUTDIR/<name>``; a one-line summary is
printed per run.
"""

import json
import sys
from pathlib import Path

from trispectral import cli

HERE = Path(__file__).resolve().parent


def summarize(out: Path) -> str:
    m = json.loads((out / "manifest.json").read_text())
    parts = [m["status"], f"{sum(t for t in m['timings'].values() if isinstance(t, float)):.2f} s"]
    tau = out / "tau.json"
    if tau.exists():
        parts.append(f"max|tau| {max(map(abs, json.loads(tau.read_text()))):.1e}")
    return ", ".join(parts)


def main(outdir: Path) -> int:
    failed = 0
    runs = [(p.stem, ["solve", "--spec", p]) for p in sorted((HERE / "specs").glob("*.json"))]
    runs += [
        ("spy_strong", ["spy", "--operator", "laplacian_strong", "--degree", 20]),
        ("spy_helmholtz", ["spy", "--operator", "helmholtz_weighted:v=xy2", "--degree", 20]),
        ("bench_laplace", ["bench", "--degrees", "40,80,160,320", "--repeat", 3]),
        ("transform_exp_cos", ["transform", "--function", "exp-cos", "--degree", 20]),
    ]
    for name, argv in runs:
        out = outdir / name
        code = cli.main([str(a) for a in argv] + ["--out", str(out), "--quiet"])
        failed += code != 0
        print(f"{name:24s} exit {code}  {summarize(out)}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE / "output"))

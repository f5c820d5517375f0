"""Run the benchmark convergence studies and write their tables.

Produces the error/rate tables for the degree k = 2 and k = 3 studies on
the uniform cube and tetrahedral partitions of the unit cube, in csv and
plain formats.  Levels are chosen so the whole script finishes on a
single desktop core; pass --quick to stop one level earlier.

Usage: python scripts/reproduce_tables.py [--quick] [--outdir DIR]
"""

import argparse
import pathlib
import sys
import time

from wgcurl.driver import StudyConfig, render_table, run_study

STUDIES = [
    ("hex_k2", dict(k=2, family="hex", levels=(1, 2, 3, 4))),
    ("hex_k3", dict(k=3, family="hex", levels=(1, 2, 3, 4))),
    ("tet_k2", dict(k=2, family="tet", levels=(1, 2, 3, 4))),
    ("tet_k3", dict(k=3, family="tet", levels=(1, 2, 3))),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true",
                    help="drop the finest level of each study")
    ap.add_argument("--outdir", default="tables")
    args = ap.parse_args(argv)

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, kw in STUDIES:
        levels = kw["levels"][:-1] if args.quick else kw["levels"]
        cfg = StudyConfig(levels=levels, **{k: v for k, v in kw.items()
                                            if k != "levels"})
        t0 = time.perf_counter()
        report = run_study(cfg)
        dt = time.perf_counter() - t0
        (outdir / f"{name}.csv").write_text(render_table(report, fmt="csv"))
        text = render_table(report, fmt="plain")
        (outdir / f"{name}.txt").write_text(text)
        print(f"[{dt:7.1f}s] {name}")
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())

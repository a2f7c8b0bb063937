"""Train the desk-grid preset (grids with sides 2..4) over several seeds.

Prints test-set F1 and size accuracy per seed and their mean and spread.

    python scripts/grid_small.py --seeds 3 --out runs/grid-small
"""

import argparse
from pathlib import Path

from regae.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out", default="runs/grid-small")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()
    argv = ["train", "--preset", "desk-grid", "--seeds", str(args.seeds), "--out", str(Path(args.out))]
    for item in args.set:
        argv += ["--set", item]
    raise SystemExit(cli_main(argv))


if __name__ == "__main__":
    main()

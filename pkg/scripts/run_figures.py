"""Regenerate the smile data files for every checked-in figure config.

Writes one CSV per config into out/ (created next to the repo root).  Each
file has the columns K,T,method,sigma_N,flag.
"""

import pathlib
import sys

from nvol.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "out"


def run() -> int:
    OUT.mkdir(exist_ok=True)
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("fig*.ini")):
        dest = OUT / (cfg.stem + ".csv")
        print(f"{cfg.name} -> {dest}")
        rc = main(["smile", "--config", str(cfg), "--out", str(dest)])
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(run())

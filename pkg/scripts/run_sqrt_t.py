"""Small-time power-law classification of the ATM vol deviation.

Runs the fit for the symmetric kink model (anomalous, exponent 1/2) and the
shifted log-normal control (analytic, exponent near 1) and prints both
reports as JSON.
"""

import pathlib
import sys

from nvol.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent


def run() -> int:
    worst = 0
    for name in ("sqrtt_model2b.ini", "sqrtt_control_shifted_ln.ini"):
        print(f"--- {name} ---")
        rc = main(["sqrt-t", "--config", str(ROOT / "configs" / name)])
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(run())

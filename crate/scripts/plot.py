"""Plot the CSV output of `wealth-exchange run` / `sweep`.

    python scripts/plot.py run OUTDIR      # P(w) and Q(w)
    python scripts/plot.py sweep OUTDIR    # w_m(f) and slope(f)

Writes a PNG next to the CSV files.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_run(out: Path) -> Path:
    pw = pd.read_csv(out / "pw.csv")
    qw = pd.read_csv(out / "qw.csv")
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
    a.plot(pw.w_bin_center, pw.density)
    a.set_xlabel("w")
    a.set_ylabel("P(w)")
    q = qw[qw.Q > 0]
    b.semilogy(q.w, q.Q)
    b.set_xlabel("w")
    b.set_ylabel("Q(w)")
    target = out / "run.png"
    fig.tight_layout()
    fig.savefig(target, dpi=120)
    return target


def plot_sweep(out: Path) -> Path:
    s = pd.read_csv(out / "sweep.csv")
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
    a.plot(s.f, s.w_m, "o-")
    a.set_xlabel("f")
    a.set_ylabel("modal wealth")
    b.plot(s.f, s.lognormal_slope, "o-")
    b.set_xlabel("f")
    b.set_ylabel("lognormal slope of Q")
    target = out / "sweep.png"
    fig.tight_layout()
    fig.savefig(target, dpi=120)
    return target


if __name__ == "__main__":
    if len(sys.argv) != 3 or sys.argv[1] not in ("run", "sweep"):
        sys.exit(__doc__)
    out = Path(sys.argv[2])
    print((plot_run if sys.argv[1] == "run" else plot_sweep)(out))

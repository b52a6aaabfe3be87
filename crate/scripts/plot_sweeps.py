"""Plot sweep CSVs written by `secalloc sweep-gamma` / `secalloc sweep-tau`.

usage: python scripts/plot_sweeps.py OUT_DIR
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot(csv: Path, axis: str) -> None:
    df = pd.read_csv(csv)
    targets = [c for c in df.columns if c.startswith("target_")]
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    for c in targets:
        left.plot(df["param"], df[c], marker="o", ms=3, label=c)
    left.set_xlabel(axis)
    left.set_ylabel("resources received")
    left.legend()
    right.plot(df["param"], df["true_loss"], marker="o", ms=3, label="true loss")
    right.plot(df["param"], df["perceived_loss"], marker="s", ms=3, label="perceived loss")
    right.set_xlabel(axis)
    right.legend()
    fig.tight_layout()
    out = csv.with_suffix(".png")
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


def main() -> None:
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    for name, axis in [("sweep_gamma.csv", "gamma"), ("sweep_tau.csv", "tau")]:
        if (out_dir / name).exists():
            plot(out_dir / name, axis)


if __name__ == "__main__":
    main()

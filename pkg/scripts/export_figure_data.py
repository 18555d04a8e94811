"""Write CSV series for plotting activation curves, derivatives and the approximation error.

Produces one file per (activation, sigma) with columns x, f, df, gate, plus
``approx_error.csv`` holding Z - Z_approx for several sigmas.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from iglu import gates
from iglu.activations import ActivationSpec, backward_x, forward, gate

CURVES = [("iglu", s) for s in (0.1, 0.5, 1.0, 2.0, 5.0)] + [("iglu_approx", 1.0)] + \
         [("relu", None), ("gelu_exact", None), ("gelu_tanh", None), ("silu", None), ("mish", None)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lo", type=float, default=-5.0)
    ap.add_argument("--hi", type=float, default=5.0)
    ap.add_argument("--steps", type=int, default=1001)
    ap.add_argument("--out", default="results/figures")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x = np.linspace(args.lo, args.hi, args.steps)

    for name, sigma in CURVES:
        spec = ActivationSpec.from_name(name, sigma=sigma if sigma is not None else 1.0)
        cols = [x, forward(spec, x, np.float64), backward_x(spec, x, np.float64), gate(spec, x)]
        tag = name if sigma is None else f"{name}_sigma{sigma:g}"
        with (out / f"{tag}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f", "df", "gate"])
            w.writerows(np.column_stack(cols).tolist())

    wide = np.linspace(-20, 20, 4001)
    sigmas = (0.5, 1.0, 2.0)
    with (out / "approx_error.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"sigma={s:g}" for s in sigmas])
        errs = [gates.iglu_gate(wide, s) - gates.iglu_gate_approx(wide, s) for s in sigmas]
        w.writerows(np.column_stack([wide, *errs]).tolist())
    print(f"wrote {len(CURVES) + 1} files to {out}")


if __name__ == "__main__":
    main()

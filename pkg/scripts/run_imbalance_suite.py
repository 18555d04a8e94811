"""Train the activation grid over several imbalance ratios and write a CSV table.

    python3 scripts/run_imbalance_suite.py --ratios 10,20,50,100 --out results/suite.csv
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from iglu.activations import ActivationSpec, Kind
from iglu.trainer import SuiteBase, run_imbalance_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ratios", default="10,20,50,100")
    ap.add_argument("--sigmas", default="0.5,1.0", help="IGLU / IGLU-Approx sigmas to include")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--out", default="results/imbalance_suite.csv")
    args = ap.parse_args()

    specs = []
    for s in (float(v) for v in args.sigmas.split(",")):
        specs.append(ActivationSpec.from_name("iglu", sigma=s))
        specs.append(ActivationSpec.from_name("iglu_approx", sigma=s))
    specs += [ActivationSpec(Kind.RELU), ActivationSpec(Kind.GELU_TANH), ActivationSpec(Kind.SILU)]

    base = SuiteBase()
    base = replace(base, train=replace(base.train, epochs=args.epochs))
    result = run_imbalance_suite([float(r) for r in args.ratios.split(",")], specs, base)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.to_csv())
    out.with_suffix(".json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    print(result.to_csv())
    print("IGLU rows beating ReLU on balanced accuracy:", json.dumps(result.observations(), indent=2))


if __name__ == "__main__":
    main()

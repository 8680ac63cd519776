"""Write a synthetic 52-covariate drug-pair cohort plus estimate/diagnose configs.

    python scripts/make_synthetic_cohort.py demo/ --n 5000
    mrddi estimate --config demo/estimate.yaml
    mrddi diagnose --config demo/estimate.yaml
"""

import argparse
from pathlib import Path

import yaml

from mrddi.cohort import NESTED_MODELS, write_cohort_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("directory")
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--R", type=int, default=200)
    args = ap.parse_args()
    root = Path(args.directory)
    root.mkdir(parents=True, exist_ok=True)
    write_cohort_csv(root / "cohort.csv", args.n, args.seed)
    cfg = {
        "dataset_path": "cohort.csv",
        "outcome": "Y",
        "treat_a": "A",
        "treat_b": "B",
        "model_formulas": dict(NESTED_MODELS),
        "method": ["iptw", "el", "melcb"],
        "iptw_model_label": "PS1",
        "balance_covariates": ["age", "ckd"],
        "link": "identity",
        "bootstrap_R": args.R,
        "seed": args.seed,
        "output_dir": str(root / "out"),
    }
    (root / "estimate.yaml").write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
    print(f"wrote {root / 'cohort.csv'} and {root / 'estimate.yaml'}")


if __name__ == "__main__":
    main()

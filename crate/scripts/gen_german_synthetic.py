"""Writes data/german.csv: 1000 synthetic rows on the German credit feature layout.

Seven continuous and thirteen categorical features; the label is drawn from a
logistic score over a handful of features so that roughly 70% of rows are
"good". Deterministic for a fixed seed.
"""
import csv
import sys

import numpy as np

SEED = 20240917
N = 1000

CATS = {
    "checking-status": ["lt-0", "0-to-200", "ge-200", "no-checking"],
    "credit-history": ["no-credits", "all-paid", "existing-paid", "delayed-previously", "critical"],
    "purpose": ["new-car", "used-car", "furniture", "radio-tv", "domestic-appliance",
                "repairs", "education", "retraining", "business", "other"],
    "savings-status": ["lt-100", "100-to-500", "500-to-1000", "ge-1000", "no-known-savings"],
    "employment": ["unemployed", "lt-1", "1-to-4", "4-to-7", "ge-7"],
    "personal-status": ["male-div-sep", "female-div-dep-mar", "male-single", "male-mar-wid"],
    "other-parties": ["none", "co-applicant", "guarantor"],
    "property-magnitude": ["real-estate", "life-insurance", "car", "no-known-property"],
    "other-payment-plans": ["bank", "stores", "none"],
    "housing": ["rent", "own", "for-free"],
    "job": ["unemp-unskilled-non-res", "unskilled-resident", "skilled", "high-qualif-self-emp-mgmt"],
    "own-telephone": ["none", "yes"],
    "foreign-worker": ["yes", "no"],
}
PROBS = {
    "checking-status": [0.27, 0.27, 0.06, 0.40],
    "credit-history": [0.04, 0.05, 0.53, 0.09, 0.29],
    "purpose": [0.23, 0.10, 0.18, 0.28, 0.01, 0.02, 0.05, 0.01, 0.10, 0.02],
    "savings-status": [0.60, 0.10, 0.06, 0.05, 0.19],
    "employment": [0.06, 0.17, 0.34, 0.17, 0.26],
    "personal-status": [0.05, 0.31, 0.55, 0.09],
    "other-parties": [0.91, 0.04, 0.05],
    "property-magnitude": [0.28, 0.23, 0.33, 0.16],
    "other-payment-plans": [0.14, 0.05, 0.81],
    "housing": [0.18, 0.71, 0.11],
    "job": [0.02, 0.20, 0.63, 0.15],
    "own-telephone": [0.60, 0.40],
    "foreign-worker": [0.96, 0.04],
}
ORDER = [
    "checking-status", "duration", "credit-history", "purpose", "credit-amount",
    "savings-status", "employment", "installment-rate", "personal-status",
    "other-parties", "residence-since", "property-magnitude", "age",
    "other-payment-plans", "housing", "existing-credits", "job",
    "num-dependents", "own-telephone", "foreign-worker",
]


def main(out_path):
    rng = np.random.default_rng(SEED)
    cols = {}
    for name, cats in CATS.items():
        idx = rng.choice(len(cats), size=N, p=PROBS[name])
        cols[name] = np.array(cats, dtype=object)[idx]
    cols["duration"] = np.clip(np.round(rng.gamma(3.0, 7.0, N)), 4, 72)
    amount = np.exp(rng.normal(7.8, 0.75, N)) + 40.0 * cols["duration"]
    cols["credit-amount"] = np.clip(np.round(amount), 250, 18424)
    cols["installment-rate"] = rng.choice([1, 2, 3, 4], size=N, p=[0.14, 0.23, 0.16, 0.47]).astype(float)
    cols["residence-since"] = rng.choice([1, 2, 3, 4], size=N, p=[0.13, 0.31, 0.15, 0.41]).astype(float)
    cols["age"] = np.clip(np.round(19 + rng.gamma(2.2, 7.5, N)), 19, 75)
    cols["existing-credits"] = rng.choice([1, 2, 3, 4], size=N, p=[0.63, 0.33, 0.03, 0.01]).astype(float)
    cols["num-dependents"] = rng.choice([1, 2], size=N, p=[0.85, 0.15]).astype(float)

    chk = cols["checking-status"]
    hist = cols["credit-history"]
    sav = cols["savings-status"]
    emp = cols["employment"]
    score = (
        0.35
        + 1.8 * (chk == "no-checking") + 0.9 * (chk == "ge-200") - 1.1 * (chk == "lt-0")
        - 0.055 * (cols["duration"] - 20.0)
        - 0.00012 * (cols["credit-amount"] - 3000.0)
        + 0.8 * (hist == "critical") - 1.2 * np.isin(hist, ["no-credits", "all-paid"])
        + 0.7 * np.isin(sav, ["500-to-1000", "ge-1000", "no-known-savings"])
        + 0.5 * np.isin(emp, ["4-to-7", "ge-7"])
        + 0.025 * (cols["age"] - 35.0)
        - 0.25 * (cols["installment-rate"] - 2.5)
        + 0.5 * (cols["property-magnitude"] == "real-estate")
        - 0.6 * (cols["other-payment-plans"] == "bank")
    )
    prob = 1.0 / (1.0 + np.exp(-1.6 * score))
    label = np.where(rng.random(N) < prob, "good", "bad")

    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ORDER + ["class"])
        for i in range(N):
            row = []
            for name in ORDER:
                v = cols[name][i]
                row.append(v if isinstance(v, str) else f"{v:g}")
            row.append(label[i])
            w.writerow(row)
    print(f"good rate {np.mean(label == 'good'):.3f}", file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/german.csv")

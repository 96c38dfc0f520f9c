#!/usr/bin/env python3
"""Prepare the benchmark datasets under data/ in LIBSVM format.

Tries the LIBSVM dataset mirror first. When the network is unavailable,
falls back to locally available sources:

  breast-cancer  rebuilt from the MASS `biopsy` table (UCI Wisconsin
                 original, 699 rows minus 16 rows with missing values).
                 Feature 1 is the sample id, features 2..10 the nine
                 cytology scores, labels 2 (benign) / 4 (malignant); this
                 is the layout of the LIBSVM `breast-cancer` file.
  a1a            surrogate built from UCI Adult with Platt's 123-feature
                 binarization (quintile bins for age, fnlwgt, education-num,
                 hours-per-week; zero/nonzero for capital gain/loss; one-hot
                 for categoricals), 1605 rows sampled with a fixed seed.
  cod-rna        network only.

Usage:
  scripts/prepare_datasets.py [--biopsy biopsy.csv] [--adult adult.data] [--out data]
"""
import argparse
import csv
import os
import random
import sys
import urllib.request

LIBSVM_URL = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"

WORKCLASS = ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
             "State-gov", "Without-pay", "Never-worked"]
EDUCATION = ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
             "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th", "Doctorate",
             "5th-6th", "Preschool"]
MARITAL = ["Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
           "Married-spouse-absent", "Married-AF-spouse"]
OCCUPATION = ["Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
              "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
              "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
              "Armed-Forces"]
RELATIONSHIP = ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"]
RACE = ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"]
SEX = ["Female", "Male"]
COUNTRY = ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
           "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China", "Cuba",
           "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica", "Vietnam", "Mexico",
           "Portugal", "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador", "Taiwan",
           "Haiti", "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland", "Thailand",
           "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands"]


def try_download(name, out):
    try:
        with urllib.request.urlopen(LIBSVM_URL + name, timeout=20) as r:
            data = r.read()
    except Exception as e:  # noqa: BLE001
        print(f"{name}: download failed ({e})", file=sys.stderr)
        return False
    if name.endswith(".bz2"):
        import bz2
        data = bz2.decompress(data)
        name = name[:-4]
    with open(os.path.join(out, name), "wb") as f:
        f.write(data)
    print(f"{name}: downloaded")
    return True


def breast_cancer_from_biopsy(path, out):
    rows = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            vals = [rec["V%d" % i] for i in range(1, 10)]
            if "NA" in vals:
                continue
            label = 2 if rec["class"] == "benign" else 4
            feats = [int(rec["ID"])] + [int(v) for v in vals]
            rows.append((label, feats))
    with open(os.path.join(out, "breast-cancer"), "w") as f:
        for label, feats in rows:
            f.write(str(label) + "".join(f" {i}:{v}" for i, v in enumerate(feats, 1)) + "\n")
    print(f"breast-cancer: {len(rows)} rows from {path}")


def quantile_edges(values, bins):
    s = sorted(values)
    return [s[int(len(s) * q / bins)] for q in range(1, bins)]


def bin_of(v, edges):
    b = 0
    for e in edges:
        if v >= e:
            b += 1
    return b


def a1a_from_adult(path, out, n=1605, seed=1605):
    records = []
    with open(path) as f:
        for line in f:
            parts = [p.strip() for p in line.strip().split(",")]
            if len(parts) != 15:
                continue
            records.append(parts)
    cont = {c: [float(r[c]) for r in records] for c in (0, 2, 4, 12)}
    edges = {c: quantile_edges(v, 5) for c, v in cont.items()}
    blocks = [
        ("q", 0, 5), ("c", 1, WORKCLASS), ("q", 2, 5), ("c", 3, EDUCATION), ("q", 4, 5),
        ("c", 5, MARITAL), ("c", 6, OCCUPATION), ("c", 7, RELATIONSHIP), ("c", 8, RACE),
        ("c", 9, SEX), ("z", 10, 2), ("z", 11, 2), ("q", 12, 5), ("c", 13, COUNTRY),
    ]
    width = sum(b[2] if b[0] != "c" else len(b[2]) for b in blocks)
    assert width == 123, width
    rng = random.Random(seed)
    sample = rng.sample(records, n)
    with open(os.path.join(out, "a1a"), "w") as f:
        for r in sample:
            idx = []
            base = 1
            for kind, col, spec in blocks:
                if kind == "q":
                    idx.append(base + bin_of(float(r[col]), edges[col]))
                    base += spec
                elif kind == "z":
                    idx.append(base + (1 if float(r[col]) > 0 else 0))
                    base += spec
                else:
                    if r[col] in spec:
                        idx.append(base + spec.index(r[col]))
                    base += len(spec)
            label = "+1" if r[14].startswith(">50K") else "-1"
            f.write(label + "".join(f" {i}:1" for i in idx) + "\n")
    print(f"a1a: {n} surrogate rows from {path}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--biopsy")
    ap.add_argument("--adult")
    ap.add_argument("--out", default="data")
    ap.add_argument("--offline", action="store_true")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    online = not args.offline
    if not (online and try_download("breast-cancer", args.out)):
        if args.biopsy:
            breast_cancer_from_biopsy(args.biopsy, args.out)
    if not (online and try_download("a1a", args.out)):
        if args.adult:
            a1a_from_adult(args.adult, args.out)
    if online:
        try_download("cod-rna", args.out)


if __name__ == "__main__":
    main()

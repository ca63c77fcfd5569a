#!/usr/bin/env python3
"""Convert public benchmark files into the dense CSV layout read by `mlsvm`.

The raw files ship inside two PyPI wheels (`keel-ds`, `imbalanced-databases`).
Run `pip download --no-deps keel-ds imbalanced-databases -d <dir>` first, then

    python3 scripts/prepare_data.py <dir> data/

Outputs (label column `label`, +1 = minority/positive class, empty field = missing):
  twonorm.csv      7400 x 20
  letter26.csv     20000 x 16, letter Z against the rest
  hypothyroid.csv  3163 x 18, UCI hypothyroid with native missing values
"""
import csv
import glob
import os
import sys
import zipfile


def wheel_member(wheel_dir, pattern, suffix):
    for wheel in glob.glob(os.path.join(wheel_dir, pattern)):
        with zipfile.ZipFile(wheel) as z:
            for name in z.namelist():
                if name.endswith(suffix):
                    return z.read(name).decode("utf-8").splitlines()
    raise SystemExit(f"{suffix} not found in {wheel_dir}/{pattern}")


def keel_rows(lines):
    for line in lines:
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        yield [f.strip() for f in line.split(",")]


def write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}: {len(rows)} rows")


def twonorm(wheel_dir, out):
    rows = []
    for rec in keel_rows(wheel_member(wheel_dir, "keel_ds-*.whl", "raw/twonorm.dat")):
        label = "-1" if rec[-1] == "1" else "1"
        rows.append([label] + rec[:-1])
    write(os.path.join(out, "twonorm.csv"), ["label"] + [f"x{i+1}" for i in range(20)], rows)


def letter26(wheel_dir, out):
    rows = []
    for rec in keel_rows(wheel_member(wheel_dir, "keel_ds-*.whl", "raw/letter.dat")):
        label = "1" if rec[-1] == "Z" else "-1"
        rows.append([label] + rec[:-1])
    write(os.path.join(out, "letter26.csv"), ["label"] + [f"x{i+1}" for i in range(16)], rows)


def hypothyroid(wheel_dir, out):
    lines = wheel_member(wheel_dir, "imbalanced_databases-*.whl", "hypothyroid.data.txt")
    names = ["age", "sex", "on_thyroxine", "query_on_thyroxine", "on_antithyroid_medication",
             "thyroid_surgery", "query_hypothyroid", "query_hyperthyroid", "pregnant", "sick",
             "tumor", "lithium", "goitre", "TSH", "T3", "TT4", "T4U", "FTI"]
    rows = []
    for line in lines:
        rec = [f.strip() for f in line.strip().split(",")]
        if len(rec) != 26:
            continue
        label = "1" if rec[0] == "hypothyroid" else "-1"
        age = "" if rec[1] == "?" else rec[1]
        sex = {"M": "1", "F": "0"}.get(rec[2], "")
        flags = ["1" if v == "t" else "0" for v in rec[3:14]]
        # measured-flag / value pairs; TBG (almost always absent) is dropped
        labs = ["" if rec[i] == "?" else rec[i] for i in (15, 17, 19, 21, 23)]
        rows.append([label, age, sex] + flags + labs)
    write(os.path.join(out, "hypothyroid.csv"), ["label"] + names, rows)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    wheel_dir, out = sys.argv[1], sys.argv[2]
    os.makedirs(out, exist_ok=True)
    twonorm(wheel_dir, out)
    letter26(wheel_dir, out)
    hypothyroid(wheel_dir, out)

#!/usr/bin/env python3
"""Convert the KEEL copies of the Statlog Australian and WDBC datasets into
LIBSVM sparse text files under data/.

Usage: make_benchmark_data.py <keel_ds wheel> <output dir>

The wheel is available from PyPI (`pip download --no-deps keel-ds`).
australian: 690 rows, 14 features, label column last ({0,1} -> {-1,+1}).
breast_cancer: 569 rows, the ten "mean" WDBC features (first ten columns),
label M -> +1, B -> -1.
"""
import pathlib
import sys
import zipfile


def rows(wheel, name):
    text = zipfile.ZipFile(wheel).read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    return [l.strip().split(",") for l in text.splitlines() if l.strip() and not l.startswith("@")]


def write_libsvm(path, examples):
    with open(path, "w") as out:
        for label, feats in examples:
            cells = [f"{j + 1}:{v}" for j, v in enumerate(feats) if float(v) != 0.0]
            out.write(" ".join([label] + cells) + "\n")


def main():
    wheel, outdir = sys.argv[1], pathlib.Path(sys.argv[2])
    outdir.mkdir(parents=True, exist_ok=True)

    aus = [("+1" if r[-1] == "1" else "-1", r[:-1]) for r in rows(wheel, "australian")]
    assert len(aus) == 690 and all(len(f) == 14 for _, f in aus)
    write_libsvm(outdir / "australian.libsvm", aus)

    bc = [("+1" if r[-1] == "M" else "-1", r[:10]) for r in rows(wheel, "wdbc")]
    assert len(bc) == 569
    write_libsvm(outdir / "breast_cancer.libsvm", bc)


if __name__ == "__main__":
    main()

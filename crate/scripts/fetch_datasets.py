#!/usr/bin/env python3
"""Download the Balance Scale and Car Evaluation datasets into data/.

Tries the UCI repository first. If it is unreachable, falls back to the
copies bundled in the Orange 2.7.2 wheel on PyPI. Either way the rows are
normalized (UCI spellings, sorted) so the output bytes, and therefore the
checksums below, do not depend on which source answered.
"""

import argparse
import hashlib
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
ORANGE_WHEEL = (
    "https://files.pythonhosted.org/packages/5b/95/"
    "e70d7c79e0298fa45ec3c2ab166678d856854fddfb8f224419d008d2c6cd/"
    "Orange-2.7.2-cp27-none-win32.whl"
)

DATASETS = {
    "balance": {
        "uci": f"{UCI}/balance-scale/balance-scale.data",
        "orange": "Orange/datasets/balance-scale.tab",
        "header": ["left_weight", "left_distance", "right_weight", "right_distance", "class"],
        # UCI puts the class first
        "uci_order": [1, 2, 3, 4, 0],
        "orange_order": [1, 2, 3, 4, 0],
        "rows": 625,
        "sha256": "890a1daea942695a0bfeaa445963d936cb8feaeca337da9a833a95f65668f246",
    },
    "car": {
        "uci": f"{UCI}/car/car.data",
        "orange": "Orange/datasets/car.tab",
        "header": ["buying", "maint", "doors", "persons", "lug_boot", "safety", "class"],
        "uci_order": [0, 1, 2, 3, 4, 5, 6],
        "orange_order": [0, 1, 2, 3, 4, 5, 6],
        "rows": 1728,
        "sha256": "d54a949d18256756dd05cbdbb111fd1429b5ce96e3a266eeb05c952a7c68af51",
    },
}


def fetch(url, timeout=30):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def rows_from_uci(text, order):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            fields = line.split(",")
            rows.append([fields[i] for i in order])
    return rows


def rows_from_orange(text, order):
    rows = []
    # three header lines: names, types, flags
    for line in text.splitlines()[3:]:
        if line.strip():
            fields = [f.strip().replace("-", "") for f in line.split("\t")]
            rows.append([fields[i] for i in order])
    return rows


def load_rows(name, spec, wheel_cache):
    try:
        text = fetch(spec["uci"]).decode("utf-8")
        return rows_from_uci(text, spec["uci_order"]), "uci"
    except Exception as err:  # network policy varies; fall through to the mirror
        print(f"{name}: UCI unavailable ({err}), using the Orange wheel", file=sys.stderr)
    if "wheel" not in wheel_cache:
        wheel_cache["wheel"] = zipfile.ZipFile(io.BytesIO(fetch(ORANGE_WHEEL, timeout=120)))
    text = wheel_cache["wheel"].read(spec["orange"]).decode("utf-8")
    return rows_from_orange(text, spec["orange_order"]), "orange"


def render(header, rows):
    lines = [",".join(header)] + [",".join(r) for r in sorted(rows)]
    return ("\n".join(lines) + "\n").encode("utf-8")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data", type=Path)
    parser.add_argument("--no-verify", action="store_true", help="skip checksum verification")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    wheel_cache = {}
    ok = True
    for name, spec in DATASETS.items():
        rows, source = load_rows(name, spec, wheel_cache)
        if len(rows) != spec["rows"]:
            print(f"{name}: expected {spec['rows']} rows, got {len(rows)}", file=sys.stderr)
            ok = False
            continue
        data = render(spec["header"], rows)
        digest = hashlib.sha256(data).hexdigest()
        if not args.no_verify and digest != spec["sha256"]:
            print(f"{name}: checksum mismatch ({digest})", file=sys.stderr)
            ok = False
            continue
        path = args.out / f"{name}.csv"
        path.write_bytes(data)
        print(f"{name}: {len(rows)} rows from {source} -> {path}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Stub for obtaining the Swiss Jura geostatistics files.

The dataset is distributed by its author and is not redistributed here.
Download the prediction and validation tables (259 and 100 rows of spatial
coordinates plus heavy-metal concentrations, including the Ni and Cd
columns) from the author's site, then point the experiment config or the
GPBTL_JURA_TRAIN / GPBTL_JURA_HOLDOUT environment variables at them.

This script only verifies that files you already placed locally parse and
have the canonical row counts.
"""

import argparse
import sys


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train", help="path to the prediction (training) table")
    parser.add_argument("--holdout", help="path to the validation (hold-out) table")
    args = parser.parse_args()
    if not args.train or not args.holdout:
        print(__doc__)
        print("source: https://sites.google.com/site/goovaertspierre/ (see the book datasets)")
        return 0
    from gpbtl.jura import load_jura

    ds = load_jura(args.train, args.holdout)
    status = "canonical" if ds.is_canonical else "NON-CANONICAL"
    print(f"loaded counts {ds.counts} ({status})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

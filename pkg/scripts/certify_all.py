"""Run the oracle certificates on every config in configs/ and print a summary.

Usage: python3 scripts/certify_all.py [--horizon K]
Exits non-zero if any certificate fails.
"""
import argparse
import sys
from pathlib import Path

from minplus_filter import load_scenario
from minplus_filter.oracle import certify

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=int, default=3)
    args = parser.parse_args()

    failed = 0
    for path in sorted((ROOT / "configs").glob("*.json")):
        for c in certify(load_scenario(path), horizon=args.horizon):
            failed += not c.passed
            print(f"{path.stem:<26} {c.name:<24} {'PASS' if c.passed else 'FAIL'}  {c.max_error:.2e} (tol {c.tolerance:.0e})")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()

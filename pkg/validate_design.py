#!/usr/bin/env python3
"""
validate_design.py - Design CSV Validator

Checks that a CSV file can be fitted by ``python -m crossfit fit`` and
summarizes its observation pattern.

Usage:
    python validate_design.py <csv_file> [--intercept]
"""

import argparse

from crossfit.data import DesignValidator


def main():
    """Main CLI entry point."""
    parser = argparse.ArgumentParser(description="Validate a crossed-design CSV before fitting")
    parser.add_argument("csv_file", help="Design CSV with header row,col,y,x1,...,xp")
    parser.add_argument("--intercept", action="store_true", help="Validate as if an intercept column is added")
    args = parser.parse_args()

    result = DesignValidator(args.csv_file, intercept=args.intercept).validate()
    result.print_report()

    return 0 if result.is_valid() else 1


if __name__ == "__main__":
    exit(main())

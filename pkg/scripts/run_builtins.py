#!/usr/bin/env python3
"""Run the builtin catalog twice and compare the CSV outputs byte by byte."""

import filecmp
import sys
import tempfile
from pathlib import Path

from quaternion_riccati.cli import main


def run_into(out_dir: Path) -> int:
    return main(["run", "--all-builtins", "--out", str(out_dir)])


def compare(first: Path, second: Path) -> list:
    mismatches = []
    for path in sorted(first.rglob("*.csv")):
        other = second / path.relative_to(first)
        if not other.exists() or not filecmp.cmp(path, other, shallow=False):
            mismatches.append(path.relative_to(first))
    return mismatches


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        first, second = Path(tmp) / "first", Path(tmp) / "second"
        status = run_into(first)
        run_into(second)
        mismatches = compare(first, second)
        for path in mismatches:
            print(f"differs between runs: {path}")
        sys.exit(status or (1 if mismatches else 0))

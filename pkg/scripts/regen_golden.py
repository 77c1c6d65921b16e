#!/usr/bin/env python3
"""Rewrite (or with --check, compare) the golden pipeline reports in tests/golden.

Only regenerate after inspecting a diff by hand: the files pin the expected
suggestions for the naturopathy fixtures.
"""

import argparse
import sys
from pathlib import Path

from swotforge.pipeline import render_text, run_pipeline
from swotforge.registry import load_registry

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def expected(bundle) -> dict[Path, str]:
    out = {}
    for name in ("fever", "normal"):
        report = run_pipeline(bundle, (GOLDEN / f"{name}.senml.json").read_text(encoding="utf-8"))
        out[GOLDEN / f"{name}.report.json"] = report.to_json()
        if name == "fever":
            out[GOLDEN / "fever.report.txt"] = render_text(report)
    return out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--check", action="store_true", help="report stale files instead of writing")
    args = ap.parse_args()
    bundle = load_registry().materialize("naturopathy")
    stale = 0
    for path, text in expected(bundle).items():
        current = path.read_text(encoding="utf-8") if path.exists() else None
        if current == text:
            continue
        stale += 1
        if args.check:
            print(f"stale: {path.relative_to(GOLDEN.parent.parent)}")
        else:
            path.write_text(text, encoding="utf-8")
            print(f"wrote {path.relative_to(GOLDEN.parent.parent)}")
    return 1 if args.check and stale else 0


if __name__ == "__main__":
    sys.exit(main())

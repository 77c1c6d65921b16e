#!/usr/bin/env python3
"""Walk the naturopathy template through a few body temperatures.

    python scripts/naturopathy_demo.py 36.6 38.2 39.4
"""

import argparse
import json

from swotforge.pipeline import render_text, run_pipeline
from swotforge.registry import load_registry


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("temperatures", nargs="*", type=float, default=[36.6, 38.2, 39.4])
    ap.add_argument("--registry", help="registry directory (default: shipped)")
    args = ap.parse_args()

    bundle = load_registry(args.registry).materialize("naturopathy")
    for celsius in args.temperatures:
        pack = json.dumps([{"bn": "demo/", "n": "bodyTemperature", "u": "Cel", "v": celsius}])
        print(f"== {celsius} Cel")
        print(render_text(run_pipeline(bundle, pack)))


if __name__ == "__main__":
    main()

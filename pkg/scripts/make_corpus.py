"""Generate a synthetic JUnit corpus for scale and timing runs.

    python3 scripts/make_corpus.py corpus/ --classes 90 --seed 0
"""

from __future__ import annotations

import argparse
from pathlib import Path

from testrefine.synth import write_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--classes", type=int, default=90)
    ap.add_argument("--tests-per-class", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    paths = write_corpus(args.out, args.classes, args.seed, args.tests_per_class)
    print(f"wrote {len(paths)} classes ({len(paths) * args.tests_per_class} tests) to {args.out}")


if __name__ == "__main__":
    main()

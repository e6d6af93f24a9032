"""Time purification and the offline pipeline on synthetic tests.

    python3 scripts/bench_purify.py --tests 1000 --classes 90
"""

from __future__ import annotations

import argparse
import gc
import statistics
import tempfile
import time
from pathlib import Path

from testrefine.java_ast import extract_test_methods, parse_source
from testrefine.pipeline import RunConfig, run_pipeline
from testrefine.purify import purify
from testrefine.synth import random_test, write_corpus


def bench_purify(n: int) -> list[float]:
    methods = [extract_test_methods(parse_source(random_test(s).source))[0] for s in range(n)]
    times = []
    gc.collect()
    gc.disable()
    try:
        for m in methods:
            start = time.perf_counter()
            purify(m)
            times.append((time.perf_counter() - start) * 1000)
    finally:
        gc.enable()
    return times


def bench_pipeline(n_classes: int, workers: int) -> tuple[int, float]:
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "src"
        write_corpus(src, n_classes)
        start = time.perf_counter()
        report = run_pipeline(RunConfig(inputs=[src], out_dir=Path(tmp) / "out", offline=True, workers=workers))
        return len(report["records"]), time.perf_counter() - start


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tests", type=int, default=1000)
    ap.add_argument("--classes", type=int, default=90)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    times = bench_purify(args.tests)
    print(f"purify: n={len(times)} mean={statistics.mean(times):.3f} ms "
          f"median={statistics.median(times):.3f} ms max={max(times):.3f} ms")
    n, elapsed = bench_pipeline(args.classes, args.workers)
    print(f"pipeline: {n} tests in {elapsed:.2f} s ({elapsed / max(n, 1) * 1000:.1f} ms per test)")


if __name__ == "__main__":
    main()

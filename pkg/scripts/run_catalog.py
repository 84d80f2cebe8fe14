#!/usr/bin/env python3
"""Run every bundled scenario and write its trace next to a short summary."""

import argparse
import time
from collections import Counter
from pathlib import Path

from netlab import scenario as S


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output directory for traces")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in S.catalog_names():
        scn = S.load_catalog_scenario(name)
        t0 = time.time()
        lab = S.run_scenario(scn)
        wall = time.time() - t0
        trace = S.write_trace(lab.engine.history)
        path = out / (name + S.TRACE_SUFFIX)
        path.write_text(trace)
        kinds = Counter(o.kind for o in lab.engine.history)
        top = ", ".join(f"{k}={n}" for k, n in kinds.most_common(4))
        print(f"{name:22s} {len(lab.engine.history):5d} records "
              f"({lab.engine.now / 1e6:7.1f}s virtual, {wall*1e3:6.1f}ms wall)  {top}")


if __name__ == "__main__":
    main()

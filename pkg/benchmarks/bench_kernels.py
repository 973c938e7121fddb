"""Time the jet Cauchy-product kernel and a full geometry build on both backends.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``PMCGRAPH_NUMBA``.

    python3 benchmarks/bench_kernels.py [--points 2000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from pmcgraph import _accel
from pmcgraph.builtins import scherk
from pmcgraph.geometry import build_point_geometry
from pmcgraph.jets import Jet

points, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
X = rng.uniform(-1.0, 1.0, (points, 2))
xs = Jet.variables(X, 4)
a, b = xs[..., 0], xs[..., 1]

def best(fn):
    fn()  # warm-up, includes numba compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

graph = scherk()
out = {
    "backend": _accel.BACKEND,
    "cauchy_product_s": best(lambda: (a + 1.0) * (b - 2.0) * (a * b)),
    "point_geometry_s": best(lambda: build_point_geometry(graph, X, 4)),
    "normA2_checksum": float(np.sum(build_point_geometry(graph, X, 4).normA2)),
}
print(json.dumps(out))
"""


def run(flag, points, repeat):
    env = dict(os.environ, PMCGRAPH_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", CHILD, str(points), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rows = [run(flag, args.points, args.repeat) for flag in ("1", "0")]
    print(f"{'backend':<8} {'cauchy [s]':>12} {'geometry [s]':>13} {'checksum':>24}")
    for r in rows:
        print(f"{r['backend']:<8} {r['cauchy_product_s']:>12.4f} {r['point_geometry_s']:>13.4f} "
              f"{r['normA2_checksum']:>24.17g}")
    if rows[0]["backend"] == "numba":
        print(f"speed-up on geometry build: "
              f"{rows[1]['point_geometry_s'] / rows[0]['point_geometry_s']:.2f}x")


if __name__ == "__main__":
    main()

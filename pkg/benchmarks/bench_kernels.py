"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--points 20000] [--repeat 3] [--threads N]

Times nearest-neighbour queries, batched point-triangle distances,
nearest-triangle (Metro) queries and candidate-restricted surface queries,
then a short end-to-end fit under each backend (run in a subprocess so the
backend switch takes effect at import).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from qgeom import _fallback, shapes
from qgeom.losses import _gather_csr, _nondegenerate_incidence

try:
    from qgeom import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(n_points, threads, rng):
    mesh = shapes.subdivided_cube(30)
    ref = rng.normal(size=(n_points, 3))
    queries = rng.normal(size=(n_points, 3))
    tri = rng.normal(size=(3, n_points, 3))
    corr = rng.integers(0, mesh.n_vertices, size=n_points)
    off, ids = _nondegenerate_incidence(mesh)
    sub_off, cand = _gather_csr(off, ids, corr)
    metro_pts = rng.uniform(-0.7, 0.7, size=(n_points // 4, 3))

    def cases(k):
        tree = k.KDTree(ref)
        bvh = k.TriangleBVH(mesh.vertices, mesh.faces)
        return {
            "kdtree build": lambda: k.KDTree(ref),
            "kdtree query": lambda: tree.query(queries, threads),
            "point-triangle batch": lambda: k.point_triangle_batch(queries, *tri),
            "bvh nearest triangle": lambda: bvh.query(metro_pts, threads),
            "candidate triangles": lambda: k.nearest_candidate(
                queries, mesh.vertices, mesh.faces, sub_off, cand, threads),
        }

    return cases


def fit_time(pure, steps):
    env = dict(os.environ)
    env.pop("QGEOM_PURE_PYTHON", None)
    if pure:
        env["QGEOM_PURE_PYTHON"] = "1"
    code = (
        "import time\n"
        "from qgeom import shapes, prepare_target, default_config, fit_points, BACKEND\n"
        "b = prepare_target(shapes.subdivided_cube(20))\n"
        f"cfg = default_config('chamfer+quadric', steps={steps})\n"
        "t0 = time.perf_counter(); fit_points(b, cfg); print(BACKEND, time.perf_counter() - t0)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, secs = out.stdout.split()
    return name, float(secs)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--fit-steps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    cases = kernel_cases(args.points, args.threads, np.random.default_rng(args.seed))
    fallback = cases(_fallback)
    compiled = cases(_kernels) if _kernels is not None else {}

    print(f"{'kernel':<24}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, fn in fallback.items():
        t_py = best_of(fn, args.repeat)
        if name in compiled:
            t_cy = best_of(compiled[name], args.repeat)
            print(f"{name:<24}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")
        else:
            print(f"{name:<24}{t_py:>12.4f}{'-':>12}{'-':>10}")

    results = dict(fit_time(pure, args.fit_steps) for pure in (True, False))
    t_py, t_cy = results.get("python"), results.get("cython")
    label = f"fit ({args.fit_steps} steps)"
    if t_cy is not None:
        print(f"{label:<24}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")
    else:
        print(f"{label:<24}{t_py:>12.4f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()

"""Time the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--h 0.02] [--repeat 5]

The first numba call includes JIT compilation and is reported separately.
"""
import argparse
import time

import numpy as np

from shapepbdw import _kernels
from shapepbdw.mesh import GeometryDescriptor, generate_mesh


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--voxel", type=float, default=0.25)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    m = generate_mesh(GeometryDescriptor(0.14, 2.0, 2.0), args.h)
    nodes = np.ascontiguousarray(m.nodes)
    tris = np.ascontiguousarray(m.triangles)
    origin, cell, nbx, nby, ptr, bins = m.bins()
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0, 5, args.points), rng.uniform(-0.2, 0.2, args.points)])
    lo = nodes.min(axis=0)
    span = nodes.max(axis=0) - lo
    nvx, nvy = (int(np.ceil(v / args.voxel)) for v in span)

    cases = {
        "p1_gradients": lambda k: k.p1_gradients(nodes, tris),
        "locate": lambda k: k.locate(nodes, tris, np.asarray(origin, float), float(cell),
                                     int(nbx), int(nby), ptr, bins, pts, 1e-10),
        "clip_weights": lambda k: k.clip_weights(nodes, tris, lo, args.voxel, nvx, nvy),
    }
    print(f"mesh: {m.n_nodes} nodes, {m.n_triangles} triangles; {args.points} query points")
    backends = {"numpy": _kernels.get_backend("numpy")}
    try:
        backends["numba"] = _kernels.get_backend("numba")
    except RuntimeError:
        print("numba unavailable, timing the numpy fallback only")
    print(f"{'kernel':14s} {'numpy [s]':>10s} {'numba jit [s]':>14s} {'numba [s]':>10s} "
          f"{'speed-up':>9s}")
    for name, call in cases.items():
        t_np = best_of(lambda: call(backends["numpy"]), args.repeat)
        if "numba" not in backends:
            print(f"{name:14s} {t_np:10.4f}")
            continue
        t0 = time.perf_counter()
        call(backends["numba"])
        t_jit = time.perf_counter() - t0
        t_nb = best_of(lambda: call(backends["numba"]), args.repeat)
        print(f"{name:14s} {t_np:10.4f} {t_jit:14.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()

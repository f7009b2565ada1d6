"""Time the compiled and NumPy element kernels on the same batch of elements.

    python benchmarks/bench_kernels.py [--elements N] [--repeat R]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from hybridquad import kernels
from hybridquad.mesh import generate_irregular


def element_batch(n: int) -> np.ndarray:
    mesh = generate_irregular(0)
    base = mesh.corners()
    reps = -(-n // len(base))
    return np.tile(base, (reps, 1, 1))[:n]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--elements", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    corners = element_batch(args.elements)
    mu, lam = 600.0, 900.0
    jobs = {
        "ps": lambda b: kernels.hybrid_stiffness(corners, mu, lam, "ps", backend=b),
        "ecq4": lambda b: kernels.hybrid_stiffness(corners, mu, lam, "ecq4", backend=b),
        "bilinear": lambda b: kernels.bilinear_stiffness(corners, mu, lam, backend=b),
    }
    backends = sorted(kernels.BACKENDS)
    print(f"{args.elements} elements, best of {args.repeat}; backends: {', '.join(backends)}")
    print(f"{'kernel':<10}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, job in jobs.items():
        times = {b: min(timeit.repeat(lambda: job(b), number=1, repeat=args.repeat)) for b in backends}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<10}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()

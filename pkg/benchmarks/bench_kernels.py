"""Compare the compiled and pure-numpy frame-difference kernels.

    python benchmarks/bench_kernels.py [--size 224] [--frames 64] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from finecap import _kernels_py

try:
    from finecap import _kernels as compiled
except ImportError:
    compiled = None


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=224)
    ap.add_argument("--frames", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    frames = [rng.integers(0, 256, (args.size, args.size, 3), dtype=np.uint8)
              for _ in range(args.frames)]
    impls = {"python": _kernels_py}
    if compiled is not None:
        impls["compiled"] = compiled
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, mod in impls.items():
        best = min(timeit.repeat(lambda: mod.adjacent_scores(frames), number=1,
                                 repeat=args.repeat))
        results[name] = (best, mod.adjacent_scores(frames))
        per_pair = best / max(args.frames - 1, 1) * 1e3
        print(f"{name:9s} {best * 1e3:9.2f} ms total  {per_pair:7.3f} ms/pair")
    if len(results) == 2:
        diff = np.max(np.abs(results["compiled"][1] - results["python"][1]))
        print(f"speedup   {results['python'][0] / results['compiled'][0]:.2f}x  "
              f"max |diff| {diff:.2e}")


if __name__ == "__main__":
    main()

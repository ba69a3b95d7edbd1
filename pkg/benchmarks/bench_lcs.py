"""Time the numba and numpy LCS back ends on the same random inputs.

    python benchmarks/bench_lcs.py [--pairs 200] [--length 300] [--pool 500]

Both back ends are imported directly, so GYPSUM_DISABLE_NUMBA only changes
which one the library dispatches to, not what this script measures (with the
flag set, the "numba" column runs the same loop as plain Python).
"""
import argparse
import time

import numpy as np

from gypsum import _accel
from gypsum.kernels import (best_match_numba, best_match_numpy, lcs_length_numba, lcs_length_numpy,
                            pack)


def timed(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--length", type=int, default=300, help="mean token sequence length")
    p.add_argument("--pool", type=int, default=500, help="training snippets for best_match")
    p.add_argument("--alphabet", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    seq = lambda: rng.integers(0, args.alphabet, rng.integers(args.length // 2, args.length * 3 // 2))
    pairs = [(seq(), seq()) for _ in range(args.pairs)]
    pool, offsets = pack([seq() for _ in range(args.pool)])
    query = seq()

    # compile outside the timed region
    lcs_length_numba(pairs[0][0], pairs[0][1])
    best_match_numba(query[:5], pool[:10], offsets[:2])

    rows = []
    for name, fn in (("numba", lcs_length_numba), ("numpy", lcs_length_numpy)):
        t, total = timed(lambda: sum(fn(a, b) for a, b in pairs))
        rows.append((f"lcs_length x{args.pairs}", name, t, total))
    for name, fn in (("numba", best_match_numba), ("numpy", best_match_numpy)):
        t, res = timed(fn, query, pool, offsets, 1.0)
        rows.append((f"best_match over {args.pool}", name, t, res))

    print(f"numba compiled: {_accel.USE_NUMBA}")
    print(f"{'kernel':<26}{'backend':<9}{'seconds':>10}  result")
    for kernel, backend, t, res in rows:
        print(f"{kernel:<26}{backend:<9}{t:>10.4f}  {res}")
    for i in range(0, len(rows), 2):
        assert rows[i][3] == rows[i + 1][3], "back ends disagree"
        print(f"{rows[i][0]}: numpy/numba time ratio {rows[i + 1][2] / rows[i][2]:.1f}x")


if __name__ == "__main__":
    main()

"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py --trials 20000 --k 200

Each backend runs the same seeded simulation; the script checks the outputs
agree bit for bit and reports wall time and speedup.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from walksieve import kernels
from walksieve.blocks import build_generator_system
from walksieve.instances import make_coloring_instance
from walksieve.spectral import AbelianGroup, edge_expansion, random_generators
from walksieve.walk import WalkConfig, simulate


def time_simulation(gs, backend: str, ks, trials: int, repeat: int):
    cfg = WalkConfig(gs, seed=7, backend=backend)
    labels = gs.block_system.labels
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = simulate(cfg, ks, trials, labels=labels, include_instance=True)
        best = min(best, time.perf_counter() - t0)
    return best, out


def time_expansion(backend: str, repeat: int):
    G = AbelianGroup((4, 4))
    S = random_generators(G, 3, np.random.default_rng(0))
    best, val = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        val = edge_expansion(G, S, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, val


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--R", type=int, default=5, help="number of coloring blocks")
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--k", type=int, default=200, help="largest walk length")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available()
    print(f"available backends: {', '.join(backends)}")
    bs = make_coloring_instance(args.R, 3)
    gs = build_generator_system(bs, 0.5, seed=1)
    ks = sorted({0, args.k // 4, args.k // 2, args.k})

    rows, sims, cuts = [], {}, {}
    for name in backends:
        t_sim, sims[name] = time_simulation(gs, name, ks, args.trials, args.repeat)
        t_cut, cuts[name] = time_expansion(name, args.repeat)
        rows.append((name, t_sim, t_cut))

    base = {r[0]: r for r in rows}.get("python")
    print(f"\n{'backend':<8} {'walks (s)':>10} {'speedup':>8} {'cut ratio, order 16 (s)':>24} {'speedup':>8}")
    for name, t_sim, t_cut in rows:
        s1 = base[1] / t_sim if base else float("nan")
        s2 = base[2] / t_cut if base else float("nan")
        print(f"{name:<8} {t_sim:>10.3f} {s1:>8.1f} {t_cut:>24.3f} {s2:>8.1f}")

    if len(backends) > 1:
        a, b = (sims[n] for n in backends)
        same = np.array_equal(a.survived(), b.survived()) and np.array_equal(a.instance_clean(), b.instance_clean())
        same &= cuts[backends[0]] == cuts[backends[1]]
        print(f"\noutputs identical across backends: {same}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

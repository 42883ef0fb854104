"""Compare the compiled and pure-Python SSA kernels.

    python benchmarks/bench_ssa.py [--N 25] [--replicas 200] [--t 1.0]

Both kernels run the same replicas from the same streams; the script checks
that final states agree exactly and reports events per second for each.
"""

import argparse
import time

import numpy as np

from entity_kinetics import ssa
from entity_kinetics.model import builtin, random_model
from entity_kinetics.state_space import StateSpace


def run(model, x0, t, seed, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        x, events = ssa.simulate(model, x0, t, seed, backend=backend, threads=1)
        best = min(best, time.perf_counter() - start)
    return x, events, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=25)
    ap.add_argument("--replicas", type=int, default=200)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    space = StateSpace(2, 2)
    models = {
        "imitation": builtin("imitation", space, 1.0 / args.N),
        "random-m3": random_model(space, 3, 1.0 / args.N, seed=2),
    }
    print(f"backends available: {', '.join(ssa.available_backends())}")
    if "compiled" not in ssa.available_backends():
        print("compiled kernel not built; nothing to compare")
        return 1
    print(f"{'model':<12}{'events':>10}{'python s':>11}{'compiled s':>12}{'speedup':>9}  identical")
    for name, model in models.items():
        x0 = ssa.sample_initial(np.full(space.S, 1.0 / space.S), args.N, args.replicas, args.seed)
        xp, ep, tp = run(model, x0, args.t, args.seed, "python", 1)
        xc, ec, tc = run(model, x0, args.t, args.seed, "compiled", args.repeat)
        same = bool((xp == xc).all() and (ep == ec).all())
        print(f"{name:<12}{int(ec.sum()):>10}{tp:>11.3f}{tc:>12.4f}{tp / tc:>9.0f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

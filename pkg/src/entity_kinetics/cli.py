"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 on success, 1 for invalid input (bad flags, model diagnostics,
I/O errors), 2 when a numerical invariant is violated.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .artifacts import emit
from .errors import InvariantError, ModelError
from .functionals import consistency_residual, duality_full, evolve_states
from .generators import lambda_n
from .hierarchy import integrate_dual_bbgky, solve_expansion
from .meanfield import (chaos_functional, f1_series, integrate_dual_vlasov, integrate_vlasov,
                        limit_expansion, mean_field_convergence)
from .model import BUILTIN_MODELS, builtin, load_model, require_valid, validate
from .ssa import empirical_marginal, thread_count
from .state_space import GradedSequence, StateSpace, symmetrize, tensor_power


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _nonnegative_float(text):
    value = float(text)
    if not value >= 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite and >= 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--builtin", choices=BUILTIN_MODELS, help="packaged model (default imitation)")
    src.add_argument("--model", help="path to a model JSON file")
    common.add_argument("--M", type=_positive(int), default=2, help="subpopulations for builtins")
    common.add_argument("--K", type=_positive(int), default=2, help="states per subpopulation for builtins")
    common.add_argument("--epsilon", type=_positive(float), default=None,
                        help="scaling parameter (overrides the model's)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="entity-kinetics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="check a model")
    p.add_argument("--dump-generator", type=_positive(int), metavar="n",
                   help="also write the n-entity generator matrix as CSV")

    p = sub.add_parser("hierarchy", parents=[common], help="dual hierarchy: expansion vs RK4")
    p.add_argument("--smax", type=_positive(int), default=3)
    p.add_argument("--t", type=_nonnegative_float, default=1.0)
    p.add_argument("--dt", type=_positive(float), default=1e-3)
    p.add_argument("--samples", type=_positive(int), default=10)

    p = sub.add_parser("meanfield", parents=[common], help="mean-field convergence and chaos residuals")
    p.add_argument("--epsilons", type=_floats, default=[0.1, 0.05, 0.025])
    p.add_argument("--t", type=_nonnegative_float, default=0.5)
    p.add_argument("--smax", type=_positive(int), default=3)
    p.add_argument("--dt", type=_positive(float), default=1e-3)
    p.add_argument("--nodes", type=_positive(int), default=16)
    p.add_argument("--series-nmax", type=int, default=3)
    p.add_argument("--chaos-out", default=None, help="path for the chaos-residual table")
    p.add_argument("--limit-out", default=None,
                   help="path for the limit-representation table (quadrature and series errors)")

    p = sub.add_parser("vlasov", parents=[common], help="one-particle kinetic equation")
    p.add_argument("--t", type=_nonnegative_float, default=2.0)
    p.add_argument("--dt", type=_positive(float), default=1e-3)
    p.add_argument("--samples", type=_positive(int), default=10)
    p.add_argument("--f0", type=_floats, default=None, help="initial density (default decreasing ramp)")
    p.add_argument("--series-nmax", type=int, default=None,
                   help="add the iterated-integral series of this depth as extra columns")

    p = sub.add_parser("ssa", parents=[common], help="stochastic simulation vs the kinetic equation")
    p.add_argument("--N", type=_positive(int), default=10)
    p.add_argument("--t", type=_nonnegative_float, default=1.0)
    p.add_argument("--replicas", type=_positive(int), default=10_000)
    p.add_argument("--f0", type=_floats, default=None)
    p.add_argument("--no-couple-epsilon", action="store_true",
                   help="keep the model's epsilon instead of using 1/N")
    p.add_argument("--replica-out", default=None, help="path for per-replica summaries")

    p = sub.add_parser("functionals", parents=[common], help="duality and consistency residuals")
    p.add_argument("--t", type=_nonnegative_float, default=1.0)
    p.add_argument("--samples", type=_positive(int), default=5)
    p.add_argument("--nmax", type=_positive(int), default=3)
    p.add_argument("--smax", type=_positive(int), default=2)
    p.add_argument("--activity", type=_positive(float), default=0.05,
                   help="initial state D_n = activity**n f**n")
    return parser


def _model(args):
    if args.model:
        model = load_model(args.model)
        source = {"model": str(args.model)}
    else:
        name = args.builtin or "imitation"
        model = builtin(name, StateSpace(args.M, args.K))
        source = {"builtin": name, "M": args.M, "K": args.K}
    if args.epsilon is not None:
        model = model.with_epsilon(args.epsilon)
    source["epsilon"] = model.epsilon
    return model, source


def _config(args, source: dict, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "builtin", "model", "M", "K", "epsilon")}
    cfg.update(source)
    cfg.update(extra)
    cfg["version"] = __version__
    return cfg


def _random_observable(S: int, s_max: int, seed: int) -> GradedSequence:
    rng = np.random.default_rng(seed)
    return GradedSequence(0.0, [symmetrize(rng.uniform(-1, 1, (S,) * s)) for s in range(1, s_max + 1)])


def _initial_density(args, S: int) -> np.ndarray:
    if args.f0 is None:
        f = np.arange(S, 0, -1, dtype=float)
    else:
        f = np.asarray(args.f0, dtype=float)
        if f.shape != (S,) or f.min() < 0 or f.sum() <= 0:
            raise ValueError(f"--f0 must list {S} nonnegative weights")
    return f / f.sum()


def _times(t: float, samples: int) -> list[float]:
    return [t * k / samples for k in range(samples + 1)]


def cmd_validate(args, model, source):
    # keep stdout clean when the generator matrix goes there
    print("ok", file=sys.stderr if args.dump_generator and args.out == "-" else sys.stdout)
    if args.dump_generator:
        n = args.dump_generator
        G = lambda_n(model, n)
        table = {"row": list(range(G.shape[0]))}
        for c in range(G.shape[1]):
            table[f"c{c}"] = list(G[:, c])
        emit(table, args.format, args.out, _config(args, source, operator="lambda_n", n=n))


def cmd_hierarchy(args, model, source):
    B0 = _random_observable(model.S, args.smax, args.seed)
    table = {"t": [], "s": [], "norm": [], "expansion_vs_rk4_error": []}
    B_rk, prev = B0, 0.0
    for t in _times(args.t, args.samples):
        B_rk = integrate_dual_bbgky(model, B_rk, t - prev, args.dt) if t > prev else B_rk
        prev = t
        B = solve_expansion(model, B0, t)
        for s in range(1, args.smax + 1):
            table["t"].append(t)
            table["s"].append(s)
            table["norm"].append(float(np.max(np.abs(B[s]))))
            table["expansion_vs_rk4_error"].append(float(np.max(np.abs(B[s] - B_rk[s]))))
    emit(table, args.format, args.out, _config(args, source))


def cmd_meanfield(args, model, source):
    b0 = _random_observable(model.S, args.smax, args.seed)
    rows = mean_field_convergence(model, b0, args.t, args.epsilons, args.dt)
    table = {"epsilon": [r[0] for r in rows], "err": [r[1] for r in rows]}
    emit(table, args.format, args.out, _config(args, source))
    if args.chaos_out:
        f0 = _initial_density(argparse.Namespace(f0=None), model.S)
        chaos = {"k": [], "smax": [], "lhs": [], "rhs": [], "residual": []}
        for k in (1, 2):
            rng = np.random.default_rng(args.seed + k)
            bk = symmetrize(rng.uniform(-1, 1, (model.S,) * k))
            comps = [bk if s == k else np.zeros((model.S,) * s) for s in range(1, k + 1)]
            for s_max in range(max(k, 2), 5):
                lhs, rhs = chaos_functional(model, GradedSequence(0.0, comps), f0, args.t, s_max,
                                            args.dt)
                for key, val in zip(chaos, (k, s_max, lhs, rhs, abs(lhs - rhs))):
                    chaos[key].append(val)
        emit(chaos, args.format, args.chaos_out, _config(args, source, table="chaos"))
    if args.limit_out:
        f0 = _initial_density(argparse.Namespace(f0=None), model.S)
        levels = min(args.smax, 3)
        quad = limit_expansion(model, b0.truncated(levels), args.t, args.nodes)
        ode = integrate_dual_vlasov(model, b0.truncated(levels), args.t, args.dt)
        series, norms = f1_series(model, f0, args.t, args.series_nmax, args.nodes)
        table = {"quantity": [], "value": []}
        for s in range(1, levels + 1):
            table["quantity"].append(f"limit_expansion_vs_rk4_s{s}")
            table["value"].append(float(np.max(np.abs(quad[s] - ode[s]))))
        table["quantity"].append("series_vs_rk4")
        table["value"].append(float(np.max(np.abs(series.f - integrate_vlasov(model, f0, args.t, args.dt).f))))
        emit(table, args.format, args.limit_out, _config(args, source, table="limit"))


def cmd_vlasov(args, model, source):
    f0 = _initial_density(args, model.S)
    table = {"t": [], "mass": []}
    for a in range(model.S):
        table[f"f{a}"] = []
    if args.series_nmax is not None:
        for a in range(model.S):
            table[f"series{a}"] = []
    f, prev = f0, 0.0
    for t in _times(args.t, args.samples):
        if t > prev:
            f = integrate_vlasov(model, f, t - prev, args.dt).f
        prev = t
        table["t"].append(t)
        table["mass"].append(float(f.sum()))
        for a in range(model.S):
            table[f"f{a}"].append(float(f[a]))
        if args.series_nmax is not None:
            g, _ = f1_series(model, f0, t, args.series_nmax)
            for a in range(model.S):
                table[f"series{a}"].append(float(g.f[a]))
    emit(table, args.format, args.out, _config(args, source, f0=list(map(float, f0))))


def cmd_ssa(args, model, source):
    f0 = _initial_density(args, model.S)
    em = empirical_marginal(model, f0, args.N, args.t, args.replicas, args.seed,
                            couple_epsilon=not args.no_couple_epsilon)
    rates_model = model if args.no_couple_epsilon else model.with_epsilon(1.0 / args.N)
    fv = integrate_vlasov(rates_model, f0, args.t).f
    space = model.space
    table = {"state": [], "j": [], "u": [], "empirical": [], "stderr": [], "vlasov": [], "z": []}
    for a in range(model.S):
        e = space.unflatten(a)
        z = (em.f[a] - fv[a]) / em.stderr[a] if em.stderr[a] > 0 else 0.0
        for key, val in zip(table, (a, e.j, e.u, em.f[a], em.stderr[a], fv[a], z)):
            table[key].append(val)
    # the backend and thread count do not change results, so they stay out of the header
    cfg = _config(args, source, f0=list(map(float, f0)))
    emit(table, args.format, args.out, cfg)
    if args.replica_out:
        per = {"replica": list(range(args.replicas)), "events": list(map(int, em.events))}
        for a in range(model.S):
            per[f"h{a}"] = list(em.per_replica[:, a])
        emit(per, args.format, args.replica_out, dict(cfg, table="replicas"))


def cmd_functionals(args, model, source):
    if args.smax > args.nmax:
        raise ValueError("--smax must not exceed --nmax")
    rng = np.random.default_rng(args.seed)
    f = rng.uniform(0.5, 1.5, model.S)
    f /= f.sum()
    D0 = GradedSequence(1.0, [args.activity**n * tensor_power(f, n) for n in range(1, args.nmax + 1)],
                        "state")
    O0 = _random_observable(model.S, args.nmax, args.seed + 1)
    table = {"t": [], "residual": [], "consistency": []}
    for t in _times(args.t, args.samples):
        table["t"].append(t)
        table["residual"].append(duality_full(model, O0, D0, t))
        table["consistency"].append(consistency_residual(O0, evolve_states(model, D0, t), args.smax))
    emit(table, args.format, args.out, _config(args, source))


COMMANDS = {
    "validate": cmd_validate,
    "hierarchy": cmd_hierarchy,
    "meanfield": cmd_meanfield,
    "vlasov": cmd_vlasov,
    "ssa": cmd_ssa,
    "functionals": cmd_functionals,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        thread_count()
        model, source = _model(args)
        if args.command == "validate":
            diags = validate(model)
            if diags:
                for d in diags:
                    print(d, file=sys.stderr)
                return 1
        else:
            require_valid(model)
        COMMANDS[args.command](args, model, source)
    except (InvariantError, AssertionError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

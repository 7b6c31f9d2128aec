"""Command-line interface: generate, decompose, solve, validate, oracle, bench.

Exit codes: 0 success, 1 input error, 2 infeasible instance or failed validation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import kernels
from .center_dp import solve_center_exact, solve_center_fpt
from .decomposition import (TreeDecomposition, check_nice, heuristic_decomposition, make_nice,
                            validate_decomposition)
from .instances import (Bundle, HardnessParams, gen_hardness, gen_partial_ktree, gen_random_geometric,
                        gen_random_tree, parse_formula)
from .median_dp import solve_means_fpt, solve_median_fpt
from .model import (OBJECTIVES, ClusteringSolution, InfeasibleError, InputError, dump_json, load_json,
                    validate_solution)
from .msr_msd import solve_msd, solve_msd_unconstrained, solve_msr
from .oracle import OracleConfig, OracleLimitError, oracle_solve

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2

SOLVERS = {
    "exact-center": "center",
    "fpt-center": "center",
    "fpt-median": "median",
    "fpt-means": "means",
    "msr": "msr",
    "msd": "msd",
    "msd-unconstrained": "msd",
    "oracle": None,
}
FAMILIES = ("tree", "geometric", "ktree")


def resolve_solver(solver: str | None, objective: str | None) -> tuple[str, str]:
    """Map ``--solver``/``--objective`` to a concrete solver name and objective.

    Without a solver, center runs the exact DP and everything else its approximation.
    """
    if solver is None:
        solver = "exact" if objective in (None, "center") else "fpt"
    if solver in ("exact", "fpt"):
        objective = objective or "center"
        if solver == "exact" and objective != "center":
            raise InputError("the exact solver handles only the center objective")
        name = f"{solver}-{objective}" if objective in ("center", "median", "means") else objective
        if name not in SOLVERS:
            raise InputError(f"no {solver} solver for objective {objective}")
        return name, objective
    if solver not in SOLVERS:
        raise InputError(f"unknown solver {solver!r}")
    fixed = SOLVERS[solver]
    if fixed is None:
        if objective is None:
            raise InputError("the oracle needs --objective")
        return solver, objective
    if objective is not None and objective != fixed:
        raise InputError(f"solver {solver} solves {fixed}, not {objective}")
    return solver, fixed


def run_solver(name: str, objective: str, bundle: Bundle, eps: float = 0.5):
    """Returns (solution, solver report dict, instance the solution lives on)."""
    inst = bundle.instance
    nice = None
    if name in ("exact-center", "fpt-center", "fpt-median", "fpt-means"):
        nice = make_nice(bundle.decomposition or heuristic_decomposition(inst), inst)
    meta = {"solver": name, "objective": objective, "backend": kernels.BACKEND}
    if nice is not None:
        meta["width"] = nice.width
        meta["nice_nodes"] = len(nice)
    if name == "exact-center":
        sol = solve_center_exact(inst, nice)
    elif name == "fpt-center":
        sol = solve_center_fpt(inst, nice)
    elif name == "fpt-median":
        sol = solve_median_fpt(inst, nice)
    elif name == "fpt-means":
        sol = solve_means_fpt(inst, nice)
    elif name in ("msr", "msd", "msd-unconstrained"):
        fn = {"msr": solve_msr, "msd": solve_msd, "msd-unconstrained": solve_msd_unconstrained}[name]
        sol, rep = fn(inst, eps, report=True)
        meta.update(rep)
        if name == "msd-unconstrained":
            inst = inst.complete()
    else:
        sol = oracle_solve(inst, objective)
    return sol, meta, inst


# -- commands ---------------------------------------------------------------

def cmd_solve(args) -> int:
    bundle = Bundle.from_dict(load_json(args.input))
    if args.decomposition:
        bundle.decomposition = TreeDecomposition.from_dict(load_json(args.decomposition))
    name, objective = resolve_solver(args.solver, args.objective)
    if args.eps <= 0:
        raise InputError("--eps must be positive")
    start = time.perf_counter()
    try:
        sol, meta, inst = run_solver(name, objective, bundle, args.eps)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if args.report:
            dump_json({"status": "infeasible", "message": str(exc), "solver": name}, args.report)
        return EXIT_FAIL
    meta["wall_time"] = time.perf_counter() - start
    meta["value"] = sol.value
    meta["status"] = "ok"
    problems = validate_solution(inst, sol)
    meta["validation"] = problems
    _emit(sol.to_dict(), args.output)
    if args.report:
        dump_json(meta, args.report)
    return EXIT_FAIL if problems else EXIT_OK


def _emit(data, path):
    if path:
        dump_json(data, path)
    else:
        json.dump(data, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")


def cmd_generate(args) -> int:
    fam = args.family
    meta = {"generator": fam, "seed": args.seed}
    td = centers = None
    if fam == "tree":
        inst = gen_random_tree(args.n, args.k, args.seed, grid=args.grid)
    elif fam == "geometric":
        if args.radius is None and args.edge_prob is None:
            args.edge_prob = 0.3
        inst = gen_random_geometric(args.n, args.k, args.seed, radius=args.radius, edge_prob=args.edge_prob,
                                    grid=args.grid)
    elif fam == "ktree":
        inst, td = gen_partial_ktree(args.n, args.k, args.w, args.seed, grid=args.grid)
        meta["width"] = args.w
    elif fam == "hardness":
        if not args.formula:
            raise InputError("--formula is required for the hardness family")
        formula = parse_formula(args.formula)
        params = HardnessParams(args.L, formula) if args.budget is None else \
            HardnessParams(args.L, formula, args.budget)
        inst, centers, labels = gen_hardness(params)
        meta.update({"L": args.L, "formula": args.formula, "labels": labels})
        meta.pop("seed")
    else:
        raise InputError(f"unknown family {fam!r}")
    for key in ("n", "k"):
        meta[key] = getattr(inst, key)
    _emit(Bundle(inst, td, centers, meta).to_dict(), args.output)
    return EXIT_OK


def cmd_decompose(args) -> int:
    bundle = Bundle.from_dict(load_json(args.input))
    inst = bundle.instance
    td = bundle.decomposition or heuristic_decomposition(inst)
    rep = validate_decomposition(inst, td)
    if not rep.ok:
        print("invalid decomposition: " + "; ".join(rep.problems), file=sys.stderr)
        return EXIT_FAIL
    out = td.to_dict()
    out["width"] = td.width
    if args.nice:
        nice = make_nice(td, inst)
        out["nice"] = {
            "kinds": list(nice.kinds),
            "bags": [list(b) for b in nice.bags],
            "children": [list(c) for c in nice.children],
            "vertex": list(nice.vertex),
            "edge": [None if e is None else list(e) for e in nice.edge],
            "root": nice.root,
            "width": nice.width,
            "counts": nice.counts(),
        }
    _emit(out, args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    bundle = Bundle.from_dict(load_json(args.input))
    inst = bundle.instance
    report = {"instance": "ok"}
    failed = False
    td = bundle.decomposition
    if args.decomposition:
        td = TreeDecomposition.from_dict(load_json(args.decomposition))
    if td is not None:
        rep = validate_decomposition(inst, td)
        report["decomposition"] = rep.problems or "ok"
        failed |= not rep.ok
        if rep.ok:
            problems = check_nice(make_nice(td, inst), inst)
            report["nice"] = problems or "ok"
            failed |= bool(problems)
    if args.solution:
        sol = ClusteringSolution.from_dict(load_json(args.solution))
        target = inst.complete() if args.unconstrained else inst
        problems = validate_solution(target, sol)
        report["solution"] = problems or "ok"
        failed |= bool(problems)
    report["status"] = "failed" if failed else "ok"
    _emit(report, args.report)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_oracle(args) -> int:
    bundle = Bundle.from_dict(load_json(args.input))
    facilities = None
    if args.facilities:
        try:
            facilities = [int(x) for x in args.facilities.split(",")]
        except ValueError:
            raise InputError("--facilities takes comma-separated vertex ids") from None
    config = OracleConfig(max_n=args.max_n) if args.max_n else OracleConfig()
    try:
        sol = oracle_solve(bundle.instance, args.objective, facilities, config)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(sol.to_dict(), args.output)
    return EXIT_OK


# -- bench --------------------------------------------------------------------

BENCH_FIELDS = ("instance", "family", "n", "k", "solver", "objective", "value", "oracle", "ratio", "time")


def _bench_instance(family, n, k, w, seed):
    if family == "tree":
        return Bundle(gen_random_tree(n, k, seed))
    if family == "geometric":
        return Bundle(gen_random_geometric(n, k, seed, edge_prob=0.3))
    if family == "ktree":
        inst, td = gen_partial_ktree(n, k, w, seed)
        return Bundle(inst, td)
    raise InputError(f"unknown bench family {family!r}")


def ratio(value: float, opt: float) -> float:
    if opt > 0:
        return value / opt
    return 1.0 if value <= 0 else math.inf


def bench_task(task) -> list[dict]:
    family, n, k, w, seed, solvers, eps, oracle_limit = task
    bundle = _bench_instance(family, n, k, w, seed)
    inst = bundle.instance
    oracle_cache = {}
    rows = []
    for entry in solvers:
        name, objective = resolve_solver(entry, None if entry != "oracle" else "center")
        start = time.perf_counter()
        try:
            sol, _, _ = run_solver(name, objective, bundle, eps)
            value = sol.value
        except InfeasibleError:
            value = math.inf
        elapsed = time.perf_counter() - start
        opt = ""
        r = ""
        if inst.n <= oracle_limit:
            key = (objective, name == "msd-unconstrained")
            if key not in oracle_cache:
                target = inst.complete() if key[1] else inst
                try:
                    oracle_cache[key] = oracle_solve(target, objective, config=OracleConfig(max_n=oracle_limit)).value
                except InfeasibleError:
                    oracle_cache[key] = math.inf
            opt = oracle_cache[key]
            r = ratio(value, opt)
        rows.append({"instance": f"{family}-n{n}-s{seed}", "family": family, "n": n, "k": k, "solver": name,
                     "objective": objective, "value": value, "oracle": opt, "ratio": r, "time": elapsed})
    return rows


def run_bench(families, solvers, n, k, trials, seed=0, w=2, eps=0.5, jobs=1, oracle_limit=None):
    oracle_limit = OracleConfig().max_n if oracle_limit is None else oracle_limit
    tasks = [(f, n, k, w, seed + t, tuple(solvers), eps, oracle_limit) for f in families for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(bench_task, tasks))
    else:
        results = [bench_task(t) for t in tasks]
    return [row for rows in results for row in rows]


def cmd_bench(args) -> int:
    families = [f for f in args.families.split(",") if f]
    solvers = [s for s in args.solvers.split(",") if s]
    for f in families:
        if f not in FAMILIES:
            raise InputError(f"unknown bench family {f!r}")
    for s in solvers:
        if s not in SOLVERS:
            raise InputError(f"unknown solver {s!r}")
    rows = run_bench(families, solvers, args.n, args.k, args.trials, args.seed, args.w, args.eps, args.jobs)
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.output:
            fh.close()
    worst = {}
    for row in rows:
        if row["ratio"] != "":
            worst[row["solver"]] = max(worst.get(row["solver"], 0.0), row["ratio"])
    for name, r in sorted(worst.items()):
        print(f"{name}: max ratio {r:.4f}", file=sys.stderr)
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conclust", description="Connected clustering solvers")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--objective", choices=OBJECTIVES)
    s.add_argument("--solver", help="exact, fpt, or one of: " + ", ".join(SOLVERS))
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--decomposition", help="tree decomposition JSON (default: from bundle or min-fill)")
    s.add_argument("--out", dest="output")
    s.add_argument("--report")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", help="write an instance bundle")
    g.add_argument("--family", required=True, choices=FAMILIES + ("hardness",))
    g.add_argument("--n", type=int, default=8)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--w", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid", type=int)
    g.add_argument("--radius", type=float)
    g.add_argument("--edge-prob", type=float)
    g.add_argument("--L", type=int, default=1)
    g.add_argument("--formula")
    g.add_argument("--budget", type=int)
    g.add_argument("--out", dest="output")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("decompose", help="write a tree decomposition")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--nice", action="store_true")
    d.add_argument("--out", dest="output")
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("validate", help="check an instance, decomposition and solution")
    v.add_argument("--in", dest="input", required=True)
    v.add_argument("--decomposition")
    v.add_argument("--solution")
    v.add_argument("--unconstrained", action="store_true", help="ignore the connectivity graph")
    v.add_argument("--report")
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("oracle", help="brute-force optimum")
    o.add_argument("--in", dest="input", required=True)
    o.add_argument("--objective", required=True, choices=OBJECTIVES)
    o.add_argument("--facilities")
    o.add_argument("--max-n", type=int)
    o.add_argument("--out", dest="output")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="solver x family matrix to CSV")
    b.add_argument("--families", default="tree,ktree")
    b.add_argument("--solvers", default="exact-center,fpt-center")
    b.add_argument("--n", type=int, default=8)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--w", type=int, default=2)
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--eps", type=float, default=0.5)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", dest="output")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OracleLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: generate and transform instances, run any solver,
compare models side by side, and replay plans through the queue simulator.

Exit codes: 0 = solved/ran, 2 = infeasible, unsatisfiable, oversized or
unreadable input, 1 = command-line misuse.  `EVACFLOW_THREADS` caps how many
models `compare` runs concurrently.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import instances
from .cpg import CostWeights, CpgConfig, run_cpg, run_cpg_bar, run_cpg_e
from .flows import (ModelInfeasible, solve_ff, solve_ff_bar, solve_ff_e,
                    solve_ff_i)
from .graph import (EvacuationGraph, build_time_expanded_graph, format_clock,
                    validate_instance)
from .lp import SolveBudget
from .plans import EvacuationPlan, instance_fingerprint
from .rf import RfTooLarge, rf_size_estimate, solve_rf_variant
from .sim import (SCENARIOS, apply_scenario, canonical_scenario,
                  flow_to_agents, plan_to_agents, simulate)

MODELS = ("ff", "ff-e", "ff-i", "ff-bar",
          "rf", "rf-e", "rf-i",
          "cpg", "cpg-e", "cpg-i", "cpg-bar")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on misuse; this artifact reserves 2 for solver-level
    failure, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _DataError(RuntimeError):
    """Anything wrong with inputs that is not a command-line mistake."""


def _threads(n_jobs: int) -> int:
    raw = os.environ.get("EVACFLOW_THREADS", "").strip()
    if raw:
        try:
            cap = max(int(raw), 1)
        except ValueError:
            raise _DataError(f"EVACFLOW_THREADS={raw!r} is not an integer")
        return min(cap, n_jobs)
    return min(4, n_jobs)


def _load_instance(path: str, horizon_override: int | None) -> EvacuationGraph:
    try:
        g = instances.load(path)
    except FileNotFoundError:
        raise _DataError(f"no such instance file: {path}")
    except (instances.InstanceFormatError, ValueError, json.JSONDecodeError) as exc:
        raise _DataError(f"could not read {path}: {exc}")
    if horizon_override is not None:
        g = EvacuationGraph(g.nodes.values(), g.edges,
                            horizon=horizon_override,
                            step_seconds=g.step_seconds, name=g.name)
    return g


# -- running one model ---------------------------------------------------------


@dataclass
class ModelRun:
    model: str
    status: str = "Optimal"
    phi: float | None = None
    percent: float | None = None
    delta_step: int | None = None
    columns: int | None = None
    rows: int | None = None
    wall_time: float = 0.0
    plan: EvacuationPlan | None = None
    report: dict | None = None
    error: str | None = None

    def summary(self, g: EvacuationGraph) -> dict:
        out = {"model": self.model, "status": self.status}
        if self.error is not None:
            out["error"] = self.error
            return out
        out.update({
            "phi": self.phi,
            "evacuated_pct": round(self.percent, 2),
            "delta_step": self.delta_step,
            "delta_clock": format_clock(self.delta_step, g.step_seconds),
            "columns": self.columns,
            "rows": self.rows,
            "wall_time_s": round(self.wall_time, 3),
        })
        return out


def run_model(model: str, g: EvacuationGraph, *,
              time_limit: float | None = None,
              iterations: int = 50, non_improving: int = 10,
              weights: CostWeights | None = None, seed: int = 0) -> ModelRun:
    """Solve ``g`` with one named model; failures land in ``.error`` rather
    than escaping, so comparison tables can render them as "-" rows."""
    t0 = time.monotonic()
    budget = SolveBudget(time_limit=time_limit)
    out = ModelRun(model=model)
    total = g.total_demand()

    def pct(phi: float) -> float:
        return 100.0 * phi / total if total > 0 else 100.0

    try:
        if model.startswith("ff"):
            te = build_time_expanded_graph(g, with_overflow=(model == "ff-i"))
            if model == "ff":
                sol = solve_ff(te)
            elif model == "ff-e":
                sol = solve_ff_e(te, solve_ff(te).phi, budget=budget)
            elif model == "ff-i":
                sol = solve_ff_i(te)
            else:
                sol = solve_ff_bar(te, budget=budget)
            out.status = sol.status
            out.phi, out.percent = sol.phi, pct(sol.phi)
            out.delta_step = sol.delta_step
            out.columns, out.rows = te.n_arcs, te.kept_time_nodes
            out.report = sol.to_report_dict(g)
        elif model.startswith("rf"):
            variant = {"rf": "base", "rf-e": "E", "rf-i": "I"}[model]
            te = build_time_expanded_graph(g, with_overflow=(variant == "I"))
            res = solve_rf_variant(variant, g, te, budget)
            est = rf_size_estimate(g, te)
            out.status = res.status
            out.phi, out.percent = res.phi, pct(res.phi)
            out.delta_step = res.delta_step
            out.columns, out.rows = est["variables"], est["rows"]
            out.plan = res.plan
        else:
            cfg = CpgConfig(max_iterations=iterations,
                            max_non_improving=non_improving,
                            weights=weights or CostWeights(), seed=seed,
                            time_limit=time_limit)
            if model == "cpg":
                res = run_cpg(g, config=cfg)
            elif model == "cpg-e":
                res = run_cpg_e(g, config=cfg)
            elif model == "cpg-i":
                res = run_cpg(g, config=cfg, objective="implicit")
            else:
                res = run_cpg_bar(g, config=cfg)
            out.status = res.status
            out.phi, out.percent = res.phi, res.percent
            out.delta_step = res.delta_step
            out.columns, out.rows = res.columns, res.rows_materialized
            out.plan = res.plan
    except (RfTooLarge, ModelInfeasible) as exc:
        out.status, out.error = "Failed", str(exc)
    out.wall_time = time.monotonic() - t0
    return out


# -- subcommands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.preset:
        params = instances.PRESETS[args.preset]
        params = instances.GenParams(**{**params.__dict__,
                                        "seed": args.seed,
                                        "name": args.name or params.name})
    else:
        params = instances.GenParams(
            n_evacuated=args.evacuated, n_transit=args.transit,
            n_safe=args.safe, n_edges=args.edges, horizon=args.horizon,
            seed=args.seed, name=args.name or "synthetic")
    g = instances.generate_synthetic(params)
    if args.out:
        instances.save(g, args.out)
        print(f"wrote {args.out}: {len(g.nodes)} nodes, {len(g.edges)} edges, "
              f"H={g.horizon}")
    else:
        sys.stdout.write(instances.dumps(g))
    return EXIT_OK


def cmd_transform(args) -> int:
    g = _load_instance(args.instance, None)
    if args.reduce_rn is not None:
        g = instances.reduce_rn(g, args.reduce_rn,
                                respect_expiry=args.respect_expiry)
    if args.scale_ix is not None:
        g = instances.scale_ix(g, args.scale_ix)
    if args.out:
        instances.save(g, args.out)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(instances.dumps(g))
    return EXIT_OK


def cmd_validate(args) -> int:
    g = _load_instance(args.instance, None)
    report = validate_instance(g)
    payload = {"instance": g.name, "ok": not report.violations,
               "violations": report.violations,
               "unsatisfiable_origins": report.unsatisfiable,
               "isolated_nodes": report.isolated, "stats": report.stats}
    print(json.dumps(payload, indent=2))
    return EXIT_OK if not report.violations else EXIT_INFEASIBLE


def _weights(args) -> CostWeights:
    return CostWeights(alpha_t=args.alpha_t, alpha_c=args.alpha_c,
                       alpha_u=args.alpha_u)


def cmd_solve(args) -> int:
    g = _load_instance(args.instance, args.horizon_override)
    run = run_model(args.model, g, time_limit=args.time_limit,
                    iterations=args.iterations,
                    non_improving=args.non_improving,
                    weights=_weights(args), seed=args.seed)
    print(json.dumps(run.summary(g), indent=2))
    if run.error is not None:
        print(f"{args.model}: {run.error}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = args.out
    if out is None:
        stem = Path(args.instance).with_suffix("")
        kind = "plan" if run.plan is not None else "report"
        out = f"{stem}.{args.model}.{kind}.json"
    if run.plan is not None:
        run.plan.save(out)
    else:
        Path(out).write_text(json.dumps(run.report, indent=2) + "\n")
    print(f"wrote {out}", file=sys.stderr)
    if run.phi is not None and run.phi <= 0 and g.total_demand() > 0:
        return EXIT_INFEASIBLE if args.strict_empty else EXIT_OK
    return EXIT_OK


def _bound_chain_note(by_model: dict[str, ModelRun]) -> str:
    """The orderings that must hold between any models run side by side."""
    pairs = (("cpg-bar", "cpg"), ("cpg", "ff"), ("rf", "ff"),
             ("cpg", "rf"), ("ff-i", "ff"), ("cpg-i", "ff"))
    checked, broken = [], []
    for lo, hi in pairs:
        a, b = by_model.get(lo), by_model.get(hi)
        if a is None or b is None or a.phi is None or b.phi is None:
            continue
        checked.append(f"phi({lo}) <= phi({hi})")
        if a.phi > b.phi + 1e-6:
            broken.append(f"phi({lo})={a.phi} > phi({hi})={b.phi}")
    if not checked:
        return "bound chain: nothing to check"
    if broken:
        return "bound chain VIOLATED: " + "; ".join(broken)
    return "bound chain holds: " + ", ".join(checked)


def _fmt_cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.1f}"
    return str(v)


def cmd_compare(args) -> int:
    g = _load_instance(args.instance, args.horizon_override)
    models = list(dict.fromkeys(args.models))

    def job(m: str) -> ModelRun:
        return run_model(m, g, time_limit=args.time_limit,
                         iterations=args.iterations,
                         non_improving=args.non_improving,
                         weights=_weights(args), seed=args.seed)

    with ThreadPoolExecutor(max_workers=_threads(len(models))) as ex:
        runs = list(ex.map(job, models))
    by_model = {r.model: r for r in runs}

    header = ["model", "status", "phi", "pct", "delta", "delta_step",
              "cpu_s", "columns", "rows"]
    rows = []
    for r in runs:
        if r.error is not None:
            rows.append([r.model, r.error] + ["-"] * 7)
            continue
        rows.append([r.model, r.status, _fmt_cell(r.phi),
                     _fmt_cell(r.percent),
                     format_clock(r.delta_step, g.step_seconds),
                     str(r.delta_step), f"{r.wall_time:.2f}",
                     _fmt_cell(r.columns), _fmt_cell(r.rows)])
    note = _bound_chain_note(by_model)

    if args.format == "json":
        text = json.dumps({"instance": g.name,
                           "rows": [r.summary(g) for r in runs],
                           "bound_chain": note}, indent=2) + "\n"
    elif args.format == "csv":
        lines = [",".join(header)]
        lines += [",".join(str(c).replace(",", ";") for c in row)
                  for row in rows]
        lines.append(f"# {note}")
        text = "\n".join(lines) + "\n"
    else:
        widths = [max(len(str(r[i])) for r in [header] + rows)
                  for i in range(len(header))]
        lines = ["| " + " | ".join(h.ljust(w) for h, w in zip(header, widths)) + " |",
                 "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        lines += ["| " + " | ".join(str(c).ljust(w)
                                    for c, w in zip(row, widths)) + " |"
                  for row in rows]
        lines.append("")
        lines.append(note)
        text = "\n".join(lines) + "\n"

    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK if "VIOLATED" not in note else EXIT_INFEASIBLE


def _population(g: EvacuationGraph, plan_path: str, granularity: float):
    try:
        data = json.loads(Path(plan_path).read_text())
    except FileNotFoundError:
        raise _DataError(f"no such plan file: {plan_path}")
    except json.JSONDecodeError as exc:
        raise _DataError(f"could not read {plan_path}: {exc}")
    version = data.get("version")
    if version == "evacplan/1":
        plan = EvacuationPlan.from_json_dict(data)
        if plan.fingerprint != instance_fingerprint(g):
            raise _DataError(
                f"plan {plan_path} was made for instance "
                f"{plan.instance_name!r} (fingerprint mismatch)")
        return plan_to_agents(g, plan, granularity), plan.phi
    if version == "evacflow-report/1":
        deps = {int(k): [(int(t), float(v)) for t, v in vs]
                for k, vs in data.get("departures", {}).items()}
        return flow_to_agents(g, deps, granularity), float(data.get("phi", 0.0))
    raise _DataError(f"{plan_path} is neither a plan nor a solver report")


def cmd_simulate(args) -> int:
    g = _load_instance(args.instance, None)
    try:
        scenarios = tuple(canonical_scenario(s) for s in args.scenario) \
            if args.scenario else SCENARIOS
    except ValueError as exc:
        raise _UsageError(str(exc))
    pop, plan_phi = _population(g, args.plan, args.granularity)
    out_dir = Path(args.out) if args.out else Path(args.plan).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.plan).stem

    summaries = {}
    for name in scenarios:
        res = simulate(apply_scenario(pop, name, args.seed, g), g)
        s = res.summary()
        s["plan_phi"] = plan_phi
        s["pct_of_plan"] = round(100.0 * res.arrived / plan_phi, 2) \
            if plan_phi > 0 else 100.0
        summaries[name] = s
        csv_path = out_dir / f"{stem}.{name}.profile.csv"
        csv_path.write_text(res.to_csv())
    json_path = out_dir / f"{stem}.sim.json"
    json_path.write_text(json.dumps(summaries, indent=2) + "\n")

    width = max(len(s) for s in scenarios)
    print(f"{'scenario'.ljust(width)}  arrived  total  percent  of-plan")
    for name in scenarios:
        s = summaries[name]
        print(f"{name.ljust(width)}  {s['arrived']:7d}  {s['total']:5d}  "
              f"{s['percent']:6.1f}%  {s['pct_of_plan']:6.1f}%")
    print(f"wrote {json_path} and {len(scenarios)} profile CSVs",
          file=sys.stderr)
    return EXIT_OK


class _UsageError(RuntimeError):
    pass


# -- wiring ------------------------------------------------------------------------


def _build_parser() -> _Parser:
    p = _Parser(prog="evacflow",
                description="Evacuation-planning solvers and plan simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common_solver_flags(sp):
        sp.add_argument("--time-limit", type=float, default=None,
                        help="wall-clock budget per solve, seconds")
        sp.add_argument("--iterations", type=int, default=50,
                        help="path-generation iteration cap")
        sp.add_argument("--non-improving", type=int, default=10,
                        help="stop after this many stale iterations")
        sp.add_argument("--alpha-t", type=float, default=0.4,
                        help="travel-time weight in edge pricing")
        sp.add_argument("--alpha-c", type=float, default=0.2,
                        help="path-occurrence weight in edge pricing")
        sp.add_argument("--alpha-u", type=float, default=0.4,
                        help="utilization weight in edge pricing")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--horizon-override", type=int, default=None,
                        help="replace the instance horizon (steps)")

    gen = sub.add_parser("generate", help="emit a synthetic instance")
    gen.add_argument("--preset", choices=sorted(instances.PRESETS))
    gen.add_argument("--evacuated", type=int, default=6)
    gen.add_argument("--transit", type=int, default=12)
    gen.add_argument("--safe", type=int, default=2)
    gen.add_argument("--edges", type=int, default=36)
    gen.add_argument("--horizon", type=int, default=48)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--name", default=None)
    gen.add_argument("--out", default=None)
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("transform",
                        help="derive reduced/scaled variants of an instance")
    tr.add_argument("instance")
    tr.add_argument("--reduce-rn", type=int, default=None, metavar="N",
                    help="drop deadlines/expiries beyond the N busiest areas")
    tr.add_argument("--scale-ix", type=float, default=None, metavar="X",
                    help="multiply all demands by X")
    tr.add_argument("--respect-expiry", action="store_true")
    tr.add_argument("--out", default=None)
    tr.set_defaults(func=cmd_transform)

    va = sub.add_parser("validate", help="check an instance file")
    va.add_argument("instance")
    va.set_defaults(func=cmd_validate)

    so = sub.add_parser("solve", help="run one model on an instance")
    so.add_argument("instance")
    so.add_argument("--model", choices=MODELS, required=True)
    so.add_argument("--out", default=None,
                    help="plan/report path (defaults next to the instance)")
    so.add_argument("--strict-empty", action="store_true",
                    help="exit 2 when nobody could be evacuated")
    common_solver_flags(so)
    so.set_defaults(func=cmd_solve)

    co = sub.add_parser("compare", help="run several models, emit one table")
    co.add_argument("instance")
    co.add_argument("--models", nargs="+", choices=MODELS, required=True)
    co.add_argument("--format", choices=("csv", "json", "md"), default="md")
    co.add_argument("--out", default=None)
    common_solver_flags(co)
    co.set_defaults(func=cmd_compare)

    si = sub.add_parser("simulate",
                        help="replay a plan under behavioural scenarios")
    si.add_argument("instance")
    si.add_argument("--plan", required=True,
                    help="plan JSON or flow-report JSON")
    si.add_argument("--scenario", action="append", default=None,
                    metavar="NAME",
                    help=f"repeatable; default all of: {', '.join(SCENARIOS)}")
    si.add_argument("--granularity", type=float, default=1.0,
                    help="evacuees represented by one agent")
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--out", default=None, help="output directory")
    si.set_defaults(func=cmd_simulate)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "models", None) is not None and len(set(args.models)) < 2:
        parser.error("compare needs at least two distinct models")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except _DataError as exc:
        print(f"evacflow: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

    mtal select   confidences.csv --strategy MT-AVG -n 50 -o picks.txt
    mtal budget   confidences.csv --formulation UDJS -B 500 -o solution.json
    mtal simulate experiment.json -o runs/
    mtal overlap  a.txt b.txt c.txt -o overlap.csv
    mtal report   runs/

Exit codes: 0 success, 2 usage (including unknown strategy names), 3 input
file format, 4 config semantics. ``MTAL_SEED`` sets the default seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .budget import (
    DEFAULT_BUDGET,
    DEFAULT_NODE_LIMIT,
    DEFAULT_TP,
    DEFAULT_TS,
    BudgetProgram,
    BudgetSolution,
    compute_costs,
    greedy_budgeted_select,
)
from .errors import ValidationError
from .formats import (
    InputFormatError,
    atomic_write,
    confidence_csv_text,
    dump_json,
    read_confidence_csv,
    read_selection,
    selection_text,
)
from .selection import BUDGET_FORMULATIONS, STRATEGIES, joint_uncertainty, score_kind, select
from .simlab.experiment import ALExperimentConfig, run_al_experiment
from .simlab.metrics import paired_t_test
from .strategies import selection_overlap

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_CONFIG = 0, 2, 3, 4
SUMMARY_METRICS = ("final_macro_f1", "final_metric_0", "final_metric_1", "final_oe", "final_oe_ts")


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def default_seed() -> int:
    raw = os.environ.get("MTAL_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise CLIError(f"MTAL_SEED={raw!r} is not an integer", EXIT_CONFIG) from None


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _strategy_params(args) -> dict:
    params = {}
    for key in ("task", "beta", "weights", "k", "split", "restricted_task"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _load_table(path, kind):
    try:
        return read_confidence_csv(path, kind)
    except InputFormatError:
        raise
    except ValidationError as exc:
        raise InputFormatError(str(exc)) from exc


# ------------------------------------------------------------------ select


def cmd_select(args) -> int:
    if args.strategy not in STRATEGIES:
        raise CLIError(f"unknown strategy {args.strategy!r}; choose from {', '.join(STRATEGIES)}", EXIT_USAGE)
    if args.n < 0:
        raise CLIError("-n must be non-negative", EXIT_USAGE)
    table = _load_table(args.input, score_kind(args.strategy))
    params = _strategy_params(args)
    seed = default_seed() if args.seed is None else args.seed
    if args.strategy in ("ST-R", "MT-R"):
        params["seed"] = seed
    try:
        result = select(args.strategy, table.matrix, args.n, params)
    except ValidationError as exc:
        raise CLIError(str(exc), EXIT_CONFIG) from exc
    out = Path(args.output)
    atomic_write(out, selection_text(result.ids))
    manifest = {
        "command": "select",
        "strategy": args.strategy,
        "params": params,
        "n": args.n,
        "seed": seed,
        "input": str(args.input),
        "output": str(out),
        "selected": len(result.ids),
        "version": __version__,
    }
    atomic_write(out.with_name(out.name + ".manifest.json"), dump_json(manifest))
    return EXIT_OK


# ------------------------------------------------------------------ budget


def _program_from_args(args) -> tuple[BudgetProgram | None, object]:
    path = Path(args.input)
    if path.suffix == ".json":
        try:
            return BudgetProgram.from_json(path.read_text()), None
        except OSError as exc:
            raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
        except ValidationError as exc:
            raise InputFormatError(str(exc)) from exc
    table = _load_table(path, "entropy-confidence")
    if not table.has_costs:
        raise InputFormatError("budget selection needs m and nt cost columns")
    if args.formulation is None:
        raise CLIError("--formulation is required for CSV input", EXIT_USAGE)
    cm = table.matrix
    form = args.formulation
    if form == "GRD":
        return None, table
    params = _strategy_params(args)
    if form.startswith("JOINT-"):
        u = joint_uncertainty(form.split("-", 1)[1], cm, params)[:, None]
        name, task = "JOINT", None
    elif form == "STCS":
        if args.task is None:
            raise CLIError("STCS needs --task", EXIT_USAGE)
        u, name, task = 1.0 - cm.scores, "STCS", args.task
    else:
        u, name, task = 1.0 - cm.scores, form.replace("-", "_"), None
    program = BudgetProgram(name, list(cm.ids), np.clip(u, 0.0, 1.0), table.m, table.nt,
                            args.budget, args.tp, args.ts, task)
    return program, None


def _greedy_solution(table, args) -> BudgetSolution:
    cm = table.matrix
    strategy = args.strategy or "MT-AVG"
    try:
        order = select(strategy, cm, cm.n_examples, _strategy_params(args) | (
            {"seed": default_seed()} if strategy in ("ST-R", "MT-R") else {})).ids
    except ValidationError as exc:
        raise CLIError(str(exc), EXIT_CONFIG) from exc
    rank = {example: pos for pos, example in enumerate(order)}
    costs = compute_costs(table.m, table.nt, args.tp, args.ts)
    result = greedy_budgeted_select([rank[i] for i in cm.ids], costs, args.budget, cm.ids)
    chosen = np.isin(np.asarray(cm.ids), result.ids)
    uncertainty = 1.0 - cm.scores.mean(axis=1)
    x = np.repeat(chosen[:, None], cm.n_tasks, axis=1)
    return BudgetSolution(list(cm.ids), x, chosen, float(uncertainty[chosen].sum()),
                          float(result.total_cost), True, f"GRD({strategy})")


def cmd_budget(args) -> int:
    if args.formulation is not None and args.formulation not in BUDGET_FORMULATIONS:
        raise CLIError(f"unknown formulation {args.formulation!r}; choose from {', '.join(BUDGET_FORMULATIONS)}",
                       EXIT_USAGE)
    if args.strategy is not None and args.strategy not in STRATEGIES:
        raise CLIError(f"unknown strategy {args.strategy!r}", EXIT_USAGE)
    try:
        program, table = _program_from_args(args)
        solution = _greedy_solution(table, args) if program is None else program.solve(args.node_limit)
    except (InputFormatError, CLIError):
        raise
    except ValidationError as exc:
        raise CLIError(str(exc), EXIT_CONFIG) from exc
    doc = solution.to_dict()
    doc["budget"] = args.budget if program is None else program.budget
    doc["version"] = __version__
    atomic_write(args.output, dump_json(doc))
    if args.save_program and program is not None:
        atomic_write(args.save_program, program.to_json() + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def _load_simulation(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    if not isinstance(doc, dict):
        raise CLIError("config: top level must be an object", EXIT_CONFIG)
    allowed = {"seeds", "base", "methods", "strategies", "pairs", "workers"}
    unknown = set(doc) - allowed
    if unknown:
        raise CLIError(f"config field {sorted(unknown)[0]!r} is not recognized", EXIT_CONFIG)
    seeds = doc.get("seeds", [default_seed()])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise CLIError("config field 'seeds' must be a non-empty list of integers", EXIT_CONFIG)
    base = doc.get("base", {})
    if not isinstance(base, dict):
        raise CLIError("config field 'base' must be an object", EXIT_CONFIG)
    for forbidden in ("seed",):
        if forbidden in base:
            raise CLIError(f"config field 'base.{forbidden}' is set per run from 'seeds'", EXIT_CONFIG)
    methods = dict(doc.get("methods", {}))
    for name in doc.get("strategies", []):
        methods.setdefault(name, {"strategy": name})
    if not methods:
        raise CLIError("config field 'methods' (or 'strategies') must name at least one method", EXIT_CONFIG)
    configs = {}
    for label, overrides in methods.items():
        if not isinstance(overrides, dict):
            raise CLIError(f"config field 'methods.{label}' must be an object", EXIT_CONFIG)
        try:
            configs[label] = [ALExperimentConfig.from_dict({**base, **overrides, "seed": s}) for s in seeds]
        except ValidationError as exc:
            raise CLIError(f"config field 'methods.{label}': {exc}", EXIT_CONFIG) from exc
        except TypeError as exc:
            raise CLIError(f"config field 'methods.{label}': {exc}", EXIT_CONFIG) from exc
    pairs = doc.get("pairs", [])
    for pair in pairs:
        if not (isinstance(pair, list) and len(pair) == 2 and all(p in configs for p in pair)):
            raise CLIError(f"config field 'pairs' entry {pair!r} must name two configured methods", EXIT_CONFIG)
    return {"seeds": seeds, "configs": configs, "pairs": pairs, "workers": doc.get("workers", 1)}


def _run(config: ALExperimentConfig, export: bool = False) -> tuple:
    tables = {}

    def keep(iteration, cm, m, nt):
        tables[iteration] = confidence_csv_text(cm, m, nt)

    text = run_al_experiment(config, on_scores=keep if export else None).to_json()
    return text, tables


def summary_values(record: dict) -> dict:
    summary = record["summary"]
    values = {"final_macro_f1": summary["final_macro_f1"]}
    for i, v in enumerate(summary["final_metric"]):
        values[f"final_metric_{i}"] = v
    values["final_oe"] = summary["final_oe"]
    values["final_oe_ts"] = summary["final_oe_ts"]
    return values


def aggregate_rows(records: dict) -> list:
    rows = []
    for label, runs in records.items():
        per_metric = {}
        for rec in runs:
            for metric, value in summary_values(rec).items():
                if value is not None:
                    per_metric.setdefault(metric, []).append(value)
        for metric in SUMMARY_METRICS:
            values = per_metric.get(metric)
            if not values:
                continue
            arr = np.asarray(values, dtype=float)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            rows.append([label, metric, arr.size, float(arr.mean()), std])
    return rows


def pvalue_rows(records: dict, pairs) -> list:
    rows = []
    for a, b in pairs:
        for metric in SUMMARY_METRICS:
            va = [summary_values(r).get(metric) for r in records[a]]
            vb = [summary_values(r).get(metric) for r in records[b]]
            if None in va or None in vb:
                continue
            if len(va) < 2:
                t, p = float("nan"), float("nan")
            else:
                t, p = paired_t_test(va, vb)
            rows.append([a, b, metric, float(np.mean(va) - np.mean(vb)), t, p])
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _table(header, rows) -> str:
    cells = [header] + [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells)


def cmd_simulate(args) -> int:
    plan = _load_simulation(args.config)
    workers = args.workers or plan["workers"]
    out = Path(args.output)
    jobs = [(label, cfg) for label, cfgs in plan["configs"].items() for cfg in cfgs]
    export = [args.export_confidences] * len(jobs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run, [cfg for _, cfg in jobs], export))
    else:
        outputs = [_run(cfg, flag) for (_, cfg), flag in zip(jobs, export)]
    records: dict = {}
    for (label, cfg), (text, tables) in zip(jobs, outputs):
        atomic_write(out / "records" / f"{label}__seed{cfg.seed}.json", text + "\n")
        for iteration, table in tables.items():
            atomic_write(out / "confidences" / f"{label}__seed{cfg.seed}__iter{iteration}.csv", table)
        record = json.loads(text)
        records.setdefault(label, []).append(record)
        for it in record["iterations"]:
            if it["selected"]:
                atomic_write(out / "selections" / f"{label}__seed{cfg.seed}__iter{it['iteration']}.txt",
                             selection_text(it["selected"]))
    agg_header = ["method", "metric", "n", "mean", "std"]
    agg = aggregate_rows(records)
    atomic_write(out / "aggregate.csv", _csv_text(agg_header, agg))
    pv_header = ["method_a", "method_b", "metric", "mean_diff", "t", "p"]
    pv = pvalue_rows(records, plan["pairs"])
    atomic_write(out / "pvalues.csv", _csv_text(pv_header, pv))
    manifest = {
        "command": "simulate",
        "seeds": plan["seeds"],
        "methods": {label: cfgs[0].to_dict() | {"seed": None} for label, cfgs in plan["configs"].items()},
        "pairs": plan["pairs"],
        "version": __version__,
    }
    atomic_write(out / "manifest.json", dump_json(manifest))
    print(_table(agg_header, agg))
    if pv:
        print()
        print(_table(pv_header, pv))
    return EXIT_OK


# ----------------------------------------------------------------- overlap


def overlap_matrix(selections: dict) -> list:
    names = list(selections)
    return [[selection_overlap(selections[a], selections[b]) for b in names] for a in names]


def cmd_overlap(args) -> int:
    names = args.names.split(",") if args.names else [Path(f).stem for f in args.files]
    if len(names) != len(args.files):
        raise CLIError("--names must give one name per file", EXIT_USAGE)
    if len(set(names)) != len(names):
        raise CLIError("method names must be distinct (use --names)", EXIT_USAGE)
    selections = {name: read_selection(path) for name, path in zip(names, args.files)}
    sizes = {len(set(v)) for v in selections.values()}
    if len(sizes) != 1 or 0 in sizes:
        raise InputFormatError(f"selections must be non-empty and equal-sized, got sizes {sorted(sizes)}")
    matrix = overlap_matrix(selections)
    rows = [[name] + row for name, row in zip(names, matrix)]
    text = _csv_text(["method"] + names, rows)
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ report


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    files = sorted((run_dir / "records").glob("*.json"))
    if not files:
        raise InputFormatError(f"no records under {run_dir / 'records'}")
    records: dict = {}
    for path in files:
        try:
            record = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: invalid JSON: {exc.msg}", exc.lineno) from exc
        label = path.stem.rsplit("__seed", 1)[0]
        records.setdefault(label, []).append(record)
    lines = ["# Learning curves (mean macro-F1 over seeds)", ""]
    for label, runs in records.items():
        steps = min(len(r["iterations"]) for r in runs)
        curve = [np.mean([np.mean(r["iterations"][i]["test"]["macro_f1"]) for r in runs]) for i in range(steps)]
        fracs = [runs[0]["iterations"][i]["labeled_fraction"] for i in range(steps)]
        points = ", ".join(f"{100 * f:.0f}%: {c:.4f}" for f, c in zip(fracs, curve))
        lines.append(f"- {label} ({len(runs)} seeds): {points}")
    lines += ["", "# Final metrics", "", _table(["method", "metric", "n", "mean", "std"], aggregate_rows(records))]
    pv_path = run_dir / "pvalues.csv"
    if pv_path.exists():
        lines += ["", "# Paired t-tests", "", pv_path.read_text().rstrip()]
    text = "\n".join(lines) + "\n"
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -------------------------------------------------------------------- main


def _add_strategy_options(p):
    p.add_argument("--task", type=int, help="task column for single-task strategies / STCS")
    p.add_argument("--beta", type=float, help="two-task weight toward task 1 (the dependent task)")
    p.add_argument("--weights", type=_floats, help="per-task weights, comma separated")
    p.add_argument("--k", type=float, help="RRF rank offset (default 60)")
    p.add_argument("--split", type=_floats, help="MT-IND per-task fractions, comma separated")
    p.add_argument("--restricted-task", dest="restricted_task", type=int,
                   help="task restricted by beta-Pareto when beta < 0.5 (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtal", description="Multi-task active learning selection tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="pick the n least confident examples with a named strategy")
    p.add_argument("input", help="confidence CSV: id,task_0,...[,m,nt]")
    p.add_argument("--strategy", required=True, help=f"one of {', '.join(STRATEGIES)}")
    p.add_argument("-n", type=int, required=True, help="number of examples to select")
    p.add_argument("-o", "--output", required=True, help="newline-delimited id file")
    p.add_argument("--seed", type=int, help="seed for random strategies (default $MTAL_SEED or 0)")
    _add_strategy_options(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("budget", help="budget-constrained selection")
    p.add_argument("input", help="confidence CSV with m,nt columns, or a budget program .json")
    p.add_argument("--formulation", help=f"one of {', '.join(BUDGET_FORMULATIONS)}")
    p.add_argument("--strategy", help="ranking strategy for GRD (default MT-AVG)")
    p.add_argument("-B", "--budget", type=float, default=DEFAULT_BUDGET)
    p.add_argument("--tp", type=float, default=DEFAULT_TP, help="per-entity token annotation cost")
    p.add_argument("--ts", type=float, default=DEFAULT_TS, help="sentence label cost")
    p.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT)
    p.add_argument("--save-program", help="also write the program as JSON")
    p.add_argument("-o", "--output", required=True, help="solution JSON")
    _add_strategy_options(p)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("simulate", help="run seeded active learning experiments")
    p.add_argument("config", help="experiment JSON")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="parallel processes over runs")
    p.add_argument("--export-confidences", action="store_true",
                   help="also write each scored pool as a confidence CSV (with m,nt)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("overlap", help="pairwise overlap percentages between selections")
    p.add_argument("files", nargs="+", help="selection files (one id per line)")
    p.add_argument("--names", help="comma-separated method names (default: file stems)")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("report", help="summarize a simulate output directory")
    p.add_argument("run_dir")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"mtal: error: {exc}", file=sys.stderr)
        return exc.code
    except InputFormatError as exc:
        print(f"mtal: input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValidationError as exc:
        print(f"mtal: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

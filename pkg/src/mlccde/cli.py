"""Experiment runner and report generator.

Subcommands: ``suite`` (export the benchmark manifest), ``run`` (seeded
replicated runs to CSV plus one JSON trace per run), ``compare``
(per-function mean/std, -/=/+ rows with P-N, multi-problem Wilcoxon and
Friedman mean ranks from result CSVs), ``motivate`` (rank-archive study of
the two fixed-parameter classic DEs), ``sweep-n`` (sensitivity to the head
fraction N), and ``ablate`` (framework variants against the single-layer
baselines).

All numbers in any emitted table are recomputable from the emitted CSVs
alone.  Output files are written atomically (temp file + rename) and runs
are dispatched to a process pool sized by ``--workers``; results are
collected in submission order so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import stats
from .bench import make_suite, suite_manifest
from .core import Budget
from .layers import LayerSpec
from .mlcc import MlccConfig, RunRecord, mlcc_run, single_layer_run

RESULTS_SCHEMA = "mlccde-results-v1"
AR_SCHEMA = "mlccde-ar-v1"
FREQ_SCHEMA = "mlccde-rank-frequency-v1"
OUT_ENV_VAR = "MLCCDE_OUT"

DEFAULT_DIMENSION = 10
DEFAULT_SUITE_SEED = 2014
DEFAULT_RUNS = 25
DEFAULT_BUDGET_MULTIPLIER = 10_000
DEFAULT_BASE_SEED = 1000
DEFAULT_N_TOP = 0.05


class CliError(Exception):
    """Fatal command error; the message is printed and the exit code is 1."""


@dataclass
class AlgorithmSpec:
    """A named, runnable algorithm configuration."""

    name: str
    kind: str                      # "mlcc" | "single"
    layers: Sequence[LayerSpec]
    n_top: float = DEFAULT_N_TOP
    ablation: str = "full"
    top_g_override: Optional[object] = None   # int, or "NP" resolved per run
    update: str = "generational"


@dataclass
class ExperimentConfig:
    dimension: int = DEFAULT_DIMENSION
    suite_seed: int = DEFAULT_SUITE_SEED
    problems: Optional[List[str]] = None
    runs: int = DEFAULT_RUNS
    budget_multiplier: int = DEFAULT_BUDGET_MULTIPLIER
    base_seed: int = DEFAULT_BASE_SEED
    np_size: Optional[int] = None
    workers: int = 1
    update: str = "generational"
    n_top: float = DEFAULT_N_TOP
    algorithms: Dict[str, dict] = field(default_factory=dict)

    @property
    def resolved_np(self) -> int:
        return self.np_size if self.np_size else 5 * self.dimension

    @property
    def budget_evaluations(self) -> int:
        return self.budget_multiplier * self.dimension


# -- configuration loading ---------------------------------------------------

_SUITE_KEYS = {"dimension", "seed", "problems"}
_EXPERIMENT_KEYS = {"runs", "budget_multiplier", "base_seed", "np_size",
                    "workers", "update", "n_top"}


def load_config(path: str) -> ExperimentConfig:
    """Parse a YAML config file; errors carry line/column diagnostics."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise CliError(f"config parse error in {path}{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise CliError(f"config root in {path} must be a mapping")
    cfg = ExperimentConfig()
    suite = raw.pop("suite", {}) or {}
    unknown = set(suite) - _SUITE_KEYS
    if unknown:
        raise CliError(f"unknown suite keys in {path}: {sorted(unknown)}")
    cfg.dimension = int(suite.get("dimension", cfg.dimension))
    cfg.suite_seed = int(suite.get("seed", cfg.suite_seed))
    if suite.get("problems") is not None:
        cfg.problems = [str(p) for p in suite["problems"]]
    experiment = raw.pop("experiment", {}) or {}
    unknown = set(experiment) - _EXPERIMENT_KEYS
    if unknown:
        raise CliError(f"unknown experiment keys in {path}: {sorted(unknown)}")
    for key in _EXPERIMENT_KEYS:
        if key in experiment:
            setattr(cfg, key, experiment[key])
    cfg.algorithms = raw.pop("algorithms", {}) or {}
    if raw:
        raise CliError(f"unknown top-level config sections in {path}: {sorted(raw)}")
    return cfg


def _layer_spec_from(entry) -> LayerSpec:
    if isinstance(entry, str):
        if entry in ("shade", "bid"):
            return LayerSpec(entry)
        if entry == "fixed":
            return LayerSpec("fixed")
        raise CliError(f"unknown layer shorthand {entry!r}")
    if isinstance(entry, dict):
        entry = dict(entry)
        kind = entry.pop("kind", None)
        if kind not in ("shade", "bid", "fixed"):
            raise CliError(f"layer needs kind shade|bid|fixed, got {kind!r}")
        try:
            return LayerSpec(kind, **entry)
        except TypeError as exc:
            raise CliError(f"bad layer options for {kind}: {exc}") from exc
    raise CliError(f"layer entry must be a name or mapping, got {entry!r}")


def builtin_algorithms() -> Dict[str, AlgorithmSpec]:
    shade = LayerSpec("shade")
    bid = LayerSpec("bid")
    de_rand = LayerSpec("fixed", strategy="rand/1", f=0.7, cr=0.5)
    de_best = LayerSpec("fixed", strategy="best/1", f=0.7, cr=0.5)
    mlcc = AlgorithmSpec("mlcc", "mlcc", (shade, bid))
    table = {
        "mlcc": mlcc,
        "shade-only": AlgorithmSpec("shade-only", "single", (shade,)),
        "bide-only": AlgorithmSpec("bide-only", "single", (bid,)),
        "fixed-de": AlgorithmSpec("fixed-de", "single", (de_rand,)),
        "de-rand-1": AlgorithmSpec("de-rand-1", "single", (de_rand,)),
        "de-best-1": AlgorithmSpec("de-best-1", "single", (de_best,)),
        "variant-i": replace(mlcc, name="variant-i", ablation="no_rab"),
        "variant-ii": replace(mlcc, name="variant-ii", ablation="no_ipls"),
        "variant-iii": replace(mlcc, name="variant-iii", ablation="neither"),
        "variant-iv": replace(mlcc, name="variant-iv", ablation="no_fitness_bias"),
        "mlcc-top1": replace(mlcc, name="mlcc-top1", top_g_override=1),
        "mlcc-topnp": replace(mlcc, name="mlcc-topnp", top_g_override="NP"),
    }
    return table


def resolve_algorithms(names: Sequence[str], config: ExperimentConfig) -> List[AlgorithmSpec]:
    table = builtin_algorithms()
    for name, body in config.algorithms.items():
        body = dict(body)
        kind = body.pop("kind", "mlcc")
        layers = tuple(_layer_spec_from(e) for e in body.pop("layers", ["shade", "bid"]))
        spec = AlgorithmSpec(name, kind, layers,
                             n_top=float(body.pop("n_top", config.n_top)),
                             ablation=body.pop("ablation", "full"),
                             top_g_override=body.pop("top_g_override", None),
                             update=body.pop("update", config.update))
        if body:
            raise CliError(f"unknown algorithm keys for {name!r}: {sorted(body)}")
        table[name] = spec
    out = []
    for name in names:
        if name not in table:
            raise CliError(f"unknown algorithm {name!r}; known: {sorted(table)}")
        spec = table[name]
        out.append(replace(spec, update=spec.update or config.update))
    return out


# -- run execution ------------------------------------------------------------

def run_algorithm(spec: AlgorithmSpec, problem, np_size: int, budget_evaluations: int,
                  seed: int) -> RunRecord:
    budget = Budget(budget_evaluations)
    if spec.kind == "single":
        return single_layer_run(spec.layers[0], problem, budget, seed, np_size,
                                algorithm=spec.name, update=spec.update)
    top_g = spec.top_g_override
    if top_g == "NP":
        top_g = np_size
    config = MlccConfig(layers=tuple(spec.layers), np_size=np_size, n_top=spec.n_top,
                        ablation=spec.ablation, top_g_override=top_g, update=spec.update)
    return mlcc_run(config, problem, budget, seed, algorithm=spec.name)


def _run_task(spec: AlgorithmSpec, problem_id: str, dimension: int, suite_seed: int,
              np_size: int, budget_evaluations: int, seeds: Sequence[int]) -> List[RunRecord]:
    problem = {p.id: p for p in make_suite(dimension, suite_seed)}[problem_id]
    return [run_algorithm(spec, problem, np_size, budget_evaluations, seed)
            for seed in seeds]


def execute_runs(config: ExperimentConfig, specs: Sequence[AlgorithmSpec],
                 workers: Optional[int] = None) -> Dict[str, List[RunRecord]]:
    """Run every (algorithm, problem, seed) combination deterministically.

    Results per algorithm are ordered problem-major (suite order), run-index
    minor, regardless of worker scheduling.
    """
    if config.runs < 1:
        raise CliError("runs must be at least 1")
    workers = workers if workers is not None else config.workers
    problems = [p.id for p in make_suite(config.dimension, config.suite_seed)]
    if config.problems is not None:
        missing = set(config.problems) - set(problems)
        if missing:
            raise CliError(f"unknown suite problems: {sorted(missing)}")
        problems = [p for p in problems if p in set(config.problems)]
    seeds = [config.base_seed + r for r in range(config.runs)]
    tasks = [(spec, pid) for spec in specs for pid in problems]
    args = [(spec, pid, config.dimension, config.suite_seed, config.resolved_np,
             config.budget_evaluations, seeds) for spec, pid in tasks]
    if workers and workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_task, *a) for a in args]
            chunks = [f.result() for f in futures]
    else:
        chunks = [_run_task(*a) for a in args]
    results: Dict[str, List[RunRecord]] = {spec.name: [] for spec in specs}
    for (spec, _pid), chunk in zip(tasks, chunks):
        results[spec.name].extend(chunk)
    return results


# -- file output ---------------------------------------------------------------

def _atomic_write(path: str, data: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def results_csv_text(records: Sequence[RunRecord]) -> str:
    lines = [f"# {RESULTS_SCHEMA}", "algorithm,problem,seed,final_error,evaluations"]
    for r in records:
        lines.append(f"{r.algorithm},{r.problem},{r.seed},{r.final_error!r},{r.evaluations}")
    return "\n".join(lines) + "\n"


def write_results_csv(path: str, records: Sequence[RunRecord]) -> None:
    _atomic_write(path, results_csv_text(records))


def read_results_csv(path: str) -> List[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        rows.append({"algorithm": row["algorithm"], "problem": row["problem"],
                     "seed": int(row["seed"]), "final_error": float(row["final_error"]),
                     "evaluations": int(row["evaluations"])})
    return rows


def write_traces(out_dir: str, records: Sequence[RunRecord]) -> None:
    for r in records:
        path = os.path.join(out_dir, "traces", r.algorithm,
                            f"{r.problem}__seed{r.seed}.json")
        _atomic_write(path, json.dumps(r.to_json_dict(), indent=1, sort_keys=True))


# -- comparison reports ---------------------------------------------------------

def errors_by_problem(rows: Sequence[dict]) -> Dict[str, Dict[str, List[float]]]:
    """{algorithm: {problem: [final errors in seed order]}}."""
    out: Dict[str, Dict[str, List[dict]]] = {}
    for row in rows:
        out.setdefault(row["algorithm"], {}).setdefault(row["problem"], []).append(row)
    shaped = {}
    for algo, by_problem in out.items():
        shaped[algo] = {pid: [r["final_error"] for r in sorted(rs, key=lambda r: r["seed"])]
                        for pid, rs in by_problem.items()}
    return shaped


def build_comparison(errors: Dict[str, Dict[str, List[float]]], considered: str,
                     alpha: float = 0.05) -> dict:
    """Tables 3/4/5-shaped comparison of every algorithm against `considered`."""
    if considered not in errors:
        raise CliError(f"considered algorithm {considered!r} not present")
    if len(errors) < 2:
        raise CliError("comparison needs at least two algorithms")
    algos = [considered] + sorted(a for a in errors if a != considered)
    problems = sorted(errors[considered])
    for algo in algos:
        if sorted(errors[algo]) != problems:
            raise CliError(f"{algo!r} does not cover the same problems as {considered!r}")
        counts = {len(v) for v in errors[algo].values()}
        if counts != {len(errors[considered][problems[0]])}:
            raise CliError("all algorithms need identical run counts per problem")
        if counts == {1}:
            raise CliError("statistics need at least 2 runs per problem")

    per_function = []
    signs_by_algo: Dict[str, List[str]] = {a: [] for a in algos[1:]}
    for pid in problems:
        row = {"problem": pid, "mean": {}, "std": {}, "signs": {}}
        for algo in algos:
            vals = np.asarray(errors[algo][pid])
            row["mean"][algo] = float(vals.mean())
            row["std"][algo] = float(vals.std(ddof=1))
        row["best"] = min(algos, key=lambda a: row["mean"][a])
        for algo in algos[1:]:
            sign = stats.single_problem_compare(errors[considered][pid],
                                                errors[algo][pid], alpha)
            row["signs"][algo] = sign
            signs_by_algo[algo].append(sign)
        per_function.append(row)

    sign_rows = {}
    multi = {}
    for algo in algos[1:]:
        summary = stats.SignSummary.from_signs(signs_by_algo[algo])
        sign_rows[algo] = {"minus": summary.minus, "equal": summary.equal,
                           "plus": summary.plus, "p_n": summary.p_n}
        considered_means = [next(r for r in per_function if r["problem"] == pid)["mean"][considered]
                            for pid in problems]
        compared_means = [next(r for r in per_function if r["problem"] == pid)["mean"][algo]
                          for pid in problems]
        try:
            res = stats.multi_problem_wilcoxon(considered_means, compared_means, alpha)
            multi[algo] = {"r_plus": float(res.r_plus), "r_minus": float(res.r_minus),
                           "p_value": float(res.p_value), "significant": bool(res.significant)}
        except stats.AllZero:
            multi[algo] = {"r_plus": 0.0, "r_minus": 0.0, "p_value": None,
                           "significant": False}

    matrix = np.array([[row["mean"][a] for a in algos] for row in per_function])
    friedman = dict(zip(algos, (float(v) for v in stats.friedman_mean_ranks(matrix))))
    return {
        "schema": "mlccde-compare-v1",
        "alpha": alpha,
        "considered": considered,
        "algorithms": algos,
        "per_function": per_function,
        "sign_rows": sign_rows,
        "multi_problem_wilcoxon": multi,
        "friedman_mean_ranks": friedman,
    }


def comparison_text(report: dict) -> str:
    algos = report["algorithms"]
    considered = report["considered"]
    buf = io.StringIO()
    width = max(len(a) for a in algos) + 2
    head = "problem".ljust(24) + "".join(a.ljust(width + 12) for a in algos)
    buf.write(head + "\n")
    for row in report["per_function"]:
        cells = []
        for a in algos:
            mark = "*" if row["best"] == a else " "
            sign = row["signs"].get(a, " ")
            cells.append(f"{row['mean'][a]:.3e}{mark}{sign}".ljust(width + 12))
        buf.write(row["problem"].ljust(24) + "".join(cells) + "\n")
    buf.write("\n-/=/+ versus " + considered + " (P-N):\n")
    for a, s in report["sign_rows"].items():
        buf.write(f"  {a}: {s['minus']}/{s['equal']}/{s['plus']} ({s['p_n']})\n")
    buf.write("\nmulti-problem Wilcoxon (considered = " + considered + "):\n")
    for a, m in report["multi_problem_wilcoxon"].items():
        p = "n/a" if m["p_value"] is None else f"{m['p_value']:.4g}"
        flag = "yes" if m["significant"] else "no"
        buf.write(f"  vs {a}: R+={m['r_plus']} R-={m['r_minus']} p={p} "
                  f"significant={flag}\n")
    buf.write("\nFriedman mean ranks:\n")
    for a, r in sorted(report["friedman_mean_ranks"].items(), key=lambda kv: kv[1]):
        buf.write(f"  {a}: {r:.4f}\n")
    return buf.getvalue()


# -- rank-archive (motivation) report -------------------------------------------

def median_run_index(records: Sequence[RunRecord]) -> int:
    errors = np.asarray([r.final_error for r in records])
    return int(np.argsort(errors, kind="stable")[len(errors) // 2])


def build_ar_report(results: Dict[str, List[RunRecord]], np_size: int) -> dict:
    """Median-run average NBS-producer rank per (algorithm, problem)."""
    expected = stats.expected_average_rank(np_size)
    rows = []
    freq = {}
    for algo, records in results.items():
        by_problem: Dict[str, List[RunRecord]] = {}
        for r in records:
            by_problem.setdefault(r.problem, []).append(r)
        for pid in sorted(by_problem):
            runs = sorted(by_problem[pid], key=lambda r: r.seed)
            median = runs[median_run_index(runs)]
            rows.append({"algorithm": algo, "problem": pid, "ar": median.ar,
                         "nbs_events": int(median.rank_frequency.sum())})
            freq[(algo, pid)] = median.rank_frequency
    return {"schema": AR_SCHEMA, "np_size": np_size, "ar_expected": expected,
            "rows": rows, "frequency": freq}


def ar_report_csv(report: dict) -> str:
    lines = [f"# {AR_SCHEMA}",
             f"# np_size={report['np_size']} ar_expected={report['ar_expected']!r}",
             "algorithm,problem,ar,ar_expected,nbs_events"]
    for row in report["rows"]:
        ar = "" if row["ar"] is None else repr(row["ar"])
        lines.append(f"{row['algorithm']},{row['problem']},{ar},"
                     f"{report['ar_expected']!r},{row['nbs_events']}")
    return "\n".join(lines) + "\n"


def frequency_csv(report: dict) -> str:
    lines = [f"# {FREQ_SCHEMA}", "algorithm,problem,rank,count"]
    for (algo, pid), hist in sorted(report["frequency"].items()):
        for rank, count in enumerate(hist, start=1):
            lines.append(f"{algo},{pid},{rank},{int(count)}")
    return "\n".join(lines) + "\n"


# -- subcommands -----------------------------------------------------------------

def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "dimension", None) is not None:
        cfg.dimension = args.dimension
    if getattr(args, "suite_seed", None) is not None:
        cfg.suite_seed = args.suite_seed
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.runs = args.runs
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "budget_multiplier", None) is not None:
        cfg.budget_multiplier = args.budget_multiplier
    if getattr(args, "problems", None):
        cfg.problems = args.problems.split(",")
    if getattr(args, "update", None) is not None:
        cfg.update = args.update
    return cfg


def _out_dir(args) -> str:
    return args.out or os.environ.get(OUT_ENV_VAR) or "out"


def cmd_suite(args) -> int:
    cfg = _config_from_args(args)
    manifest = suite_manifest(cfg.dimension, cfg.suite_seed)
    text = json.dumps(manifest, indent=1, sort_keys=True)
    if args.out:
        _atomic_write(os.path.join(_out_dir(args), "suite.json"), text + "\n")
    else:
        print(text)
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    specs = resolve_algorithms(args.algorithms.split(","), cfg)
    out = _out_dir(args)
    results = execute_runs(cfg, specs)
    _atomic_write(os.path.join(out, "suite.json"),
                  json.dumps(suite_manifest(cfg.dimension, cfg.suite_seed),
                             indent=1, sort_keys=True) + "\n")
    for spec in specs:
        write_results_csv(os.path.join(out, f"results_{spec.name}.csv"),
                          results[spec.name])
        if not args.no_traces:
            write_traces(out, results[spec.name])
    print(f"wrote {sum(len(v) for v in results.values())} runs to {out}")
    return 0


def cmd_compare(args) -> int:
    rows = []
    for path in args.csv:
        rows.extend(read_results_csv(path))
    errors = errors_by_problem(rows)
    considered = args.considered or next(iter(errors))
    report = build_comparison(errors, considered, args.alpha)
    if args.format == "json":
        text = json.dumps(report, indent=1, sort_keys=True)
    else:
        text = comparison_text(report)
    if args.out:
        name = "compare.json" if args.format == "json" else "compare.txt"
        _atomic_write(os.path.join(_out_dir(args), name), text + "\n")
        print(f"wrote comparison to {_out_dir(args)}/{name}")
    else:
        print(text)
    return 0


def cmd_motivate(args) -> int:
    cfg = _config_from_args(args)
    specs = resolve_algorithms(["de-rand-1", "de-best-1"], cfg)
    out = _out_dir(args)
    results = execute_runs(cfg, specs)
    for spec in specs:
        write_results_csv(os.path.join(out, f"results_{spec.name}.csv"),
                          results[spec.name])
    report = build_ar_report(results, cfg.resolved_np)
    _atomic_write(os.path.join(out, "ar_report.csv"), ar_report_csv(report))
    _atomic_write(os.path.join(out, "rank_frequency.csv"), frequency_csv(report))
    print(f"ar_expected={report['ar_expected']} -> {out}/ar_report.csv")
    return 0


def cmd_sweep_n(args) -> int:
    cfg = _config_from_args(args)
    settings: List[AlgorithmSpec] = []
    base = builtin_algorithms()["mlcc"]
    baseline = replace(base, name="mlcc-n0.05", n_top=DEFAULT_N_TOP, update=cfg.update)
    settings.append(baseline)
    for n_val in (args.n_values.split(",") if args.n_values else []):
        n = float(n_val)
        if not 0.0 < n <= 1.0:
            raise CliError(f"N must lie in (0, 1], got {n}")
        if abs(n - DEFAULT_N_TOP) < 1e-12:
            continue
        settings.append(replace(base, name=f"mlcc-n{n_val}", n_top=n, update=cfg.update))
    for tg in (args.top_g.split(",") if args.top_g else []):
        override = "NP" if tg.upper() == "NP" else int(tg)
        settings.append(replace(base, name=f"mlcc-topg{tg.lower()}",
                                top_g_override=override, update=cfg.update))
    if len(settings) < 2:
        raise CliError("sweep-n needs at least one non-baseline setting")
    out = _out_dir(args)
    results = execute_runs(cfg, settings)
    for spec in settings:
        write_results_csv(os.path.join(out, f"results_{spec.name}.csv"),
                          results[spec.name])
    errors = errors_by_problem([
        {"algorithm": r.algorithm, "problem": r.problem, "seed": r.seed,
         "final_error": r.final_error, "evaluations": r.evaluations}
        for recs in results.values() for r in recs])
    report = build_comparison(errors, baseline.name, args.alpha)
    text = json.dumps(report, indent=1, sort_keys=True) if args.format == "json" \
        else comparison_text(report)
    name = "sweep_n.json" if args.format == "json" else "sweep_n.txt"
    _atomic_write(os.path.join(out, name), text + "\n")
    print(f"wrote {len(settings) - 1} setting comparisons to {out}/{name}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    names = ["mlcc", "variant-i", "variant-ii", "variant-iii", "variant-iv",
             "shade-only", "bide-only"]
    specs = resolve_algorithms(names, cfg)
    out = _out_dir(args)
    results = execute_runs(cfg, specs)
    for spec in specs:
        write_results_csv(os.path.join(out, f"results_{spec.name}.csv"),
                          results[spec.name])
    errors = errors_by_problem([
        {"algorithm": r.algorithm, "problem": r.problem, "seed": r.seed,
         "final_error": r.final_error, "evaluations": r.evaluations}
        for recs in results.values() for r in recs])
    variants = ["mlcc", "variant-i", "variant-ii", "variant-iii", "variant-iv"]
    baselines = ["shade-only", "bide-only"]
    summary = {}
    for variant in variants:
        total = 0
        per_baseline = {}
        for baseline in baselines:
            pair = {variant: errors[variant], baseline: errors[baseline]}
            rep = build_comparison(pair, variant, args.alpha)
            row = rep["sign_rows"][baseline]
            per_baseline[baseline] = row
            total += row["p_n"]
        summary[variant] = {"vs": per_baseline, "total_p_n": total}
    report = {"schema": "mlccde-ablate-v1", "alpha": args.alpha, "summary": summary}
    _atomic_write(os.path.join(out, "ablate.json"),
                  json.dumps(report, indent=1, sort_keys=True) + "\n")
    for variant in variants:
        print(f"{variant}: total P-N = {summary[variant]['total_p_n']}")
    return 0


# -- argument parsing ---------------------------------------------------------

def _add_common(parser, runs_default=None):
    parser.add_argument("--config", help="YAML experiment config")
    parser.add_argument("--seed", type=int, help="base seed (run r uses seed base+r)")
    parser.add_argument("--runs", type=int, default=runs_default)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or ./out)")
    parser.add_argument("--dimension", type=int)
    parser.add_argument("--suite-seed", dest="suite_seed", type=int)
    parser.add_argument("--budget-multiplier", dest="budget_multiplier", type=int)
    parser.add_argument("--problems", help="comma-separated problem id subset")
    parser.add_argument("--update", choices=("generational", "immediate"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlccde",
                                     description="multi-layer DE experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("suite", help="export the benchmark suite manifest")
    _add_common(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("run", help="execute seeded replicated runs")
    p.add_argument("--algorithms", required=True,
                   help="comma-separated algorithm names")
    p.add_argument("--no-traces", action="store_true",
                   help="skip per-run JSON trace files")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="statistical comparison of result CSVs")
    p.add_argument("csv", nargs="+", help="result CSVs (>= 2 algorithms)")
    p.add_argument("--considered", help="reference algorithm (default: first seen)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("motivate", help="rank-archive study of the classic DEs")
    _add_common(p, runs_default=None)
    p.set_defaults(func=cmd_motivate)

    p = sub.add_parser("sweep-n", help="sensitivity to the head fraction N")
    p.add_argument("--n-values", default="0.1,0.2,0.5,1.0",
                   help="comma-separated N settings (baseline 0.05 always runs)")
    p.add_argument("--top-g", default="", help="constant top_g overrides, e.g. 1,NP")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--format", choices=("json", "text"), default="json")
    _add_common(p)
    p.set_defaults(func=cmd_sweep_n)

    p = sub.add_parser("ablate", help="framework variants vs single-layer baselines")
    p.add_argument("--alpha", type=float, default=0.05)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

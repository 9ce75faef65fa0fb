"""Config-driven experiment runner.

Verbs:

* ``analyze``  — closed-form coverage metrics at the configured policy
  (single-sensor pre-charged scenarios only).
* ``simulate`` — Monte Carlo coverage estimate at the configured policy.
* ``optimize`` — best sensing/offloading probabilities (closed form for
  the single kind, simulation grid search for the harvesting kind).
* ``sweep``    — per sweep value, the optimised closed form plus a Monte
  Carlo check (single kind) or the configured policy's simulation
  estimate (multi kind).
* ``validate`` — closed form vs an independent renewal Monte Carlo
  across every reachable age-budget regime; nonzero exit on mismatch.
* ``report``   — runs the sweep (or a single traced episode when no
  sweep is configured) and renders PNG figures next to the CSV.
* ``serve-env``— line-delimited JSON environment sessions over
  stdin/stdout or TCP.

All runner verbs write ``manifest.json`` (resolved config, seeds, and
package version — no timestamps) beside their outputs, and their CSV
files are byte-stable given identical config and seeds.  Environment
variables: ``FRESHCOV_OUT`` overrides the output directory and
``FRESHCOV_JOBS`` sets sweep-point parallelism; nothing else is read.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .analysis import (
    UnreachableTarget,
    _case_label,
    conditional_mode_prob,
    eta_coverage_closed_form,
    optimize_multi,
    optimize_single,
    p_update,
    violation_time_conditional,
)
from .config import (
    SINGLE_PRECHARGED,
    ConfigError,
    ExperimentConfig,
    ScenarioConfig,
    apply_sweep_value,
    load_experiment,
)
from .model import outage_probability
from .oracles import renewal_violation_mc
from .params import MODE_EDGE, MODE_LOCAL
from .policies import PolicySpec
from .simulator import run_episode

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_VALIDATION",
    "main",
    "run_sweep",
    "validate_analysis",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3

SWEEP_COLUMNS = [
    "sweep_axis",
    "sweep_value",
    "method",
    "eta_coverage",
    "half_width",
    "p_s",
    "p_e",
    "share_edge",
    "share_local",
    "share_idle",
]

ANALYZE_COLUMNS = SWEEP_COLUMNS + [
    "target_aoi_slots",
    "p_update",
    "expected_inter_update",
    "violation_prob",
]

OPTIMIZE_COLUMNS = [
    "sweep_axis",
    "sweep_value",
    "kind",
    "p_s",
    "p_e",
    "eta_coverage",
    "half_width",
]

VALIDATE_COLUMNS = [
    "v_th_slots",
    "regimes",
    "closed_form",
    "monte_carlo",
    "abs_dev",
    "rel_dev",
    "tolerance_abs",
    "tolerance_rel",
    "pass",
]


# -- small utilities ---------------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in header])


def write_manifest(
    out_dir: str,
    verb: str,
    exp: ExperimentConfig,
    outputs: Sequence[str],
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    doc: Dict[str, Any] = {
        "version": __version__,
        "verb": verb,
        "config": exp.to_dict(),
        "seeds": list(exp.resolved_seeds()),
        "outputs": sorted(os.path.basename(item) for item in outputs),
    }
    if extra:
        doc.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _jobs() -> int:
    try:
        return max(1, int(os.environ.get("FRESHCOV_JOBS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items: Sequence[Any]) -> List[Any]:
    """Deterministic-order map, optionally across processes."""
    jobs = _jobs()
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _sweep_points(exp: ExperimentConfig) -> List[Tuple[Optional[Any], ScenarioConfig]]:
    if exp.sweep_axis is None:
        return [(None, exp.scenario)]
    return [
        (value, apply_sweep_value(exp.scenario, exp.sweep_axis, value))
        for value in exp.sweep_values
    ]


def _policy_probs(spec: PolicySpec) -> Optional[Tuple[float, float]]:
    if spec.kind == "probability-scd":
        return spec.sense_prob, spec.edge_prob
    if spec.kind == "always-mode":
        return spec.sense_prob, 1.0 if spec.mode == MODE_EDGE else 0.0
    if spec.kind == "cic-variant":
        return _policy_probs(spec.inner)  # type: ignore[arg-type]
    return None


# -- shared computations -------------------------------------------------------


def _closed_form_row(
    axis: Optional[str], value: Any, scenario: ScenarioConfig, p_s: float, p_e: float
) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "sweep_axis": axis or "",
        "sweep_value": value,
        "method": "closed-form",
        "p_s": p_s,
        "p_e": p_e,
        "share_edge": p_s * p_e,
        "share_local": p_s * (1.0 - p_e),
        "share_idle": 1.0 - p_s,
        "half_width": None,
    }
    try:
        result = eta_coverage_closed_form(scenario.to_single_scenario(), p_s, p_e)
    except UnreachableTarget:
        # The coverage target cannot be met by any policy here.
        row.update(
            eta_coverage=0.0,
            target_aoi_slots=None,
            p_update=None,
            expected_inter_update=None,
            violation_prob=1.0,
        )
        return row
    row.update(
        eta_coverage=result.eta_coverage,
        target_aoi_slots=result.target_aoi_slots,
        p_update=result.p_update,
        expected_inter_update=(
            result.expected_inter_update
            if math.isfinite(result.expected_inter_update)
            else None
        ),
        violation_prob=result.violation_prob,
    )
    return row


def _simulate_stats(args: Tuple[ScenarioConfig, PolicySpec, Sequence[int]]) -> Dict[str, Any]:
    scenario, spec, seeds = args
    hits = 0
    total = 0
    means: List[float] = []
    counts = np.zeros(3, dtype=np.int64)
    coverage_sum = 0.0
    for seed in seeds:
        trace = run_episode(scenario, spec, seed)
        indicator = trace.coverage_indicator()
        means.append(float(indicator.mean()))
        hits += int(indicator.sum())
        total += indicator.size
        coverage_sum += float(trace.coverage.sum())
        for code in range(3):
            counts[code] += int((trace.decisions == code).sum())
    p_hat = hits / total if total else 0.0
    if len(means) > 1:
        mean = sum(means) / len(means)
        var = sum((m - mean) ** 2 for m in means) / (len(means) - 1)
        half_width = 1.96 * math.sqrt(var / len(means))
    else:
        half_width = 1.96 * math.sqrt(max(p_hat * (1 - p_hat), 0.0) / max(total, 1))
    n_dec = int(counts.sum())
    return {
        "eta_coverage": p_hat,
        "half_width": half_width,
        "mean_coverage": coverage_sum / total if total else 0.0,
        "share_edge": counts[0] / n_dec if n_dec else 0.0,
        "share_local": counts[1] / n_dec if n_dec else 0.0,
        "share_idle": counts[2] / n_dec if n_dec else 0.0,
        "replications": len(means),
        "slots": total,
    }


def _simulation_row(
    axis: Optional[str],
    value: Any,
    scenario: ScenarioConfig,
    spec: PolicySpec,
    seeds: Sequence[int],
) -> Dict[str, Any]:
    stats = _simulate_stats((scenario, spec, seeds))
    probs = _policy_probs(spec)
    row = {
        "sweep_axis": axis or "",
        "sweep_value": value,
        "method": "simulation",
        "p_s": probs[0] if probs else None,
        "p_e": probs[1] if probs else None,
    }
    row.update(stats)
    return row


def _sweep_single_worker(
    args: Tuple[Optional[str], Any, ScenarioConfig, Sequence[int]]
) -> List[Dict[str, Any]]:
    axis, value, scenario, seeds = args
    try:
        optimum = optimize_single(scenario.to_single_scenario())
    except UnreachableTarget:
        return [_closed_form_row(axis, value, scenario, 0.0, 0.0)]
    closed = _closed_form_row(axis, value, scenario, optimum.p_s, optimum.p_e)
    sim = _simulation_row(
        axis,
        value,
        scenario,
        PolicySpec.probability(optimum.p_s, optimum.p_e),
        seeds,
    )
    return [closed, sim]


def _sweep_multi_worker(
    args: Tuple[Optional[str], Any, ScenarioConfig, PolicySpec, Sequence[int]]
) -> List[Dict[str, Any]]:
    axis, value, scenario, spec, seeds = args
    return [_simulation_row(axis, value, scenario, spec, seeds)]


def run_sweep(exp: ExperimentConfig) -> List[Dict[str, Any]]:
    """Sweep rows: optimum + Monte Carlo check (single) or policy MC (multi)."""
    points = _sweep_points(exp)
    seeds = exp.resolved_seeds()
    if exp.scenario.kind == SINGLE_PRECHARGED:
        tasks = [(exp.sweep_axis, v, s, seeds) for v, s in points]
        nested = _pmap(_sweep_single_worker, tasks)
    else:
        tasks = [(exp.sweep_axis, v, s, exp.policy, seeds) for v, s in points]
        nested = _pmap(_sweep_multi_worker, tasks)
    return [row for rows in nested for row in rows]


# -- validation ----------------------------------------------------------------


def _validation_budgets(scenario: ScenarioConfig) -> List[Tuple[int, str]]:
    """Smallest set of age budgets hitting every reachable formula regime."""
    timing = scenario.timing
    delta = scenario.ch.max_retx
    taus = {
        MODE_EDGE: timing.compute_slots_edge,
        MODE_LOCAL: timing.compute_slots_local,
    }
    pairs = [(p, c) for p in (MODE_EDGE, MODE_LOCAL) for c in (MODE_EDGE, MODE_LOCAL)]
    horizon = 3 * timing.round_len + max(taus.values()) + delta + 5
    chosen: List[Tuple[int, str]] = []
    seen: set = set()
    for budget in range(1, horizon):
        labels = {
            _case_label(budget, taus[p], taus[c], delta, timing.round_len)
            for p, c in pairs
        }
        if labels - seen:
            seen |= labels
            chosen.append((budget, "+".join(str(x) for x in sorted(labels))))
        if seen == {1, 2, 3, 4, 5}:
            break
    return chosen


def _closed_pc_at_budget(
    budget: int, p_s: float, p_e: float, scenario: ScenarioConfig
) -> float:
    poe = outage_probability(MODE_EDGE, scenario.sensor_sink_distance, scenario.ch)
    pol = outage_probability(MODE_LOCAL, scenario.sensor_sink_distance, scenario.ch)
    delta = scenario.ch.max_retx
    timing = scenario.timing
    p_x = p_update(p_s, p_e, poe, pol, delta)
    if p_x == 0.0:
        return 0.0
    w_edge, w_local = conditional_mode_prob(p_e, poe, pol, delta)
    weights = {MODE_EDGE: w_edge, MODE_LOCAL: w_local}
    total = 0.0
    for prev in (MODE_EDGE, MODE_LOCAL):
        for cur in (MODE_EDGE, MODE_LOCAL):
            wt = weights[prev] * weights[cur]
            if wt == 0.0:
                continue
            total += wt * violation_time_conditional(
                budget,
                prev,
                cur,
                p_x,
                poe,
                pol,
                delta,
                timing.round_len,
                timing.compute_slots_edge,
                timing.compute_slots_local,
            )
    fraction = min(max(total * p_x / timing.round_len, 0.0), 1.0)
    return 1.0 - fraction


def validate_analysis(
    exp: ExperimentConfig, rounds: int = 400_000
) -> Tuple[List[Dict[str, Any]], float, bool]:
    """Closed form vs independent renewal Monte Carlo per budget regime.

    Returns (rows, max absolute deviation, all passed).  A row passes when
    the deviation is within 0.005 absolute or 2% relative.
    """
    scenario = exp.scenario
    if scenario.kind != SINGLE_PRECHARGED:
        raise ConfigError("validate requires the single-precharged kind")
    probs = _policy_probs(exp.policy)
    if probs is None:
        raise ConfigError("validate requires a probability-style policy")
    p_s, p_e = probs
    poe = outage_probability(MODE_EDGE, scenario.sensor_sink_distance, scenario.ch)
    pol = outage_probability(MODE_LOCAL, scenario.sensor_sink_distance, scenario.ch)
    delta = scenario.ch.max_retx
    timing = scenario.timing
    seed = exp.resolved_seeds()[0]
    tol_abs, tol_rel = 0.005, 0.02

    rows: List[Dict[str, Any]] = []
    max_dev = 0.0
    all_pass = True
    for budget, regimes in _validation_budgets(scenario):
        closed = _closed_pc_at_budget(budget, p_s, p_e, scenario)
        stats = renewal_violation_mc(
            p_s,
            p_e,
            poe,
            pol,
            delta,
            timing.round_len,
            timing.compute_slots_edge,
            timing.compute_slots_local,
            budget,
            rounds=rounds,
            seed=seed,
        )
        mc = 1.0 - stats.violation_prob if stats is not None else 0.0
        dev = abs(closed - mc)
        rel = dev / closed if closed > 0 else (0.0 if dev == 0.0 else math.inf)
        ok = dev <= tol_abs or rel <= tol_rel
        max_dev = max(max_dev, dev)
        all_pass = all_pass and ok
        rows.append(
            {
                "v_th_slots": budget,
                "regimes": regimes,
                "closed_form": closed,
                "monte_carlo": mc,
                "abs_dev": dev,
                "rel_dev": None if math.isinf(rel) else rel,
                "tolerance_abs": tol_abs,
                "tolerance_rel": tol_rel,
                "pass": ok,
            }
        )
    return rows, max_dev, all_pass


# -- verb runners ---------------------------------------------------------------


def _resolve_out_dir(exp: ExperimentConfig, cli_out: Optional[str]) -> str:
    out = os.environ.get("FRESHCOV_OUT") or cli_out or exp.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_analyze(exp: ExperimentConfig, out_dir: str) -> int:
    if exp.scenario.kind != SINGLE_PRECHARGED:
        raise ConfigError("analyze requires the single-precharged kind")
    probs = _policy_probs(exp.policy)
    if probs is None:
        raise ConfigError("analyze requires a probability-style policy")
    rows = [
        _closed_form_row(exp.sweep_axis, value, scenario, probs[0], probs[1])
        for value, scenario in _sweep_points(exp)
    ]
    path = os.path.join(out_dir, "analyze.csv")
    write_csv(path, ANALYZE_COLUMNS, rows)
    write_manifest(out_dir, "analyze", exp, [path])
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def _cmd_simulate(exp: ExperimentConfig, out_dir: str) -> int:
    seeds = exp.resolved_seeds()
    rows = [
        _simulation_row(exp.sweep_axis, value, scenario, exp.policy, seeds)
        for value, scenario in _sweep_points(exp)
    ]
    path = os.path.join(out_dir, "simulate.csv")
    header = SWEEP_COLUMNS + ["mean_coverage", "replications", "slots"]
    write_csv(path, header, rows)
    write_manifest(out_dir, "simulate", exp, [path])
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def _cmd_optimize(exp: ExperimentConfig, out_dir: str, grid_step: Optional[float]) -> int:
    rows = []
    for value, scenario in _sweep_points(exp):
        if scenario.kind == SINGLE_PRECHARGED:
            best = optimize_single(scenario.to_single_scenario())
            rows.append(
                {
                    "sweep_axis": exp.sweep_axis or "",
                    "sweep_value": value,
                    "kind": scenario.kind,
                    "p_s": best.p_s,
                    "p_e": best.p_e,
                    "eta_coverage": best.eta_coverage,
                    "half_width": None,
                }
            )
        else:
            grid = None
            if grid_step is not None:
                n = int(round(1.0 / grid_step))
                values = [min(1.0, round(i * grid_step, 10)) for i in range(n + 1)]
                grid = (values, values)
            best = optimize_multi(
                scenario,
                grid=grid,
                replications=exp.replications,
                base_seed=exp.resolved_seeds()[0],
            )
            rows.append(
                {
                    "sweep_axis": exp.sweep_axis or "",
                    "sweep_value": value,
                    "kind": scenario.kind,
                    "p_s": best.p_s,
                    "p_e": best.p_e,
                    "eta_coverage": best.eta_coverage,
                    "half_width": best.half_width,
                }
            )
    path = os.path.join(out_dir, "optimize.csv")
    write_csv(path, OPTIMIZE_COLUMNS, rows)
    write_manifest(out_dir, "optimize", exp, [path])
    for row in rows:
        print(
            f"optimum p_s={_fmt(row['p_s'])} p_e={_fmt(row['p_e'])} "
            f"coverage={_fmt(row['eta_coverage'])}"
        )
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(exp: ExperimentConfig, out_dir: str) -> int:
    rows = run_sweep(exp)
    path = os.path.join(out_dir, "sweep.csv")
    write_csv(path, SWEEP_COLUMNS + ["mean_coverage", "replications", "slots"], rows)
    write_manifest(out_dir, "sweep", exp, [path])
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def _cmd_validate(exp: ExperimentConfig, out_dir: str, rounds: int) -> int:
    rows, max_dev, all_pass = validate_analysis(exp, rounds=rounds)
    path = os.path.join(out_dir, "validate.csv")
    write_csv(path, VALIDATE_COLUMNS, rows)
    write_manifest(
        out_dir,
        "validate",
        exp,
        [path],
        extra={"max_abs_deviation": max_dev, "passed": all_pass},
    )
    for row in rows:
        print(
            f"v_th={row['v_th_slots']:>3} regimes {row['regimes']:<9} "
            f"closed={_fmt(row['closed_form'])} mc={_fmt(row['monte_carlo'])} "
            f"dev={_fmt(row['abs_dev'])} {'ok' if row['pass'] else 'FAIL'}"
        )
    print(f"max deviation {_fmt(max_dev)}: {'pass' if all_pass else 'FAIL'}")
    return EXIT_OK if all_pass else EXIT_VALIDATION


def _cmd_report(exp: ExperimentConfig, out_dir: str) -> int:
    from .report import render_sweep_figure, render_trace_figure

    outputs: List[str] = []
    if exp.sweep_axis is not None:
        rows = run_sweep(exp)
        csv_path = os.path.join(out_dir, "sweep.csv")
        write_csv(csv_path, SWEEP_COLUMNS + ["mean_coverage", "replications", "slots"], rows)
        fig_path = os.path.join(out_dir, "report.png")
        render_sweep_figure(rows, exp.sweep_axis, fig_path)
        outputs += [csv_path, fig_path]
    else:
        trace = run_episode(exp.scenario, exp.policy, exp.resolved_seeds()[0])
        csv_path = os.path.join(out_dir, "trace.csv")
        trace.to_csv(csv_path)
        summary_path = os.path.join(out_dir, "trace_summary.json")
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(trace.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        fig_path = os.path.join(out_dir, "trace.png")
        render_trace_figure(trace, exp.scenario.target_ratio, fig_path)
        outputs += [csv_path, summary_path, fig_path]
    write_manifest(out_dir, "report", exp, outputs)
    for item in outputs:
        print(f"wrote {item}")
    return EXIT_OK


def _cmd_serve_env(tcp: Optional[str]) -> int:
    from .bridge import serve_stdio, serve_tcp

    if tcp is None:
        serve_stdio()
        return EXIT_OK
    host, _, port_text = tcp.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"--tcp expects HOST:PORT, got {tcp!r}") from None
    server = serve_tcp(host or "127.0.0.1", port)
    bound = server.server_address
    print(f"listening on {bound[0]}:{bound[1]}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freshcov",
        description="Freshness-coverage analysis, simulation, and environment service.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def with_config(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory override")
        return p

    with_config("analyze", "closed-form metrics at the configured policy")
    with_config("simulate", "Monte Carlo estimate at the configured policy")
    opt = with_config("optimize", "search the best sensing/offloading probabilities")
    opt.add_argument(
        "--grid-step",
        type=float,
        default=None,
        help="probability grid step for the simulation search",
    )
    with_config("sweep", "optimum + Monte Carlo check per sweep value")
    val = with_config("validate", "closed form vs independent Monte Carlo")
    val.add_argument(
        "--rounds", type=int, default=400_000, help="Monte Carlo rounds per budget"
    )
    with_config("report", "run the sweep or a traced episode and render figures")
    serve = sub.add_parser("serve-env", help="serve the JSON environment protocol")
    serve.add_argument(
        "--tcp",
        metavar="HOST:PORT",
        default=None,
        help="serve over TCP instead of stdin/stdout (port 0 picks one)",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "serve-env":
            return _cmd_serve_env(args.tcp)
        exp = load_experiment(args.config)
        out_dir = _resolve_out_dir(exp, args.out)
        if args.verb == "analyze":
            return _cmd_analyze(exp, out_dir)
        if args.verb == "simulate":
            return _cmd_simulate(exp, out_dir)
        if args.verb == "optimize":
            return _cmd_optimize(exp, out_dir, args.grid_step)
        if args.verb == "sweep":
            return _cmd_sweep(exp, out_dir)
        if args.verb == "validate":
            return _cmd_validate(exp, out_dir, args.rounds)
        if args.verb == "report":
            return _cmd_report(exp, out_dir)
        raise AssertionError(f"unhandled verb {args.verb!r}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

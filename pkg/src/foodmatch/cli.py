"""Command-line interface.

Subcommands: generate, run, experiment {fig8a,fig8b,fig8c,fig8d},
oracle {pareto,strategyproof}, check-gamma. Exit codes: 0 success,
1 usage or validation error, 2 a declared property was violated.
The FDRM_SEED environment variable overrides --seed everywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .engine import MatchPolicy, OrchestratorConfig
from .experiments import (
    desk_policy_config,
    desk_volunteer_sweep_config,
    experiment_allocation_vs_volunteers,
    experiment_manipulation,
    experiment_preference_updating,
    experiment_receiver_sorting,
)
from .model import DonationRequest, RequirementRequest, Thresholds
from .oracles import (
    Instance,
    brute_force_pareto_oracle,
    exhaustive_misreports,
    gamma_violations,
    run_instance,
)
from .output import render_line_chart, write_csv, write_svg
from .scenario import (
    Scenario,
    ScenarioConfig,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_from_json,
)
from .simulate import AcceptanceModel, SimReport, run_simulation

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2

THRESHOLD_FLAGS = (
    ("--t-o", "t_o", int),
    ("--t-l", "t_l", float),
    ("--t-m", "t_m", int),
    ("--t-a", "t_a", float),
    ("--t-p-nm", "t_p_nm", float),
    ("--t-p-m", "t_p_m", float),
    ("--t-np", "t_np", float),
    ("--t-d", "t_d", int),
    ("--t-r", "t_r", int),
    ("--t-w", "t_w", int),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_threshold_flags(parser: argparse.ArgumentParser) -> None:
    for flag, dest, kind in THRESHOLD_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)


def _thresholds_from_args(args, base: Thresholds) -> Thresholds:
    overrides = {dest: getattr(args, dest) for _, dest, _ in THRESHOLD_FLAGS if getattr(args, dest) is not None}
    return replace(base, **overrides) if overrides else base


def _effective_seed(args) -> int:
    env = os.environ.get("FDRM_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _policy_from_args(args) -> MatchPolicy:
    return MatchPolicy(receiver_sort=args.receiver_sort, preferences=args.preferences)


def _acceptance_from_args(args, seed: int) -> AcceptanceModel:
    return AcceptanceModel(
        rejection_probability=args.reject_prob,
        no_response_probability=args.no_response_prob,
        seed=seed,
    )


def _load_scenario_with_overrides(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    thresholds = _thresholds_from_args(args, scenario.config.thresholds)
    if thresholds != scenario.config.thresholds:
        scenario = Scenario(config=replace(scenario.config, thresholds=thresholds), requests=scenario.requests)
    return scenario


def build_parser() -> _Parser:
    parser = _Parser(prog="foodmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a scenario file")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--requests", type=int, default=5000)
    gen.add_argument("--mix", default="0.3,0.4,0.3", help="donor,receiver,volunteer fractions")
    gen.add_argument(
        "--preset",
        choices=("uniform", "corridor", "deadlines"),
        default="uniform",
        help="uniform city, the volunteer-sweep rescue corridor, or the "
        "tight-deadline policy city",
    )
    gen.add_argument("--out", required=True)
    _add_threshold_flags(gen)

    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--scenario", required=True)
    run.add_argument("--receiver-sort", choices=("end", "start"), default="end")
    run.add_argument("--preferences", choices=("eligible", "raw"), default="eligible")
    run.add_argument("--reject-prob", type=float, default=0.0)
    run.add_argument("--no-response-prob", type=float, default=0.0)
    run.add_argument("--seed", type=int, default=0, help="acceptance-model seed")
    run.add_argument("--tick", type=int, default=5)
    run.add_argument("--out", required=True, help="output directory")
    _add_threshold_flags(run)

    exp = sub.add_parser("experiment", help="reproduce one simulation experiment")
    exp.add_argument("which", choices=("fig8a", "fig8b", "fig8c", "fig8d"))
    exp.add_argument("--scenario", required=True)
    exp.add_argument("--out", required=True, help="output directory")
    exp.add_argument("--multiples", default="0.25,0.5,1,2,4")
    exp.add_argument("--seeds", type=int, default=20)
    exp.add_argument("--fraction", type=float, default=20.0)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--tick", type=int, default=5)
    _add_threshold_flags(exp)

    oracle = sub.add_parser("oracle", help="run a brute-force property check")
    oracle.add_argument("which", choices=("pareto", "strategyproof"))
    oracle.add_argument("--instance", required=True)
    oracle.add_argument("--at", type=int, default=None, help="iteration minute override")

    gamma = sub.add_parser("check-gamma", help="verify the off-routing bound on a full run")
    gamma.add_argument("--scenario", required=True)
    gamma.add_argument("--seed", type=int, default=0)
    gamma.add_argument("--tick", type=int, default=5)
    _add_threshold_flags(gamma)

    return parser


# ---------------------------------------------------------------------------
# Command bodies
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    try:
        fractions = tuple(float(f) for f in args.mix.split(","))
        if len(fractions) != 3:
            raise ValueError("mix must have three comma-separated fractions")
        seed = _effective_seed(args)
        if args.preset == "corridor":
            config = desk_volunteer_sweep_config(seed=seed, n_requests=args.requests)
        elif args.preset == "deadlines":
            config = desk_policy_config(seed=seed, n_requests=args.requests)
        else:
            config = ScenarioConfig(
                n_requests=args.requests,
                donor_fraction=fractions[0],
                receiver_fraction=fractions[1],
                volunteer_fraction=fractions[2],
                seed=seed,
            )
        config = replace(config, thresholds=_thresholds_from_args(args, config.thresholds))
        scenario = generate_scenario(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}: {len(scenario.requests)} requests")
    return EXIT_OK


def _report_rows(report: SimReport) -> list[tuple]:
    rows = [
        ("donors", report.counts["donors"]),
        ("receivers", report.counts["receivers"]),
        ("volunteers", report.counts["volunteers"]),
        ("meals", report.counts["meals"]),
        ("allocation_donors_pct", round(report.allocation["donors"], 4)),
        ("allocation_receivers_pct", round(report.allocation["receivers"], 4)),
        ("allocation_volunteers_pct", round(report.allocation["volunteers"], 4)),
        ("allocation_overall_pct", round(report.allocation["overall"], 4)),
        ("allocation_food_requests_pct", round(report.allocation["food_requests"], 4)),
        ("receiver_fulfillment_pct", round(report.fulfillment_pct, 4)),
        ("served_grams", report.served_grams),
        ("requested_grams", report.requested_grams),
        ("deliveries", len(report.deliveries)),
        ("max_overhead_pct", round(max((d.overhead_pct for d in report.deliveries), default=0.0), 6)),
    ]
    rows.extend((f"matches_{status}", count) for status, count in sorted(report.match_counts.items()))
    return rows


def _cmd_run(args) -> int:
    try:
        scenario = _load_scenario_with_overrides(args)
        seed = _effective_seed(args)
        report = run_simulation(
            scenario,
            policy=_policy_from_args(args),
            acceptance=_acceptance_from_args(args, seed),
            orchestrator=OrchestratorConfig(tick_minutes=args.tick),
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "report.csv", ("metric", "value"), _report_rows(report))
    write_csv(
        out / "deliveries.csv",
        ("route_km", "pickup_km", "dropoff_km", "overhead_km", "overhead_pct"),
        [
            (round(d.route_length, 6), round(d.pickup_km, 6), round(d.dropoff_km, 6),
             round(d.overhead_km, 6), round(d.overhead_pct, 6))
            for d in report.deliveries
        ],
    )
    (out / "report.json").write_text(
        json.dumps(
            {
                "counts": report.counts,
                "allocation": {k: round(v, 6) for k, v in report.allocation.items()},
                "fulfillment_pct": round(report.fulfillment_pct, 6),
                "match_counts": report.match_counts,
                "lifecycle_consistent": report.lifecycle_consistent,
                "terminal_state_totals": _state_totals(report),
            },
            indent=1,
            sort_keys=True,
        )
    )
    print(f"wrote {out}/report.csv, deliveries.csv, report.json")
    return EXIT_OK


def _state_totals(report: SimReport) -> dict[str, int]:
    totals: dict[str, int] = {}
    for state in report.terminal_states.values():
        totals[state] = totals.get(state, 0) + 1
    return totals


def _cmd_experiment(args) -> int:
    try:
        scenario = _load_scenario_with_overrides(args)
        config = scenario.config
        seed = _effective_seed(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        orchestrator = OrchestratorConfig(tick_minutes=args.tick)

        if args.which == "fig8a":
            multiples = [float(m) for m in args.multiples.split(",")]
            points = experiment_allocation_vs_volunteers(
                config, multiples, orchestrator=orchestrator
            )
            write_csv(
                out / "fig8a.csv",
                ("multiple", "volunteers", "allocation_pct", "receiver_fulfillment_pct"),
                [
                    (p.multiple, p.n_volunteers, round(p.allocation_pct, 4), round(p.receiver_fulfillment_pct, 4))
                    for p in points
                ],
            )
            svg = render_line_chart(
                [("allocation", [(p.multiple, p.allocation_pct) for p in points])],
                "Agent Allocation vs Volunteer Availability",
                "volunteers (multiples of donors)",
                "allocation (% of food requests)",
            )
            write_svg(out / "fig8a.svg", svg)
            print(f"wrote {out}/fig8a.csv, fig8a.svg ({len(points)} points)")
            return EXIT_OK

        seeds = list(range(seed, seed + args.seeds))
        if args.which == "fig8b":
            rows = experiment_receiver_sorting(config, seeds, orchestrator=orchestrator)
            labels = ("start_sort_pct", "end_sort_pct")
            name = "fig8b"
            title = "Start vs End Sorting for Receivers"
        elif args.which == "fig8c":
            rows = experiment_preference_updating(config, seeds, orchestrator=orchestrator)
            labels = ("raw_preferences_pct", "eligible_preferences_pct")
            name = "fig8c"
            title = "Original vs Eligible Preferences"
        else:
            report = experiment_manipulation(config, args.fraction, orchestrator=orchestrator, scenario=scenario)
            write_csv(
                out / "fig8d.csv",
                ("agent_id", "role", "truthful_rank", "manipulated_rank", "gain", "exception"),
                [
                    (o.agent_id, o.role, o.truthful_rank, o.manipulated_rank, o.gain, int(o.exception))
                    for o in report.outcomes
                ],
            )
            svg = render_line_chart(
                [("rank gain", [(i, o.gain) for i, o in enumerate(report.outcomes)])],
                "Results of Manipulation of Agent Preferences",
                "manipulator",
                "true-preference rank gain",
            )
            write_svg(out / "fig8d.svg", svg)
            print(
                f"wrote {out}/fig8d.csv, fig8d.svg: {report.manipulators} manipulators, "
                f"mean gain {report.mean_gain:.4f}, exception rate {report.exception_rate_pct:.2f}%, "
                f"hard violations {len(report.hard_violations)}"
            )
            return EXIT_VIOLATION if report.hard_violations else EXIT_OK

        write_csv(
            out / f"{name}.csv",
            ("seed",) + labels,
            [(r.seed, round(r.baseline_pct, 4), round(r.variant_pct, 4)) for r in rows],
        )
        svg = render_line_chart(
            [
                (labels[0], [(r.seed, r.baseline_pct) for r in rows]),
                (labels[1], [(r.seed, r.variant_pct) for r in rows]),
            ],
            title,
            "seed",
            "allocation (% of food requests)",
        )
        write_svg(out / f"{name}.svg", svg)
        wins = sum(1 for r in rows if r.variant_pct >= r.baseline_pct)
        print(f"wrote {out}/{name}.csv, {name}.svg: variant >= baseline on {wins}/{len(rows)} seeds")
        return EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def load_instance(path: str, at: Optional[int] = None) -> Instance:
    """Read a one-shot oracle instance from a scenario-format JSON file.

    The optional top-level "at" key (or the --at flag) fixes the iteration
    minute; without it, the latest gate-opening minute is used.
    """
    payload = json.loads(Path(path).read_text())
    scenario = scenario_from_json(json.dumps({
        "config": payload.get("config", {}),
        "requests": payload.get("requests", []),
    }))
    thresholds = scenario.config.thresholds
    donors, receivers, vols = [], [], []
    for arrival, timed in enumerate(scenario.requests, start=1):
        request = timed.request
        request.arrival = arrival
        if isinstance(request, DonationRequest):
            donors.append(request)
        elif isinstance(request, RequirementRequest):
            receivers.append(request)
        else:
            vols.append(request)
    now = at if at is not None else payload.get("at")
    if now is None:
        opens = [d.window.start - thresholds.t_d for d in donors]
        opens += [r.window.start - thresholds.t_r for r in receivers]
        if not opens:
            raise ValueError("empty instance")
        now = max(opens)
    return Instance(donors=donors, receivers=receivers, vols=vols, now=int(now), thresholds=thresholds)


def _cmd_oracle(args) -> int:
    try:
        instance = load_instance(args.instance, args.at)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.which == "pareto":
        matches, _ = run_instance(instance)
        verdict = brute_force_pareto_oracle(instance, matches)
        print(verdict.describe())
        return EXIT_OK if verdict.ok else EXIT_VIOLATION
    report = exhaustive_misreports(instance)
    print(
        f"misreports: {report.cases} cases, {len(report.improvements)} improvements, "
        f"{len(report.exceptions)} availability exceptions, "
        f"{len(report.hard_violations)} hard violations"
    )
    for case in report.hard_violations:
        print(
            f"  agent {case.agent_id} ({case.role}) gained {case.gain} "
            f"via {case.misreport}: rank {case.truthful_rank} -> {case.misreport_rank}"
        )
    return EXIT_OK if report.ok() else EXIT_VIOLATION


def _cmd_check_gamma(args) -> int:
    try:
        scenario = _load_scenario_with_overrides(args)
        report = run_simulation(
            scenario,
            acceptance=AcceptanceModel(seed=_effective_seed(args)),
            orchestrator=OrchestratorConfig(tick_minutes=args.tick),
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bad = gamma_violations(report.deliveries, scenario.config.thresholds)
    bound = 4.0 * scenario.config.thresholds.t_l
    worst = max((d.overhead_pct for d in report.deliveries), default=0.0)
    print(
        f"deliveries: {len(report.deliveries)}, bound {bound:.2f}%, "
        f"worst {worst:.4f}%, violations {len(bad)}"
    )
    return EXIT_VIOLATION if bad else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.command == "generate":
        return _cmd_generate(args)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "experiment":
        return _cmd_experiment(args)
    if args.command == "oracle":
        return _cmd_oracle(args)
    if args.command == "check-gamma":
        return _cmd_check_gamma(args)
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

Exit codes follow one convention across subcommands: 0 success,
1 input or validation error, 2 negative verdict (no valid adjustment
set, complete-case analysis invalid, measure not collapsible),
3 numerical failure.  stdout carries only the report; diagnostics go
to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import fixtures
from .estimators import (
    DesignSpec,
    FitError,
    logistic_fit,
    noncompliance_estimands,
    ols_fit,
    positivity_check,
)
from .graph import GraphError, parse_dag
from .ident import CausalQuery, backdoor_paths, classify_roles, enumerate_adjustment_sets
from .missing import missingness_report, parse_mdag
from .scm import (
    Dataset,
    Intervention,
    ModelParseError,
    SimulationError,
    intervene,
    parse_model,
    simulate,
)
from .study import (
    StudyConfig,
    StudyError,
    default_study_config,
    estimates_csv,
    render_bias_table,
    run_study,
)
from .tables import MEASURES, TableError, effect_measure, load_table_csv, render_table

__all__ = ["main", "validate_report", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

SEED_ENV_VAR = "CAUSALREG_SEED"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NEGATIVE = 2
EXIT_NUMERICAL = 3

_REPORT_FIELDS: dict[str, tuple[str, ...]] = {
    "analyze": ("query", "backdoor_paths", "adjustment_sets", "roles"),
    "missingness": (
        "mechanism",
        "witnesses",
        "independencies",
        "complete_case_valid",
        "requires_positivity",
    ),
    "collapse": ("measure", "strata", "marginal", "stratum_weights",
                 "strictly_collapsible", "collapsible"),
    "fit": ("family", "coefficients",),
    "positivity": ("threshold", "min_propensity", "max_propensity", "flagged_rows"),
    "noncompliance": ("itt", "as_treated", "per_protocol", "cace"),
    "study": ("config", "scenarios"),
}


class ReportSchemaError(ValueError):
    pass


def validate_report(doc: dict) -> None:
    """Check that a JSON report parses back into a known schema."""
    if not isinstance(doc, dict):
        raise ReportSchemaError("report must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ReportSchemaError(
            f"unsupported schema_version {doc.get('schema_version')!r}"
        )
    kind = doc.get("report")
    if kind not in _REPORT_FIELDS:
        raise ReportSchemaError(f"unknown report kind {kind!r}")
    missing = [f for f in _REPORT_FIELDS[kind] if f not in doc]
    if missing:
        raise ReportSchemaError(f"{kind} report is missing fields {missing}")


def _emit(doc: dict, output: str | None) -> None:
    validate_report(doc)
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_text(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _read_source(arg: str, kind: str) -> str:
    """Fixture name or path; fixture names win only when no such file exists."""
    registry = {
        "dag": fixtures.DAG_FIXTURES,
        "mdag": fixtures.MDAG_FIXTURES,
        "model": fixtures.MODEL_FIXTURES,
        "table": fixtures.TABLE_FIXTURES,
    }[kind]
    path = Path(arg)
    if path.exists():
        return path.read_text()
    if arg in registry:
        return registry[arg]
    raise FileNotFoundError(f"no file or built-in {kind} fixture named {arg!r}")


def _split_csv_list(arg: str | None) -> tuple[str, ...]:
    if not arg:
        return ()
    return tuple(s.strip() for s in arg.split(",") if s.strip())


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    return int(raw) if raw else 0


def _render_paths(paths) -> list[str]:
    return [p.render() for p in paths]


# --- subcommands -------------------------------------------------------------


def _cmd_analyze(args: argparse.Namespace) -> int:
    dag = parse_dag(_read_source(args.dag, "dag"))
    if args.unmeasured is not None:
        unmeasured = frozenset(_split_csv_list(args.unmeasured))
    else:
        unmeasured = frozenset(n for n in dag.nodes if n.startswith("U"))
    conditioned = frozenset(_split_csv_list(args.conditioned))
    measured = frozenset(dag.nodes) - unmeasured - conditioned
    query = CausalQuery(
        dag=dag,
        exposure=args.exposure,
        outcome=args.outcome,
        measured=measured,
        conditioned=conditioned,
    )
    sets = enumerate_adjustment_sets(
        query, minimal_only=args.minimal, allow_large=args.allow_large
    )
    roles = classify_roles(query, allow_large=args.allow_large)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "report": "analyze",
        "query": {
            "exposure": query.exposure,
            "outcome": query.outcome,
            "measured": sorted(query.measured),
            "unmeasured": sorted(unmeasured),
            "conditioned": sorted(conditioned),
            "nodes": sorted(dag.nodes),
            "edges": [f"{a} -> {b}" for a, b in sorted(dag.edges)],
        },
        "backdoor_paths": _render_paths(backdoor_paths(query)),
        "adjustment_sets": [sorted(s) for s in sets],
        "minimal_only": bool(args.minimal),
        "roles": roles.as_dict(),
    }
    _emit(doc, args.output)
    return EXIT_OK if sets else EXIT_NEGATIVE


def _cmd_missingness(args: argparse.Namespace) -> int:
    mdag = parse_mdag(_read_source(args.mdag, "mdag"))
    if args.covariates is not None:
        covariates = frozenset(_split_csv_list(args.covariates))
    else:
        covariates = mdag.substantive - {args.exposure, args.outcome}
    body = missingness_report(mdag, args.exposure, args.outcome, covariates)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "report": "missingness",
        "query": {
            "exposure": args.exposure,
            "outcome": args.outcome,
            "covariates": sorted(covariates),
        },
        **body,
    }
    _emit(doc, args.output)
    return EXIT_OK if body["complete_case_valid"] else EXIT_NEGATIVE


def _cmd_collapse(args: argparse.Namespace) -> int:
    table = load_table_csv(_read_source(args.table, "table"))
    report = effect_measure(table, args.measure, tolerance=args.tolerance)
    if args.format == "text":
        _emit_text(render_table(table, [report]) + "\n", args.output)
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "report": "collapse",
            **report.as_dict(),
        }
        _emit(doc, args.output)
    return EXIT_OK if report.collapsible else EXIT_NEGATIVE


def _cmd_simulate(args: argparse.Namespace) -> int:
    model = parse_model(_read_source(args.model, "model"), name=args.model)
    for spec in _split_csv_list(args.intervene):
        if "=" not in spec:
            raise ValueError(f"interventions look like NODE=VALUE, got {spec!r}")
        node, _, raw = spec.partition("=")
        model = intervene(model, Intervention(node.strip(), float(raw)))
    data = simulate(model, args.n, args.seed)
    _emit_text(data.to_csv(), args.output)
    return EXIT_OK


def _build_design(args: argparse.Namespace) -> DesignSpec:
    interactions = tuple(
        tuple(pair.split(":")) for pair in _split_csv_list(args.interactions)
    )
    for pair in interactions:
        if len(pair) != 2:
            raise ValueError(f"interactions look like A:B, got {':'.join(pair)!r}")
    return DesignSpec(
        outcome=args.outcome,
        covariates=_split_csv_list(args.covariates),
        interactions=interactions,
        squares=_split_csv_list(args.squares),
    )


def _cmd_fit(args: argparse.Namespace) -> int:
    data = Dataset.from_csv(Path(args.data).read_text())
    if args.positivity:
        report = positivity_check(
            data, args.exposure, _split_csv_list(args.covariates), args.threshold
        )
        doc = {
            "schema_version": SCHEMA_VERSION,
            "report": "positivity",
            **report.as_dict(),
        }
        _emit(doc, args.output)
        return EXIT_OK
    if args.noncompliance:
        report = noncompliance_estimands(data)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "report": "noncompliance",
            **report.as_dict(),
        }
        _emit(doc, args.output)
        return EXIT_OK
    design = _build_design(args)
    fitter = logistic_fit if args.family == "logistic" else ols_fit
    fit = fitter(data, design)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "report": "fit",
        "family": args.family,
        "design": design.as_dict(),
        **fit.as_dict(),
    }
    _emit(doc, args.output)
    return EXIT_OK


def _cmd_study(args: argparse.Namespace) -> int:
    if args.config == "default":
        doc = default_study_config().as_dict()
        doc["seed"] = _default_seed()
    else:
        doc = json.loads(Path(args.config).read_text())
    # Explicit flags override whatever the config carries.
    for key, value in (
        ("replications", args.runs),
        ("sample_size", args.n),
        ("seed", args.seed),
        ("oracle_n", args.oracle_n),
    ):
        if value is not None:
            doc[key] = value
    config = StudyConfig.from_dict(doc)
    report = run_study(
        config, workers=args.workers, keep_estimates=bool(args.estimates_csv)
    )
    if args.estimates_csv:
        Path(args.estimates_csv).write_text(estimates_csv(report))
    if args.format == "text":
        _emit_text(render_bias_table(report) + "\n", args.output)
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "report": "study",
            **report.as_dict(),
        }
        _emit(doc, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalreg",
        description="Causal-graph analysis and regression-bias simulation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="back-door analysis of a DAG")
    p.add_argument("--dag", required=True, help="DAG file or fixture name")
    p.add_argument("--exposure", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--unmeasured", default=None,
                   help="comma list; default: nodes starting with U")
    p.add_argument("--conditioned", default=None,
                   help="comma list of design-conditioned nodes (e.g. selection)")
    p.add_argument("--minimal", action="store_true",
                   help="report only inclusion-minimal adjustment sets")
    p.add_argument("--allow-large", action="store_true",
                   help="lift the 20-node enumeration bound")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("missingness", help="m-DAG mechanism and recoverability")
    p.add_argument("--mdag", required=True, help="m-DAG file or fixture name")
    p.add_argument("--exposure", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--covariates", default=None,
                   help="comma list; default: all other substantive nodes")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_missingness)

    p = sub.add_parser("collapse", help="stratified-table collapsibility")
    p.add_argument("--table", required=True, help="CSV file or fixture name")
    p.add_argument("--measure", required=True, choices=MEASURES)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_collapse)

    p = sub.add_parser("simulate", help="draw data from a structural model")
    p.add_argument("--model", required=True, help="model file or fixture name")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--intervene", default=None,
                   help="comma list of NODE=VALUE settings")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a regression on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--outcome", default="Y")
    p.add_argument("--covariates", default=None, help="comma list")
    p.add_argument("--interactions", default=None, help="comma list of A:B pairs")
    p.add_argument("--squares", default=None, help="comma list")
    p.add_argument("--family", choices=("linear", "logistic"), default="linear")
    p.add_argument("--positivity", action="store_true",
                   help="run the propensity-score positivity screen instead")
    p.add_argument("--exposure", default="A")
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--noncompliance", action="store_true",
                   help="compute non-compliance estimands instead")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("study", help="run a replicated bias study")
    p.add_argument("--config", default="default",
                   help="JSON config path, or 'default' for the ten-scenario panel")
    p.add_argument("--runs", type=int, default=None,
                   help="replications per scenario (default: config value)")
    p.add_argument("--n", type=int, default=None,
                   help="sample size per replication (default: config value)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--oracle-n", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--estimates-csv", default=None,
                   help="also write per-replication estimates to this CSV")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_study)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, ModelParseError, TableError, FileNotFoundError,
            KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, SimulationError, StudyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""Replicated simulation harness: bias of regression estimators.

A study runs (model fixture, regression design) scenarios over many
replications, compares the mean target coefficient against the true
effect, and reports bias with its Monte-Carlo standard error.
Replication r draws from substreams keyed by (seed, node, r + 1);
truth oracles use replication 0, so worker partitioning and scenario
order can never change a single draw.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .estimators import DesignSpec, FitError, logistic_fit, ols_fit
from .fixtures import MODEL_FIXTURES, model_fixture
from .scm import (
    ATE,
    ESTIMANDS,
    LOG_MOR,
    Dataset,
    StructuralModel,
    parse_model,
    simulate,
    true_effect,
)

__all__ = [
    "Scenario",
    "StudyConfig",
    "ScenarioResult",
    "BiasReport",
    "StudyError",
    "default_study_config",
    "run_scenario",
    "run_study",
    "render_bias_table",
    "estimates_csv",
]

MAX_FAILURE_FRACTION = 0.01


class StudyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    model: str  # fixture name, or inline model text containing "~"
    design: DesignSpec
    target: str
    estimand: str = ATE
    label: str | None = None
    true_value: float | None = None  # exact truth; None means oracle-derived
    require_ones: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "require_ones", tuple(self.require_ones))
        if self.estimand not in ESTIMANDS:
            raise ValueError(f"unknown estimand {self.estimand!r}")
        if self.target not in self.design.column_names():
            raise ValueError(
                f"target coefficient {self.target!r} is not a design column"
            )

    def resolve_model(self) -> StructuralModel:
        if "~" in self.model:
            return parse_model(self.model, name=self.id)
        if self.model not in MODEL_FIXTURES:
            raise StudyError(f"unknown model fixture {self.model!r}")
        return model_fixture(self.model)

    def display_label(self) -> str:
        return self.label if self.label is not None else self.id

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.display_label(),
            "model": self.model,
            "design": self.design.as_dict(),
            "target": self.target,
            "estimand": self.estimand,
            "true_value": self.true_value,
            "require_ones": list(self.require_ones),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        design = doc["design"]
        spec = DesignSpec(
            outcome=design["outcome"],
            covariates=tuple(design.get("covariates", ())),
            interactions=tuple(tuple(p) for p in design.get("interactions", ())),
            squares=tuple(design.get("squares", ())),
        )
        return cls(
            id=doc["id"],
            model=doc["model"],
            design=spec,
            target=doc["target"],
            estimand=doc.get("estimand", ATE),
            label=doc.get("label"),
            true_value=doc.get("true_value"),
            require_ones=tuple(doc.get("require_ones", ())),
        )


@dataclass(frozen=True)
class StudyConfig:
    scenarios: tuple[Scenario, ...]
    replications: int = 1000
    sample_size: int = 1000
    seed: int = 0
    oracle_n: int = 1_000_000

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.sample_size < 10:
            raise ValueError("sample_size must be at least 10")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ValueError("scenario ids must be unique")

    def as_dict(self) -> dict:
        return {
            "replications": self.replications,
            "sample_size": self.sample_size,
            "seed": self.seed,
            "oracle_n": self.oracle_n,
            "scenarios": [s.as_dict() for s in self.scenarios],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        return cls(
            scenarios=tuple(Scenario.from_dict(s) for s in doc.get("scenarios", ())),
            replications=int(doc.get("replications", 1000)),
            sample_size=int(doc.get("sample_size", 1000)),
            seed=int(doc.get("seed", 0)),
            oracle_n=int(doc.get("oracle_n", 1_000_000)),
        )


@dataclass(frozen=True)
class ScenarioResult:
    id: str
    label: str
    estimand: str
    sample_size: int
    replications: int
    failures: int
    mean_estimate: float
    true_value: float
    true_provenance: str  # "exact" | "oracle"
    bias: float
    mc_se: float

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "estimand": self.estimand,
            "sample_size": self.sample_size,
            "replications": self.replications,
            "failures": self.failures,
            "mean_estimate": self.mean_estimate,
            "true_value": self.true_value,
            "true_provenance": self.true_provenance,
            "bias": self.bias,
            "mc_se": self.mc_se,
        }


@dataclass(frozen=True)
class BiasReport:
    config: StudyConfig
    results: tuple[ScenarioResult, ...]
    # per scenario id: (replication index, estimate) for successful replications
    estimates: dict[str, tuple[tuple[int, float], ...]] | None = None

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "scenarios": [r.as_dict() for r in self.results],
        }

    def result(self, scenario_id: str) -> ScenarioResult:
        for r in self.results:
            if r.id == scenario_id:
                return r
        raise KeyError(f"no scenario {scenario_id!r} in report")


def default_study_config(
    replications: int = 1000, sample_size: int = 1000, seed: int = 0,
    oracle_n: int = 1_000_000,
) -> StudyConfig:
    """The ten-scenario bias panel at desk scale."""
    mediation_ate = 1.0 + float(expit(-1.5)) - float(expit(0.5))
    ya_l = DesignSpec(outcome="Y", covariates=("A", "L"))
    ya = DesignSpec(outcome="Y", covariates=("A",))
    scenarios = (
        Scenario("setup1", "setup1", ya_l, "A", ATE,
                 label="ATE, setup 1: simple", true_value=1.0),
        Scenario("setup2", "setup2", ya_l, "A", ATE,
                 label="ATE, setup 2: incorrect model specification",
                 true_value=1.0),
        Scenario("setup3", "setup3",
                 DesignSpec(outcome="Y", covariates=("A", "L", "L2")), "A", ATE,
                 label="ATE, setup 3: collider structure", true_value=1.0),
        Scenario("setup4", "setup4", ya_l, "A", ATE,
                 label="ATE, setup 4: effect modification (not randomized)",
                 true_value=2.0),
        Scenario("setup4b", "setup4b", ya_l, "A", ATE,
                 label="ATE, setup 4b: effect modification (randomized)",
                 true_value=2.0),
        Scenario("setup5_conditional", "setup5", ya_l, "A", LOG_MOR,
                 label="log MOR, setup 5: collapsibility, conditional"),
        Scenario("setup5_crude", "setup5", ya, "A", LOG_MOR,
                 label="log MOR, setup 5: collapsibility, crude"),
        Scenario("setup6_conditional", "setup6",
                 DesignSpec(outcome="Y", covariates=("A", "M")), "A", ATE,
                 label="ATE, setup 6: mediation, conditional",
                 true_value=mediation_ate),
        Scenario("setup6_crude", "setup6", ya, "A", ATE,
                 label="ATE, setup 6: mediation, crude", true_value=mediation_ate),
        Scenario("setup7", "setup7",
                 DesignSpec(outcome="Y", covariates=("A", "L1", "L2")), "A", ATE,
                 label="ATE, setup 7: MNAR + complete cases", true_value=1.0,
                 require_ones=("C_A", "C_L2", "C_Y")),
    )
    return StudyConfig(
        scenarios=scenarios,
        replications=replications,
        sample_size=sample_size,
        seed=seed,
        oracle_n=oracle_n,
    )


def _fit_one(
    model: StructuralModel,
    scenario: Scenario,
    sample_size: int,
    seed: int,
    rep: int,
) -> float:
    data = simulate(model, sample_size, seed, rep=rep + 1)
    if scenario.require_ones:
        mask = np.ones(data.n, dtype=bool)
        for name in scenario.require_ones:
            mask &= data.column(name) == 1.0
        kept = data.data[mask]
        if kept.shape[0] <= len(scenario.design.column_names()) + 1:
            raise FitError(
                f"only {kept.shape[0]} complete rows left after filtering"
            )
        data = Dataset(data.names, np.ascontiguousarray(kept))
    fitter = logistic_fit if scenario.estimand == LOG_MOR else ols_fit
    return fitter(data, scenario.design).coef(scenario.target)


def _run_batch(args: tuple) -> list[tuple[int, float | None, str | None]]:
    model, scenario, sample_size, seed, reps = args
    out: list[tuple[int, float | None, str | None]] = []
    for rep in reps:
        try:
            out.append((rep, _fit_one(model, scenario, sample_size, seed, rep), None))
        except FitError as exc:
            out.append((rep, None, str(exc)))
    return out


@lru_cache(maxsize=64)
def _oracle_truth(
    model: str, exposure: str, outcome: str, estimand: str, n_oracle: int, seed: int
) -> float:
    resolved = (
        parse_model(model) if "~" in model else model_fixture(model)
    )
    return true_effect(
        resolved,
        exposure=exposure,
        outcome=outcome,
        estimand=estimand,
        n_oracle=n_oracle,
        seed=seed,
    ).value


def _truth(
    scenario: Scenario, config: StudyConfig
) -> tuple[float, str]:
    if scenario.true_value is not None:
        return float(scenario.true_value), "exact"
    value = _oracle_truth(
        scenario.model,
        scenario.target,
        scenario.design.outcome,
        scenario.estimand,
        config.oracle_n,
        config.seed,
    )
    return value, "oracle"


def _aggregate(
    scenario: Scenario,
    config: StudyConfig,
    results: list[tuple[int, float | None, str | None]],
) -> tuple[ScenarioResult, tuple[tuple[int, float], ...]]:
    results.sort(key=lambda item: item[0])
    estimates = [(rep, v) for rep, v, _ in results if v is not None]
    failures = [(rep, msg) for rep, v, msg in results if v is None]
    if len(failures) > MAX_FAILURE_FRACTION * config.replications:
        examples = "; ".join(f"rep {rep}: {msg}" for rep, msg in failures[:5])
        raise StudyError(
            f"scenario {scenario.id!r}: {len(failures)} of "
            f"{config.replications} replications failed ({examples})"
        )
    values = np.asarray([v for _, v in estimates])
    mean = float(values.mean())
    mc_se = (
        float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    )
    truth, provenance = _truth(scenario, config)
    result = ScenarioResult(
        id=scenario.id,
        label=scenario.display_label(),
        estimand=scenario.estimand,
        sample_size=config.sample_size,
        replications=int(values.size),
        failures=len(failures),
        mean_estimate=mean,
        true_value=truth,
        true_provenance=provenance,
        bias=mean - truth,
        mc_se=mc_se,
    )
    return result, tuple((rep, float(v)) for rep, v in estimates)


def run_scenario(
    scenario: Scenario, config: StudyConfig
) -> ScenarioResult:
    """Run one scenario sequentially."""
    model = scenario.resolve_model()
    batch = _run_batch(
        (model, scenario, config.sample_size, config.seed, range(config.replications))
    )
    result, _ = _aggregate(scenario, config, batch)
    return result


def run_study(
    config: StudyConfig, workers: int = 1, keep_estimates: bool = False
) -> BiasReport:
    """Run every scenario; results do not depend on the worker count."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    per_scenario: dict[str, list[tuple[int, float | None, str | None]]] = {
        s.id: [] for s in config.scenarios
    }
    if workers == 1 or config.replications == 1:
        for scenario in config.scenarios:
            model = scenario.resolve_model()
            per_scenario[scenario.id] = _run_batch(
                (model, scenario, config.sample_size, config.seed,
                 range(config.replications))
            )
    else:
        chunk = max(1, math.ceil(config.replications / workers))
        jobs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for scenario in config.scenarios:
                model = scenario.resolve_model()
                for start in range(0, config.replications, chunk):
                    reps = range(start, min(start + chunk, config.replications))
                    jobs.append(
                        (
                            scenario.id,
                            pool.submit(
                                _run_batch,
                                (model, scenario, config.sample_size, config.seed, reps),
                            ),
                        )
                    )
            for scenario_id, future in jobs:
                per_scenario[scenario_id].extend(future.result())

    results: list[ScenarioResult] = []
    estimates: dict[str, tuple[tuple[int, float], ...]] = {}
    for scenario in config.scenarios:
        result, values = _aggregate(scenario, config, per_scenario[scenario.id])
        results.append(result)
        estimates[scenario.id] = values
    return BiasReport(
        config=config,
        results=tuple(results),
        estimates=estimates if keep_estimates else None,
    )


def render_bias_table(report: BiasReport) -> str:
    """Aligned text table, one row per scenario."""
    headers = ("scenario", "estimand", "mean", "truth", "bias", "mc_se", "R", "fail")
    rows = [
        (
            r.label,
            r.estimand,
            f"{r.mean_estimate:.4f}",
            f"{r.true_value:.4f} ({r.true_provenance})",
            f"{r.bias:+.4f}",
            f"{r.mc_se:.4f}",
            str(r.replications),
            str(r.failures),
        )
        for r in report.results
    ]
    widths = [
        max(len(headers[j]), *(len(row[j]) for row in rows)) if rows else len(headers[j])
        for j in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def estimates_csv(report: BiasReport) -> str:
    """Per-replication estimates; requires run_study(keep_estimates=True)."""
    if report.estimates is None:
        raise StudyError("estimates were not kept; rerun with keep_estimates=True")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario", "replication", "estimate"])
    for scenario in report.config.scenarios:
        for rep, value in report.estimates[scenario.id]:
            writer.writerow([scenario.id, rep, repr(value)])
    return buf.getvalue()

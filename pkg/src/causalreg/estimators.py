"""Regression fits, positivity diagnostics, and non-compliance estimands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg
from scipy.special import expit

from .scm import Dataset

__all__ = [
    "DesignSpec",
    "FitResult",
    "FitError",
    "RankDeficiencyError",
    "SeparationError",
    "ConvergenceError",
    "design_matrix",
    "ols_fit",
    "logistic_fit",
    "positivity_check",
    "PositivityReport",
    "noncompliance_estimands",
    "NoncomplianceEstimands",
]

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 25
SEPARATION_COEF_NORM = 1e3
SEPARATION_PROB_EPS = 1e-10


class FitError(RuntimeError):
    """A regression fit could not be completed."""


class RankDeficiencyError(FitError):
    def __init__(self, columns: Iterable[str]):
        self.columns = tuple(columns)
        super().__init__(
            f"design matrix is rank deficient; collinear columns: {list(self.columns)}"
        )


class SeparationError(FitError):
    pass


class ConvergenceError(FitError):
    def __init__(self, message: str, trace: Iterable[float]):
        self.trace = tuple(trace)
        steps = ", ".join(f"{s:.3g}" for s in self.trace)
        super().__init__(f"{message} (step norms: {steps})")


@dataclass(frozen=True)
class DesignSpec:
    """Outcome plus covariate terms of a regression model."""

    outcome: str
    covariates: tuple[str, ...]
    interactions: tuple[tuple[str, str], ...] = ()
    squares: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(
            self, "interactions", tuple(tuple(p) for p in self.interactions)
        )
        object.__setattr__(self, "squares", tuple(self.squares))
        names = self.column_names()
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate design terms in {names}")

    def column_names(self) -> tuple[str, ...]:
        names = ["intercept"]
        names += list(self.covariates)
        names += [f"{a}:{b}" for a, b in self.interactions]
        names += [f"{v}^2" for v in self.squares]
        return tuple(names)

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "covariates": list(self.covariates),
            "interactions": [list(p) for p in self.interactions],
            "squares": list(self.squares),
        }


@dataclass(frozen=True)
class FitResult:
    names: tuple[str, ...]
    coefficients: tuple[float, ...]
    standard_errors: tuple[float, ...]
    iterations: int = 0
    final_step_norm: float = 0.0
    converged: bool = True

    def __post_init__(self) -> None:
        if not (len(self.names) == len(self.coefficients) == len(self.standard_errors)):
            raise ValueError("coefficient, SE and name lengths disagree")

    def coef(self, name: str) -> float:
        try:
            return self.coefficients[self.names.index(name)]
        except ValueError:
            raise KeyError(f"no coefficient named {name!r}") from None

    def as_dict(self) -> dict:
        return {
            "coefficients": {
                name: {"estimate": est, "se": se}
                for name, est, se in zip(
                    self.names, self.coefficients, self.standard_errors
                )
            },
            "iterations": self.iterations,
            "final_step_norm": self.final_step_norm,
            "converged": self.converged,
        }


def design_matrix(data: Dataset, spec: DesignSpec) -> tuple[np.ndarray, np.ndarray]:
    """Build (X, y) from a dataset; intercept first."""
    n = data.n
    columns = [np.ones(n)]
    for name in spec.covariates:
        columns.append(data.column(name))
    for a, b in spec.interactions:
        columns.append(data.column(a) * data.column(b))
    for name in spec.squares:
        columns.append(data.column(name) ** 2)
    X = np.column_stack(columns)
    y = data.column(spec.outcome)
    return X, y


def _check_rank(X: np.ndarray, names: tuple[str, ...]) -> None:
    _, r, pivots = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(X.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        raise RankDeficiencyError(names[j] for j in sorted(pivots[rank:]))


def ols_fit(data: Dataset, spec: DesignSpec) -> FitResult:
    """Least squares through a QR decomposition, with classical SEs."""
    X, y = design_matrix(data, spec)
    names = spec.column_names()
    n, p = X.shape
    if n <= p:
        raise FitError(f"need more rows than parameters (n={n}, p={p})")
    _check_rank(X, names)
    q, r = np.linalg.qr(X)
    beta = scipy.linalg.solve_triangular(r, q.T @ y)
    residuals = y - X @ beta
    sigma2 = float(residuals @ residuals) / (n - p)
    rinv = scipy.linalg.solve_triangular(r, np.eye(p))
    cov = sigma2 * (rinv @ rinv.T)
    ses = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(names, tuple(map(float, beta)), tuple(map(float, ses)))


def _check_separation(beta: np.ndarray, probs: np.ndarray, y: np.ndarray) -> None:
    if np.linalg.norm(beta) > SEPARATION_COEF_NORM:
        raise SeparationError(
            f"separation suspected: coefficient norm {np.linalg.norm(beta):.3g} "
            f"exceeds {SEPARATION_COEF_NORM:g}"
        )
    ones = y == 1
    if ones.any() and (~ones).any():
        if np.all(probs[ones] > 1 - SEPARATION_PROB_EPS) and np.all(
            probs[~ones] < SEPARATION_PROB_EPS
        ):
            raise SeparationError("perfect separation: fitted probabilities saturated")


def logistic_fit(data: Dataset, spec: DesignSpec) -> FitResult:
    """Logistic regression by iteratively reweighted least squares.

    Newton steps solve the weighted normal equations; convergence is
    declared when the largest coefficient update falls below 1e-8.
    """
    X, y = design_matrix(data, spec)
    names = spec.column_names()
    n, p = X.shape
    if n <= p:
        raise FitError(f"need more rows than parameters (n={n}, p={p})")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise FitError(f"outcome {spec.outcome!r} must be binary 0/1")
    _check_rank(X, names)

    beta = np.zeros(p)
    trace: list[float] = []
    for iteration in range(1, IRLS_MAX_ITER + 1):
        probs = expit(X @ beta)
        weights = probs * (1 - probs)
        hessian = X.T @ (weights[:, None] * X)
        score = X.T @ (y - probs)
        try:
            step = scipy.linalg.solve(hessian, score, assume_a="sym")
        except scipy.linalg.LinAlgError as exc:
            raise SeparationError(f"singular information matrix: {exc}") from None
        beta = beta + step
        step_norm = float(np.max(np.abs(step)))
        trace.append(step_norm)
        probs = expit(X @ beta)
        _check_separation(beta, probs, y)
        if step_norm < IRLS_TOL:
            weights = probs * (1 - probs)
            hessian = X.T @ (weights[:, None] * X)
            cov = scipy.linalg.inv(hessian)
            ses = np.sqrt(np.clip(np.diag(cov), 0.0, None))
            return FitResult(
                names,
                tuple(map(float, beta)),
                tuple(map(float, ses)),
                iterations=iteration,
                final_step_norm=step_norm,
                converged=True,
            )
    raise ConvergenceError(
        f"IRLS did not converge in {IRLS_MAX_ITER} iterations", trace
    )


@dataclass(frozen=True)
class PositivityReport:
    threshold: float
    min_propensity: float
    max_propensity: float
    fraction_below: float
    fraction_above: float
    flagged_rows: int
    n: int

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "min_propensity": self.min_propensity,
            "max_propensity": self.max_propensity,
            "fraction_below": self.fraction_below,
            "fraction_above": self.fraction_above,
            "flagged_rows": self.flagged_rows,
            "n": self.n,
        }


def positivity_check(
    data: Dataset,
    exposure: str,
    covariates: Iterable[str],
    threshold: float = 0.01,
) -> PositivityReport:
    """Propensity-score screen for sparse treatment assignment.

    Fits a logistic propensity model and counts rows whose fitted
    probability falls below the threshold or above one minus it.
    """
    if not 0 <= threshold < 0.5:
        raise ValueError("threshold must lie in [0, 0.5)")
    spec = DesignSpec(outcome=exposure, covariates=tuple(covariates))
    fit = logistic_fit(data, spec)
    X, _ = design_matrix(data, spec)
    probs = expit(X @ np.asarray(fit.coefficients))
    below = probs < threshold
    above = probs > 1 - threshold
    return PositivityReport(
        threshold=threshold,
        min_propensity=float(probs.min()),
        max_propensity=float(probs.max()),
        fraction_below=float(below.mean()),
        fraction_above=float(above.mean()),
        flagged_rows=int((below | above).sum()),
        n=data.n,
    )


@dataclass(frozen=True)
class NoncomplianceEstimands:
    itt: float
    as_treated: float
    per_protocol: float
    cace: float

    def as_dict(self) -> dict:
        return {
            "itt": self.itt,
            "as_treated": self.as_treated,
            "per_protocol": self.per_protocol,
            "cace": self.cace,
        }


def _subgroup_mean(y: np.ndarray, mask: np.ndarray, label: str) -> float:
    if not mask.any():
        raise FitError(f"empty subgroup: {label}")
    return float(y[mask].mean())


def noncompliance_estimands(
    data: Dataset,
    assigned: str = "A_assigned",
    taken: str = "A_taken",
    outcome: str = "Y",
) -> NoncomplianceEstimands:
    """Intention-to-treat, as-treated, per-protocol and complier effects.

    All three columns must be binary.  The complier average effect
    divides the intention-to-treat contrast by the uptake probability
    among those assigned to treatment.
    """
    za = data.column(assigned)
    a = data.column(taken)
    y = data.column(outcome)
    for name, col in ((assigned, za), (taken, a), (outcome, y)):
        if not np.all(np.isin(col, (0.0, 1.0))):
            raise FitError(f"column {name!r} must be binary 0/1")
    itt = _subgroup_mean(y, za == 1, f"{assigned}=1") - _subgroup_mean(
        y, za == 0, f"{assigned}=0"
    )
    as_treated = _subgroup_mean(y, a == 1, f"{taken}=1") - _subgroup_mean(
        y, a == 0, f"{taken}=0"
    )
    per_protocol = _subgroup_mean(
        y, (a == 1) & (za == 1), f"{taken}=1 & {assigned}=1"
    ) - _subgroup_mean(y, (a == 0) & (za == 0), f"{taken}=0 & {assigned}=0")
    uptake = float((a[za == 1] == 1).mean())
    if uptake == 0:
        raise FitError("no treatment uptake among those assigned to treatment")
    return NoncomplianceEstimands(
        itt=itt, as_treated=as_treated, per_protocol=per_protocol, cace=itt / uptake
    )

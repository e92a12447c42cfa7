"""Structural data-generating models with a small expression language.

Node declarations form a temporal order: each node draws from a normal
or bernoulli distribution whose parameters are polynomial expressions
(optionally wrapped in a logistic link) over earlier nodes.  Sampling
is deterministic given a master seed; every node owns a substream
keyed by (seed, node name, replication index), so declaration order
and worker partitioning never change the draws.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .graph import Dag

__all__ = [
    "Term",
    "Expr",
    "NodeSpec",
    "StructuralModel",
    "Intervention",
    "Dataset",
    "EffectEstimate",
    "ModelParseError",
    "SimulationError",
    "parse_expr",
    "parse_model",
    "simulate",
    "intervene",
    "true_effect",
    "ATE",
    "LOG_MOR",
    "ESTIMANDS",
]

ATE = "ATE"
LOG_MOR = "log_MOR"
ESTIMANDS = (ATE, LOG_MOR)

ORACLE_MIN_N = 100_000


class ModelParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if col is not None:
                where += f", col {col}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.col = col


class SimulationError(RuntimeError):
    """A draw produced an invalid parameter; names the node and row."""


@dataclass(frozen=True)
class Term:
    """coef * product of up to two node references (a repeat means a square)."""

    coef: float
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.names) > 2:
            raise ModelParseError("terms multiply at most two node references")
        if not math.isfinite(self.coef):
            raise ModelParseError(f"non-finite coefficient {self.coef!r}")

    def render(self) -> str:
        if not self.names:
            return _fmt(self.coef)
        if len(self.names) == 2 and self.names[0] == self.names[1]:
            body = f"{self.names[0]}^2"
        else:
            body = "*".join(self.names)
        if self.coef == 1:
            return body
        if self.coef == -1:
            return f"-{body}"
        return f"{_fmt(self.coef)}*{body}"


def _fmt(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(x)


@dataclass(frozen=True)
class Expr:
    """A sum of terms, optionally passed through the logistic function."""

    terms: tuple[Term, ...]
    logistic: bool = False

    def variables(self) -> frozenset[str]:
        return frozenset(n for t in self.terms for n in t.names)

    def evaluate(self, columns: dict[str, np.ndarray], n: int) -> np.ndarray:
        total = np.zeros(n)
        for t in self.terms:
            value = np.full(n, t.coef)
            for name in t.names:
                value = value * columns[name]
            total += value
        return expit(total) if self.logistic else total

    def render(self) -> str:
        if not self.terms:
            body = "0"
        else:
            parts = [self.terms[0].render()]
            for t in self.terms[1:]:
                s = t.render()
                parts.append(f"- {s[1:]}" if s.startswith("-") else f"+ {s}")
            body = " ".join(parts)
        return f"plogis({body})" if self.logistic else body

    @classmethod
    def constant(cls, value: float) -> "Expr":
        return cls((Term(float(value)),))


@dataclass(frozen=True)
class NodeSpec:
    name: str
    dist: str  # "normal" | "bernoulli" | "constant"
    params: tuple[Expr, ...]

    def render(self) -> str:
        args = ", ".join(p.render() for p in self.params)
        return f"{self.name} ~ {self.dist}({args})"

    def referenced(self) -> frozenset[str]:
        return frozenset(n for p in self.params for n in p.variables())


@dataclass(frozen=True)
class Intervention:
    node: str
    value: float

    def render(self) -> str:
        return f"{self.node}={_fmt(self.value)}"


@dataclass(frozen=True, eq=False)
class StructuralModel:
    specs: tuple[NodeSpec, ...]
    name: str | None = None
    interventions: tuple[Intervention, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for spec in self.specs:
            for ref in sorted(spec.referenced()):
                if ref not in seen:
                    raise ModelParseError(
                        f"{spec.name!r} references {ref!r} before its declaration"
                    )
            if spec.name in seen:
                raise ModelParseError(f"duplicate node {spec.name!r}")
            seen.add(spec.name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StructuralModel):
            return NotImplemented
        return self.specs == other.specs

    @cached_property
    def node_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def spec_for(self, name: str) -> NodeSpec:
        for spec in self.specs:
            if spec.name == name:
                return spec
        raise ModelParseError(f"unknown node {name!r}")

    def induced_dag(self) -> Dag:
        """One edge per referenced parent; acyclic by construction."""
        edges = [
            (parent, spec.name) for spec in self.specs for parent in spec.referenced()
        ]
        return Dag(self.node_names, edges)

    def render(self) -> str:
        return "\n".join(spec.render() for spec in self.specs) + "\n"


# --- expression parsing ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^(),]))"
)


def _tokenize(text: str, line: int | None) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ModelParseError(
                    f"unexpected character {text[pos:].strip()[0]!r}", line, pos + 1
                )
            break
        pos = m.end()
        kind = m.lastgroup or ""
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
    return tokens


class _ExprParser:
    def __init__(self, tokens: list[tuple[str, str, int]], line: int | None):
        self.tokens = tokens
        self.line = line
        self.i = 0

    def error(self, message: str) -> ModelParseError:
        col = self.tokens[self.i][2] if self.i < len(self.tokens) else None
        return ModelParseError(message, self.line, col)

    def peek(self) -> tuple[str, str] | None:
        if self.i < len(self.tokens):
            kind, value, _ = self.tokens[self.i]
            return kind, value
        return None

    def take(self) -> tuple[str, str]:
        if self.i >= len(self.tokens):
            raise ModelParseError("unexpected end of expression", self.line)
        kind, value, _ = self.tokens[self.i]
        self.i += 1
        return kind, value

    def expect(self, value: str) -> None:
        got = self.peek()
        if got is None or got[1] != value:
            raise self.error(f"expected {value!r}")
        self.take()

    def parse_expr(self) -> Expr:
        nxt = self.peek()
        if nxt is not None and nxt[0] == "ident" and nxt[1] == "plogis":
            self.take()
            self.expect("(")
            inner = self.parse_sum()
            self.expect(")")
            expr = Expr(inner.terms, logistic=True)
        else:
            expr = self.parse_sum()
        if self.i != len(self.tokens):
            raise self.error("trailing input after expression")
        return expr

    def parse_sum(self) -> Expr:
        terms: list[Term] = []
        sign = 1.0
        nxt = self.peek()
        if nxt is not None and nxt[1] in "+-":
            sign = -1.0 if nxt[1] == "-" else 1.0
            self.take()
        terms.append(self.parse_term(sign))
        while True:
            nxt = self.peek()
            if nxt is None or nxt[1] not in "+-":
                break
            sign = -1.0 if nxt[1] == "-" else 1.0
            self.take()
            terms.append(self.parse_term(sign))
        return Expr(tuple(terms))

    def parse_term(self, sign: float) -> Term:
        kind, value = self.take()
        coef = sign
        names: list[str] = []
        if kind == "num":
            coef *= float(value)
            nxt = self.peek()
            if nxt is None or nxt[1] != "*":
                return Term(coef)
            self.take()
            kind, value = self.take()
        if kind != "ident":
            raise self.error("expected a node name")
        if value == "plogis":
            raise self.error("plogis may only wrap a whole parameter expression")
        nxt = self.peek()
        if nxt is not None and nxt[1] == "(":
            raise self.error(f"unknown function {value!r}; only plogis is supported")
        names.append(value)
        while True:
            nxt = self.peek()
            if nxt is None or nxt[1] not in ("*", "^"):
                break
            op = self.take()[1]
            if op == "^":
                kind, value = self.take()
                if kind != "num" or float(value) != 2.0:
                    raise self.error("only squares (^2) are supported")
                names.append(names[-1])
            else:
                kind, value = self.take()
                if kind == "num":
                    raise self.error("write the coefficient before the node names")
                if value == "plogis":
                    raise self.error("plogis may only wrap a whole parameter expression")
                names.append(value)
        if len(names) > 2:
            raise self.error("terms multiply at most two node references")
        return Term(coef, tuple(names))


def parse_expr(text: str, line: int | None = None) -> Expr:
    """Parse a parameter expression such as ``plogis(-0.5 + 2*L)``."""
    tokens = _tokenize(text, line)
    if not tokens:
        raise ModelParseError("empty expression", line)
    return _ExprParser(tokens, line).parse_expr()


_DECL_RE = re.compile(
    r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*~\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*\Z"
)

_DISTRIBUTIONS = {"normal": 2, "bernoulli": 1}


def _split_args(body: str, line: int) -> list[str]:
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ModelParseError("unbalanced parentheses", line)
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise ModelParseError("unbalanced parentheses", line)
    parts.append("".join(current))
    return parts


def parse_model(text: str, name: str | None = None) -> StructuralModel:
    """Parse node declarations, one ``name ~ dist(args)`` per line.

    Declaration order is the temporal order: expressions may reference
    only earlier nodes.
    """
    specs: list[NodeSpec] = []
    declared: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _DECL_RE.match(line)
        if not m:
            raise ModelParseError(f"unrecognized declaration: {line.strip()!r}", lineno)
        node, dist, body = m.group(1), m.group(2), m.group(3)
        if node in declared:
            raise ModelParseError(f"duplicate node {node!r}", lineno)
        if dist not in _DISTRIBUTIONS:
            raise ModelParseError(
                f"unknown distribution {dist!r}; expected normal or bernoulli", lineno
            )
        args = _split_args(body, lineno)
        if len(args) != _DISTRIBUTIONS[dist]:
            raise ModelParseError(
                f"{dist} takes {_DISTRIBUTIONS[dist]} argument(s), got {len(args)}",
                lineno,
            )
        params = tuple(parse_expr(arg, lineno) for arg in args)
        for expr in params:
            for ref in sorted(expr.variables()):
                if ref not in declared:
                    raise ModelParseError(
                        f"{node!r} references {ref!r} before its declaration", lineno
                    )
        declared.add(node)
        specs.append(NodeSpec(node, dist, params))
    if not specs:
        raise ModelParseError("model declares no nodes")
    return StructuralModel(tuple(specs), name=name)


# --- sampling ---------------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    model: str | None
    seed: int
    rep: int = 0
    interventions: tuple[Intervention, ...] = ()


@dataclass(frozen=True, eq=False)
class Dataset:
    names: tuple[str, ...]
    data: np.ndarray  # (n, len(names)) float64
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[1] != len(self.names):
            raise ValueError("data shape does not match column names")
        self.data.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.names.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}") from None
        return self.data[:, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.data:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, source: str) -> "Dataset":
        reader = csv.reader(io.StringIO(source))
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV input") from None
        rows = [[float(v) for v in row] for row in reader if row]
        return cls(tuple(h.strip() for h in header), np.asarray(rows, dtype=float))


def _node_stream(seed: int, node: str, rep: int) -> np.random.Generator:
    digest = hashlib.blake2b(node.encode(), digest_size=8).digest()
    key = int.from_bytes(digest, "big")
    return np.random.default_rng(np.random.SeedSequence((seed, key, rep)))


def _first_bad(mask: np.ndarray) -> int:
    return int(np.argmax(mask))


def simulate(model: StructuralModel, n: int, seed: int, rep: int = 0) -> Dataset:
    """Draw ``n`` independent rows in declaration order.

    Deterministic given (model, n, seed, rep); node values never
    depend on the declaration order of unrelated nodes.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if seed < 0 or rep < 0:
        raise ValueError("seed and rep must be non-negative")
    columns: dict[str, np.ndarray] = {}
    for spec in model.specs:
        if spec.dist == "constant":
            value = spec.params[0].evaluate(columns, n)
            columns[spec.name] = value
            continue
        rng = _node_stream(seed, spec.name, rep)
        if spec.dist == "normal":
            mean = spec.params[0].evaluate(columns, n)
            sd = spec.params[1].evaluate(columns, n)
            bad = ~np.isfinite(mean)
            if bad.any():
                raise SimulationError(
                    f"node {spec.name!r}: non-finite mean at row {_first_bad(bad)}"
                )
            bad = ~np.isfinite(sd) | (sd < 0)
            if bad.any():
                raise SimulationError(
                    f"node {spec.name!r}: invalid sd at row {_first_bad(bad)}"
                )
            columns[spec.name] = mean + sd * rng.standard_normal(n)
        elif spec.dist == "bernoulli":
            prob = spec.params[0].evaluate(columns, n)
            bad = ~np.isfinite(prob) | (prob < 0) | (prob > 1)
            if bad.any():
                raise SimulationError(
                    f"node {spec.name!r}: probability outside [0, 1] at row {_first_bad(bad)}"
                )
            columns[spec.name] = (rng.random(n) < prob).astype(float)
        else:  # pragma: no cover - parse_model admits no other kinds
            raise SimulationError(f"node {spec.name!r}: unknown distribution {spec.dist!r}")
    data = np.column_stack([columns[name] for name in model.node_names])
    return Dataset(
        model.node_names,
        data,
        Provenance(model.name, seed, rep, model.interventions),
    )


def intervene(model: StructuralModel, intervention: Intervention) -> StructuralModel:
    """Replace the target node's law with a constant; all else untouched."""
    spec = model.spec_for(intervention.node)
    if not math.isfinite(intervention.value):
        raise ValueError("intervention value must be finite")
    if spec.dist == "bernoulli" and intervention.value not in (0.0, 1.0):
        raise ValueError(
            f"{intervention.node!r} is bernoulli; intervention value must be 0 or 1"
        )
    new_spec = NodeSpec(spec.name, "constant", (Expr.constant(intervention.value),))
    specs = tuple(new_spec if s.name == spec.name else s for s in model.specs)
    kept = tuple(iv for iv in model.interventions if iv.node != intervention.node)
    return StructuralModel(
        specs, name=model.name, interventions=kept + (intervention,)
    )


@dataclass(frozen=True)
class EffectEstimate:
    estimand: str
    value: float
    mc_se: float
    n_oracle: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "estimand": self.estimand,
            "value": self.value,
            "mc_se": self.mc_se,
            "n_oracle": self.n_oracle,
            "seed": self.seed,
        }


def true_effect(
    model: StructuralModel,
    exposure: str,
    outcome: str,
    estimand: str = ATE,
    n_oracle: int = 1_000_000,
    seed: int = 0,
) -> EffectEstimate:
    """Post-intervention contrast of the outcome under exposure 1 vs 0.

    Both arms reuse the same per-node substreams, so shared upstream
    draws cancel out of the contrast and the reported Monte-Carlo
    standard error reflects the paired differences.
    """
    if estimand not in ESTIMANDS:
        raise ValueError(f"unknown estimand {estimand!r}; expected one of {ESTIMANDS}")
    if n_oracle < ORACLE_MIN_N:
        raise ValueError(f"n_oracle must be at least {ORACLE_MIN_N}")
    exposure_spec = model.spec_for(exposure)
    if exposure_spec.dist != "bernoulli":
        raise ValueError(f"exposure {exposure!r} must be a bernoulli node")
    outcome_spec = model.spec_for(outcome)
    if estimand == LOG_MOR and outcome_spec.dist != "bernoulli":
        raise ValueError("log_MOR requires a binary (bernoulli) outcome")

    arm1 = simulate(intervene(model, Intervention(exposure, 1.0)), n_oracle, seed)
    arm0 = simulate(intervene(model, Intervention(exposure, 0.0)), n_oracle, seed)
    y1 = arm1.column(outcome)
    y0 = arm0.column(outcome)

    if estimand == ATE:
        diff = y1 - y0
        value = float(diff.mean())
        mc_se = float(diff.std(ddof=1) / math.sqrt(n_oracle))
        return EffectEstimate(ATE, value, mc_se, n_oracle, seed)

    p1 = float(y1.mean())
    p0 = float(y0.mean())
    if p1 in (0.0, 1.0) or p0 in (0.0, 1.0):
        raise ValueError(
            f"degenerate arm: P(Y=1|do({exposure}=1))={p1}, P(Y=1|do({exposure}=0))={p0}"
        )
    value = math.log(p1 / (1 - p1)) - math.log(p0 / (1 - p0))
    g1 = 1.0 / (p1 * (1 - p1))
    g0 = 1.0 / (p0 * (1 - p0))
    cov = float(np.mean((y1 - p1) * (y0 - p0)))
    var = (g1 * g1 * p1 * (1 - p1) + g0 * g0 * p0 * (1 - p0) - 2 * g1 * g0 * cov) / n_oracle
    mc_se = math.sqrt(max(var, 0.0))
    return EffectEstimate(LOG_MOR, float(value), mc_se, n_oracle, seed)

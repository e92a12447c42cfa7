"""Directed acyclic graphs: parsing, reachability, path enumeration, d-separation.

All values are immutable; every function here is pure and safe for
concurrent use.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

__all__ = [
    "Dag",
    "Path",
    "GraphError",
    "DagParseError",
    "CycleError",
    "UnknownNodeError",
    "parse_dag",
    "serialize_dag",
    "ancestors",
    "descendants",
    "all_paths",
    "path_blocked",
    "d_separated",
    "d_separated_by_enumeration",
]

NODE_NAME_RE = re.compile(r"[A-Za-z0-9_]+\Z")

_EDGE_LINE_RE = re.compile(r"\s*([A-Za-z0-9_]+)\s*->\s*([A-Za-z0-9_]+)\s*\Z")
_NODE_LINE_RE = re.compile(r"\s*([A-Za-z0-9_]+)\s*\Z")


class GraphError(ValueError):
    """Invalid graph structure or graph query."""


class DagParseError(GraphError):
    """Malformed DAG text."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CycleError(GraphError):
    """The edge set admits no topological order."""

    def __init__(self, cycle: Iterable[str]):
        self.cycle = tuple(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class UnknownNodeError(GraphError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown node {name!r}")


@dataclass(frozen=True, eq=False)
class Dag:
    """A directed acyclic graph over named nodes.

    ``nodes`` keeps the order of first mention (used for display only);
    equality and hashing treat the node list as a set, so two graphs
    with the same nodes and edges compare equal regardless of order.
    """

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]]):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in edges))
        self._validate()

    def _validate(self) -> None:
        seen: set[str] = set()
        for name in self.nodes:
            if not NODE_NAME_RE.match(name):
                raise GraphError(f"invalid node name {name!r}")
            if name in seen:
                raise GraphError(f"duplicate node {name!r}")
            seen.add(name)
        for parent, child in self.edges:
            if parent == child:
                raise GraphError(f"self-loop on {parent!r}")
            for endpoint in (parent, child):
                if endpoint not in seen:
                    raise UnknownNodeError(endpoint)
        cycle = _find_cycle(self.nodes, self.edges)
        if cycle is not None:
            raise CycleError(cycle)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return frozenset(self.nodes) == frozenset(other.nodes) and self.edges == other.edges

    def __hash__(self) -> int:
        cached = self.__dict__.get("_hash")
        if cached is None:
            cached = hash((frozenset(self.nodes), self.edges))
            self.__dict__["_hash"] = cached
        return cached

    def __contains__(self, name: str) -> bool:
        return name in self.node_set

    @cached_property
    def node_set(self) -> frozenset[str]:
        return frozenset(self.nodes)

    @cached_property
    def parents(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {v: [] for v in self.nodes}
        for parent, child in self.edges:
            out[child].append(parent)
        return {v: tuple(sorted(ps)) for v, ps in out.items()}

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {v: [] for v in self.nodes}
        for parent, child in self.edges:
            out[parent].append(child)
        return {v: tuple(sorted(cs)) for v, cs in out.items()}

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        in_degree = {v: len(self.parents[v]) for v in self.nodes}
        ready = deque(v for v in self.nodes if in_degree[v] == 0)
        order: list[str] = []
        while ready:
            v = ready.popleft()
            order.append(v)
            for child in self.children[v]:
                in_degree[child] -= 1
                if in_degree[child] == 0:
                    ready.append(child)
        return tuple(order)

    @cached_property
    def descendant_map(self) -> dict[str, frozenset[str]]:
        out: dict[str, frozenset[str]] = {}
        for v in reversed(self.topological_order):
            acc: set[str] = set()
            for c in self.children[v]:
                acc.add(c)
                acc |= out[c]
            out[v] = frozenset(acc)
        return out

    @cached_property
    def ancestor_map(self) -> dict[str, frozenset[str]]:
        out: dict[str, frozenset[str]] = {}
        for v in self.topological_order:
            acc: set[str] = set()
            for p in self.parents[v]:
                acc.add(p)
                acc |= out[p]
            out[v] = frozenset(acc)
        return out

    def require(self, name: str) -> None:
        if name not in self.node_set:
            raise UnknownNodeError(name)


def _find_cycle(nodes: tuple[str, ...], edges: frozenset[tuple[str, str]]) -> list[str] | None:
    """Return one directed cycle as a node list (first == last), or None."""
    children: dict[str, list[str]] = {v: [] for v in nodes}
    for parent, child in edges:
        children[parent].append(child)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in nodes}
    stack: list[str] = []

    def visit(v: str) -> list[str] | None:
        color[v] = GRAY
        stack.append(v)
        for child in sorted(children[v]):
            if color[child] == GRAY:
                i = stack.index(child)
                return stack[i:] + [child]
            if color[child] == WHITE:
                found = visit(child)
                if found is not None:
                    return found
        stack.pop()
        color[v] = BLACK
        return None

    for v in nodes:
        if color[v] == WHITE:
            found = visit(v)
            if found is not None:
                return found
    return None


@dataclass(frozen=True)
class Path:
    """A simple path, orientation-aware.

    ``forward[i]`` is True when the i-th step follows the edge
    ``nodes[i] -> nodes[i+1]`` and False when it runs against the edge
    ``nodes[i+1] -> nodes[i]``.
    """

    nodes: tuple[str, ...]
    forward: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise GraphError("a path needs at least two nodes")
        if len(self.forward) != len(self.nodes) - 1:
            raise GraphError("orientation sequence does not match node sequence")
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("path repeats a node")

    def render(self) -> str:
        parts = [self.nodes[0]]
        for node, fwd in zip(self.nodes[1:], self.forward):
            parts.append("->" if fwd else "<-")
            parts.append(node)
        return " ".join(parts)

    def is_directed(self) -> bool:
        return all(self.forward)

    def starts_into_origin(self) -> bool:
        """True when the first edge points into ``nodes[0]``."""
        return not self.forward[0]

    def collider_indices(self) -> tuple[int, ...]:
        """Interior positions where both adjacent path edges point in."""
        return tuple(
            i
            for i in range(1, len(self.nodes) - 1)
            if self.forward[i - 1] and not self.forward[i]
        )


def parse_dag(text: str) -> Dag:
    """Parse the one-edge-per-line DAG format.

    Lines hold ``X -> Y`` edges or bare node names; ``#`` starts a
    comment; blank lines are ignored.  Node order is first mention.
    """
    nodes: list[str] = []
    seen: set[str] = set()
    edges: list[tuple[str, str]] = []
    edge_seen: set[tuple[str, str]] = set()

    def mention(name: str) -> None:
        if name not in seen:
            seen.add(name)
            nodes.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _EDGE_LINE_RE.match(line)
        if m:
            parent, child = m.group(1), m.group(2)
            if (parent, child) in edge_seen:
                raise DagParseError(f"duplicate edge {parent} -> {child}", lineno)
            edge_seen.add((parent, child))
            mention(parent)
            mention(child)
            edges.append((parent, child))
            continue
        m = _NODE_LINE_RE.match(line)
        if m:
            mention(m.group(1))
            continue
        raise DagParseError(f"unrecognized syntax: {line.strip()!r}", lineno)

    return Dag(nodes, edges)


def serialize_dag(dag: Dag) -> str:
    """Canonical text form: sorted node lines, then sorted edge lines."""
    lines = list(sorted(dag.nodes))
    lines += [f"{a} -> {b}" for a, b in sorted(dag.edges)]
    return "\n".join(lines) + "\n"


def descendants(dag: Dag, v: str) -> frozenset[str]:
    """All nodes reachable from ``v`` by directed edges, excluding ``v``."""
    dag.require(v)
    return dag.descendant_map[v]


def ancestors(dag: Dag, v: str) -> frozenset[str]:
    """All nodes from which ``v`` is reachable, excluding ``v``."""
    dag.require(v)
    return dag.ancestor_map[v]


def all_paths(dag: Dag, x: str, y: str) -> list[Path]:
    """Every simple path between ``x`` and ``y``, ignoring edge direction.

    Paths come out in lexicographic order of their node sequences.
    """
    dag.require(x)
    dag.require(y)
    if x == y:
        raise GraphError("path endpoints must differ")

    edge_set = dag.edges
    neighbors = {
        v: tuple(sorted(set(dag.parents[v]) | set(dag.children[v]))) for v in dag.nodes
    }
    found: list[Path] = []
    visited = {x}
    trail: list[str] = [x]
    orient: list[bool] = []

    def walk(v: str) -> None:
        for w in neighbors[v]:
            if w in visited:
                continue
            forward = (v, w) in edge_set
            trail.append(w)
            orient.append(forward)
            if w == y:
                found.append(Path(tuple(trail), tuple(orient)))
            else:
                visited.add(w)
                walk(w)
                visited.discard(w)
            trail.pop()
            orient.pop()

    walk(x)
    return found


def path_blocked(dag: Dag, path: Path, z: Iterable[str]) -> bool:
    """Whether a conditioning set blocks a path.

    A chain or fork node blocks when it is conditioned on; a collider
    blocks unless it, or one of its descendants, is conditioned on.
    """
    zset = frozenset(z)
    colliders = set(path.collider_indices())
    desc = dag.descendant_map
    for i in range(1, len(path.nodes) - 1):
        v = path.nodes[i]
        if i in colliders:
            if v not in zset and not (desc[v] & zset):
                return True
        else:
            if v in zset:
                return True
    return False


def _check_query_sets(
    dag: Dag, x: Iterable[str], y: Iterable[str], z: Iterable[str]
) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    xs, ys, zs = frozenset(x), frozenset(y), frozenset(z)
    for name in xs | ys | zs:
        dag.require(name)
    if xs & ys or xs & zs or ys & zs:
        raise GraphError("query sets must be pairwise disjoint")
    return xs, ys, zs


def d_separated(dag: Dag, x: Iterable[str], y: Iterable[str], z: Iterable[str]) -> bool:
    """Linear-time d-separation via reachability over oriented visits.

    The traversal walks (node, direction) states; a state entered
    against an edge may continue through parents and children unless
    conditioned on, while a state entered along an edge continues to
    children, or back to parents only at (ancestors of) conditioned
    colliders.
    """
    xs, ys, zs = _check_query_sets(dag, x, y, z)
    if not xs or not ys:
        return True

    z_ancestors = set(zs)
    stack = list(zs)
    while stack:
        v = stack.pop()
        for p in dag.parents[v]:
            if p not in z_ancestors:
                z_ancestors.add(p)
                stack.append(p)

    UP, DOWN = 0, 1  # UP: arrived from a child; DOWN: arrived from a parent
    queue: deque[tuple[str, int]] = deque((s, UP) for s in xs)
    visited: set[tuple[str, int]] = set()
    while queue:
        v, direction = queue.popleft()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v in ys and v not in zs:
            return False
        if direction == UP:
            if v not in zs:
                for p in dag.parents[v]:
                    queue.append((p, UP))
                for c in dag.children[v]:
                    queue.append((c, DOWN))
        else:
            if v not in zs:
                for c in dag.children[v]:
                    queue.append((c, DOWN))
            if v in z_ancestors:
                for p in dag.parents[v]:
                    queue.append((p, UP))
    return True


def d_separated_by_enumeration(
    dag: Dag, x: Iterable[str], y: Iterable[str], z: Iterable[str]
) -> bool:
    """Brute-force oracle: enumerate every path and test blocking.

    Exponential in graph size; kept as an independent check on
    :func:`d_separated`.
    """
    xs, ys, zs = _check_query_sets(dag, x, y, z)
    for a in sorted(xs):
        for b in sorted(ys):
            for path in all_paths(dag, a, b):
                if not path_blocked(dag, path, zs):
                    return False
    return True

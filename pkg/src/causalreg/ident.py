"""Back-door criterion, adjustment-set enumeration, and variable roles.

A :class:`CausalQuery` fixes an exposure and an outcome on a DAG,
declares which nodes are measured (available for conditioning), and
which are conditioned on by design (e.g. selection indicators).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable

from .graph import Dag, GraphError, Path, all_paths, descendants, path_blocked

__all__ = [
    "CausalQuery",
    "NodeRole",
    "RoleReport",
    "IdentError",
    "EnumerationBoundError",
    "backdoor_paths",
    "satisfies_backdoor",
    "enumerate_adjustment_sets",
    "classify_roles",
]

# Refuse subset enumeration beyond this many candidate nodes unless the
# caller explicitly overrides; the subset count is exponential.
ENUMERATION_BOUND = 20


class IdentError(GraphError):
    """Invalid identification query or argument."""


class EnumerationBoundError(IdentError):
    def __init__(self, size: int):
        super().__init__(
            f"{size} measured candidates exceed the enumeration bound of "
            f"{ENUMERATION_BOUND}; enable the large-enumeration override "
            "(allow_large / --allow-large) to proceed"
        )


@dataclass(frozen=True)
class CausalQuery:
    dag: Dag
    exposure: str
    outcome: str
    measured: frozenset[str]
    conditioned: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "measured", frozenset(self.measured))
        object.__setattr__(self, "conditioned", frozenset(self.conditioned))
        self.dag.require(self.exposure)
        self.dag.require(self.outcome)
        if self.exposure == self.outcome:
            raise IdentError("exposure and outcome must differ")
        for name in self.measured | self.conditioned:
            self.dag.require(name)
        if self.exposure in self.conditioned or self.outcome in self.conditioned:
            raise IdentError("exposure and outcome cannot be design-conditioned")


@dataclass(frozen=True)
class NodeRole:
    on_backdoor_path: bool = False
    collider_on_ay_path: bool = False
    mediator: bool = False
    descendant_of_mediator: bool = False
    descendant_of_exposure: bool = False
    in_some_valid_adjustment_set: bool = False

    def as_dict(self) -> dict[str, bool]:
        return {
            "on_backdoor_path": self.on_backdoor_path,
            "collider_on_ay_path": self.collider_on_ay_path,
            "mediator": self.mediator,
            "descendant_of_mediator": self.descendant_of_mediator,
            "descendant_of_exposure": self.descendant_of_exposure,
            "in_some_valid_adjustment_set": self.in_some_valid_adjustment_set,
        }


@dataclass(frozen=True)
class RoleReport:
    roles: dict[str, NodeRole]

    def __getitem__(self, node: str) -> NodeRole:
        return self.roles[node]

    def as_dict(self) -> dict[str, dict[str, bool]]:
        return {node: role.as_dict() for node, role in sorted(self.roles.items())}


@lru_cache(maxsize=4096)
def _backdoor_paths(dag: Dag, exposure: str, outcome: str) -> tuple[Path, ...]:
    return tuple(
        p for p in all_paths(dag, exposure, outcome) if p.starts_into_origin()
    )


def backdoor_paths(query: CausalQuery) -> list[Path]:
    """All simple exposure-outcome paths whose first edge points into the exposure."""
    return list(_backdoor_paths(query.dag, query.exposure, query.outcome))


def satisfies_backdoor(query: CausalQuery, adjustment: Iterable[str]) -> bool:
    """Back-door criterion for a candidate adjustment set.

    True when the set, together with the design-conditioned nodes,
    blocks every back-door path, and the set contains no descendant of
    the exposure.
    """
    s = frozenset(adjustment)
    if query.exposure in s or query.outcome in s:
        raise IdentError("adjustment set cannot contain the exposure or outcome")
    unknown = s - query.measured
    if unknown:
        raise IdentError(f"adjustment set contains unmeasured nodes: {sorted(unknown)}")
    if s & descendants(query.dag, query.exposure):
        return False
    conditioning = s | query.conditioned
    return all(
        path_blocked(query.dag, p, conditioning)
        for p in _backdoor_paths(query.dag, query.exposure, query.outcome)
    )


def _candidate_pool(query: CausalQuery) -> list[str]:
    banned = (
        {query.exposure, query.outcome}
        | descendants(query.dag, query.exposure)
        | query.conditioned
    )
    return sorted(query.measured - banned)


def enumerate_adjustment_sets(
    query: CausalQuery, minimal_only: bool = False, allow_large: bool = False
) -> list[frozenset[str]]:
    """All measured node subsets that satisfy the back-door criterion.

    Candidates exclude the exposure, the outcome, descendants of the
    exposure, and nodes already conditioned by design.  Results come
    out ordered by size, then lexicographically.  With ``minimal_only``
    only inclusion-minimal sets are kept.  An empty result means no
    measured adjustment set exists.
    """
    pool = _candidate_pool(query)
    if len(pool) > ENUMERATION_BOUND and not allow_large:
        raise EnumerationBoundError(len(pool))
    valid: list[frozenset[str]] = []
    for size in range(len(pool) + 1):
        for combo in combinations(pool, size):
            s = frozenset(combo)
            if minimal_only and any(kept <= s for kept in valid):
                continue
            if satisfies_backdoor(query, s):
                valid.append(s)
    return valid


def classify_roles(query: CausalQuery, allow_large: bool = False) -> RoleReport:
    """Per-node structural flags relative to the exposure-outcome pair.

    Path flags (back-door membership, collider, mediator) refer to
    interior positions on simple exposure-outcome paths; descendant
    flags are plain graph facts.
    """
    dag = query.dag
    paths = all_paths(dag, query.exposure, query.outcome)
    on_backdoor: set[str] = set()
    colliders: set[str] = set()
    mediators: set[str] = set()
    for p in paths:
        interior = p.nodes[1:-1]
        if p.starts_into_origin():
            on_backdoor.update(interior)
        for i in p.collider_indices():
            colliders.add(p.nodes[i])
        if p.is_directed():
            mediators.update(interior)

    desc_of_mediator: set[str] = set()
    for m in mediators:
        desc_of_mediator |= descendants(dag, m)
    desc_of_exposure = descendants(dag, query.exposure)

    in_valid: set[str] = set()
    for s in enumerate_adjustment_sets(query, allow_large=allow_large):
        in_valid |= s

    roles = {
        v: NodeRole(
            on_backdoor_path=v in on_backdoor,
            collider_on_ay_path=v in colliders,
            mediator=v in mediators,
            descendant_of_mediator=v in desc_of_mediator,
            descendant_of_exposure=v in desc_of_exposure,
            in_some_valid_adjustment_set=v in in_valid,
        )
        for v in dag.nodes
    }
    return RoleReport(roles)

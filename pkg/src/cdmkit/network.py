"""Social network model, report profiles and BFS layering.

A :class:`Network` is the base social graph. Workers report a
:class:`Report` (the data they offer plus the children they invite);
``None`` in a profile means the worker does not take part. From a profile we
build the generated network, check feasibility, and reduce any directed graph
to a single-source layered DAG whose edges only join consecutive BFS layers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Hashable, Iterable, Mapping, Optional, Tuple

from .errors import (
    InvalidDeviationError,
    InvalidProfileError,
    MissingRequesterError,
    UnknownWorkerError,
)

WorkerId = int
Edge = Tuple[WorkerId, WorkerId]

REQUESTER: WorkerId = 0


@dataclass(frozen=True)
class Network:
    requester: WorkerId
    workers: FrozenSet[WorkerId]
    edges: FrozenSet[Edge]

    def __post_init__(self):
        object.__setattr__(self, "workers", frozenset(self.workers))
        object.__setattr__(self, "edges", frozenset((u, v) for u, v in self.edges))
        if self.requester in self.workers:
            raise InvalidProfileError(f"requester {self.requester} listed as a worker")
        nodes = self.nodes
        for u, v in self.edges:
            if u == v:
                raise InvalidProfileError(f"self-loop on {u}")
            if u not in nodes or v not in nodes:
                raise InvalidProfileError(f"edge ({u}, {v}) has an undeclared endpoint")

    @classmethod
    def from_edges(cls, edges: Iterable[Edge], requester: WorkerId = REQUESTER,
                   workers: Iterable[WorkerId] = (), directed: bool = True) -> "Network":
        """Build a network, declaring every edge endpoint as a node.

        Undirected input is expanded to a pair of directed edges.
        """
        edge_set = set()
        for u, v in edges:
            edge_set.add((u, v))
            if not directed:
                edge_set.add((v, u))
        nodes = set(workers)
        for u, v in edge_set:
            nodes.update((u, v))
        nodes.discard(requester)
        return cls(requester, frozenset(nodes), frozenset(edge_set))

    @property
    def nodes(self) -> FrozenSet[WorkerId]:
        return self.workers | {self.requester}

    @cached_property
    def _children(self) -> Dict[WorkerId, FrozenSet[WorkerId]]:
        out: Dict[WorkerId, set] = {u: set() for u in self.nodes}
        for u, v in self.edges:
            out[u].add(v)
        return {u: frozenset(vs) for u, vs in out.items()}

    @cached_property
    def _parents(self) -> Dict[WorkerId, FrozenSet[WorkerId]]:
        out: Dict[WorkerId, set] = {u: set() for u in self.nodes}
        for u, v in self.edges:
            out[v].add(u)
        return {u: frozenset(vs) for u, vs in out.items()}

    def children(self, node: WorkerId) -> FrozenSet[WorkerId]:
        try:
            return self._children[node]
        except KeyError:
            raise UnknownWorkerError(f"unknown node {node}") from None

    def parents(self, node: WorkerId) -> FrozenSet[WorkerId]:
        try:
            return self._parents[node]
        except KeyError:
            raise UnknownWorkerError(f"unknown node {node}") from None

    def induced(self, nodes: Iterable[WorkerId]) -> "Network":
        keep = set(nodes) | {self.requester}
        return Network(
            self.requester,
            frozenset(keep - {self.requester}),
            frozenset((u, v) for u, v in self.edges if u in keep and v in keep),
        )

    def reachable(self) -> FrozenSet[WorkerId]:
        """Nodes reachable from the requester, requester included."""
        seen = {self.requester}
        queue = deque([self.requester])
        while queue:
            u = queue.popleft()
            for v in self._children[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return frozenset(seen)


@dataclass(frozen=True)
class Report:
    """What a participating worker declares: offered data and invited children."""

    dataset: FrozenSet[Hashable] = frozenset()
    children: FrozenSet[WorkerId] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "dataset", frozenset(self.dataset))
        object.__setattr__(self, "children", frozenset(self.children))


# Missing keys are treated exactly like explicit None (non-participation).
ReportProfile = Mapping[WorkerId, Optional[Report]]


def truthful_profile(base: Network, datasets: Mapping[WorkerId, Iterable[Hashable]]) -> Dict[WorkerId, Report]:
    """Every worker offers all its data and invites all its children."""
    return {
        w: Report(frozenset(datasets.get(w, ())), base.children(w))
        for w in sorted(base.workers)
    }


def _check_profile(base: Network, profile: ReportProfile) -> None:
    for w, rep in profile.items():
        if w not in base.workers:
            raise InvalidProfileError(f"profile names unknown worker {w}")
        if rep is None:
            continue
        extra = rep.children - base.children(w)
        if extra:
            raise InvalidProfileError(f"worker {w} invites non-children {sorted(extra)}")


def _participants(profile: ReportProfile) -> set:
    return {w for w, rep in profile.items() if rep is not None}


def generate_network(base: Network, profile: ReportProfile) -> Network:
    """The subgraph of ``base`` spanned by the requester and invited workers.

    The requester always informs all of her children. Invited workers whose
    report is ``None`` refused to take part and are left out; the edge set is
    the base edges induced on what remains.
    """
    _check_profile(base, profile)
    active = _participants(profile)
    invited = set(base.children(base.requester))
    for w in active:
        invited |= profile[w].children
    return base.induced(invited & active)


def is_feasible(base: Network, profile: ReportProfile) -> bool:
    """True iff every participating worker is reachable from the requester."""
    try:
        gen = generate_network(base, profile)
    except InvalidProfileError:
        return False
    return _participants(profile) <= gen.reachable()


def _reached_by_invitation(base: Network, profile: ReportProfile) -> set:
    reached = set()
    queue = deque(base.children(base.requester))
    while queue:
        w = queue.popleft()
        if w in reached:
            continue
        reached.add(w)
        rep = profile.get(w)
        if rep is not None:
            queue.extend(rep.children - reached)
    return reached


def restrict_profile(base: Network, profile: ReportProfile, deviator: WorkerId,
                     deviation: Report, true_dataset: Optional[Iterable[Hashable]] = None
                     ) -> Dict[WorkerId, Optional[Report]]:
    """Replace ``deviator``'s report and drop everyone who is no longer informed.

    ``true_dataset`` defaults to the deviator's dataset in ``profile`` (i.e.
    the profile is taken to be truthful for the deviator).
    """
    _check_profile(base, profile)
    if deviator not in base.workers:
        raise InvalidDeviationError(f"unknown deviator {deviator}")
    if not deviation.children <= base.children(deviator):
        raise InvalidDeviationError(f"worker {deviator} cannot invite non-children")
    if true_dataset is None:
        current = profile.get(deviator)
        true_dataset = current.dataset if current is not None else frozenset()
    if not deviation.dataset <= frozenset(true_dataset):
        raise InvalidDeviationError(f"worker {deviator} reports data it does not own")

    updated = dict(profile)
    updated[deviator] = deviation
    reached = _reached_by_invitation(base, updated)
    return {w: (rep if w in reached else None) for w, rep in updated.items()}


@dataclass(frozen=True)
class LayeredDag:
    """BFS layer decomposition of a single-source graph.

    Only edges from depth ``d`` to depth ``d + 1`` are kept, so every parent
    of a worker sits in the layer right above it.
    """

    requester: WorkerId
    layers: Tuple[Tuple[WorkerId, ...], ...]
    depth: Mapping[WorkerId, int]
    children_map: Mapping[WorkerId, FrozenSet[WorkerId]]
    parents_map: Mapping[WorkerId, FrozenSet[WorkerId]]
    dropped: int = 0
    _anc_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def workers(self) -> FrozenSet[WorkerId]:
        return frozenset(w for layer in self.layers for w in layer)

    @property
    def edges(self) -> FrozenSet[Edge]:
        return frozenset((u, v) for u, vs in self.children_map.items() for v in vs)

    def children(self, node: WorkerId) -> FrozenSet[WorkerId]:
        if node not in self.children_map:
            raise UnknownWorkerError(f"unknown node {node}")
        return self.children_map[node]

    def parents(self, node: WorkerId) -> FrozenSet[WorkerId]:
        if node not in self.parents_map:
            raise UnknownWorkerError(f"unknown node {node}")
        return self.parents_map[node]

    def ancestors(self, node: WorkerId) -> FrozenSet[WorkerId]:
        """``pred(node)``: every node with a path to ``node``, requester included."""
        if node not in self.parents_map:
            raise UnknownWorkerError(f"unknown node {node}")
        hit = self._anc_cache.get(node)
        if hit is not None:
            return hit
        seen = set()
        stack = list(self.parents_map[node])
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(self.parents_map[u])
        out = frozenset(seen)
        self._anc_cache[node] = out
        return out

    def to_network(self) -> Network:
        return Network(self.requester, self.workers, self.edges)


def layerize(graph: Network) -> LayeredDag:
    """BFS from the requester; keep only edges between consecutive layers.

    Intra-layer and backward edges are removed and unreachable vertices are
    dropped (their number is kept in ``LayeredDag.dropped``).
    """
    s = graph.requester
    if s is None or s not in graph.nodes:
        raise MissingRequesterError("graph has no requester vertex")
    depth = {s: 0}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in sorted(graph.children(u)):
            if v not in depth:
                depth[v] = depth[u] + 1
                queue.append(v)

    children = {u: set() for u in depth}
    parents = {u: set() for u in depth}
    for u, v in graph.edges:
        if u in depth and v in depth and depth[v] == depth[u] + 1:
            children[u].add(v)
            parents[v].add(u)

    k = max(depth.values())
    layers = tuple(
        tuple(sorted(w for w, d in depth.items() if d == i)) for i in range(1, k + 1)
    )
    return LayeredDag(
        requester=s,
        layers=layers,
        depth=depth,
        children_map={u: frozenset(vs) for u, vs in children.items()},
        parents_map={u: frozenset(vs) for u, vs in parents.items()},
        dropped=len(graph.workers) - (len(depth) - 1),
    )

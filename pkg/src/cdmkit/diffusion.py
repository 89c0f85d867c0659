"""Diffusion contributions: reward passed up to the predecessors of a worker.

For a target ``j`` the requester starts with a virtual credit of
``alpha * phi_j``. Each frontier node hands ``gamma`` times its credit to its
children that lead to ``j`` (split evenly between them), layer by layer,
until the frontier reaches ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

from .allocation import DataContribution
from .errors import ParamsError, UnknownWorkerError
from .network import LayeredDag, WorkerId


@dataclass
class DiffusionMatrix:
    requester: WorkerId
    pi: Dict[Tuple[WorkerId, WorkerId], float] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.pi.get(key, 0)

    def column(self, target: WorkerId) -> Dict[WorkerId, float]:
        """Credits for ``target`` held by workers (requester row excluded)."""
        return {i: x for (i, j), x in self.pi.items() if j == target and i != self.requester}


def reach_counts(dag: LayeredDag, target: WorkerId) -> Dict[WorkerId, int]:
    """``m_k`` for every predecessor ``k`` of ``target``: children of ``k`` that
    are ``target`` or lead to it."""
    if target == dag.requester or target not in dag.parents_map:
        raise UnknownWorkerError(f"{target} is not a worker of the dag")
    pred = dag.ancestors(target)
    hit = pred | {target}
    return {k: len(dag.children(k) & hit) for k in pred}


def _check(alpha, gamma):
    if not 0 < gamma <= 0.5:
        raise ParamsError(f"gamma must be in (0, 1/2], got {gamma}")
    if not 0 < alpha <= 1:
        raise ParamsError(f"alpha must be in (0, 1], got {alpha}")


def _propagate(dag: LayeredDag, target: WorkerId, phi_j, alpha, gamma, out: dict) -> None:
    s = dag.requester
    pred = dag.ancestors(target)
    hit = pred | {target}
    credit = {s: alpha * phi_j}
    out[(s, target)] = credit[s]
    frontier = {s}
    while frontier and frontier != {target}:
        nxt = {}
        for k in frontier:
            kids = dag.children(k) & hit
            share = gamma * credit[k] / len(kids)
            for c in kids:
                nxt[c] = nxt.get(c, 0) + share
        nxt.pop(target, None)
        for c, x in nxt.items():
            out[(c, target)] = x
        credit = nxt
        frontier = set(nxt) or {target}


def diffusion_contributions(dag: LayeredDag, phi: Mapping[WorkerId, float],
                            alpha, gamma, *, check: bool = True) -> DiffusionMatrix:
    """All pairwise credits ``pi[(i, j)]`` including the requester's virtual row.

    ``phi`` maps workers to their data contribution (a ``DataContribution`` or
    a plain dict). Works with floats or ``Fraction``.
    """
    if check:
        _check(alpha, gamma)
    values = phi.values if isinstance(phi, DataContribution) else phi
    mat = DiffusionMatrix(dag.requester)
    for layer in dag.layers:
        for j in layer:
            _propagate(dag, j, values.get(j, 0), alpha, gamma, mat.pi)
    return mat


def total_diffusion(matrix: DiffusionMatrix) -> Dict[WorkerId, float]:
    """``pi_i = sum_j pi[(i, j)]`` for every worker holding some credit."""
    totals: Dict[WorkerId, float] = {}
    for (i, _), x in matrix.pi.items():
        if i != matrix.requester:
            totals[i] = totals.get(i, 0) + x
    return totals

"""JSON instance files.

Layout::

    {"requester": 0,
     "edges": [[0, 1], [1, 2]],
     "directed": true,
     "datasets": {"1": [3, 4], "2": [[0, 2], [1, 1]]},
     "schema": {"classes": [{"name": "animal", "dim": 3}, {"name": "plant", "dim": 5}]},
     "universe_size": 100}

Dataset entries are item ids, bare feature rows (the datum id is then
``"<worker>/<position>"``) or ``{"id": ..., "features": [...]}`` objects.
``schema`` and ``universe_size`` are optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

from .errors import InvalidProfileError
from .network import Network, truthful_profile
from .valuation import AtomicDatum, CoverageValuation, EntropyValuation, FeatureSchema


@dataclass
class LoadedInstance:
    base: Network
    datasets: Dict[int, frozenset]
    schema: Optional[FeatureSchema] = None
    universe_size: Optional[int] = None

    def truthful_profile(self):
        return truthful_profile(self.base, self.datasets)

    def valuation(self, kind: str = "coverage"):
        if kind == "entropy":
            if self.schema is None:
                raise InvalidProfileError("entropy valuation needs a schema in the instance file")
            return EntropyValuation(self.schema)
        return CoverageValuation(self.universe_size)


def _datum(worker, pos, item):
    if isinstance(item, dict):
        feats = item.get("features")
        return AtomicDatum(item["id"], tuple(feats) if feats is not None else None)
    if isinstance(item, (list, tuple)):
        return AtomicDatum(f"{worker}/{pos}", tuple(item))
    return item


def parse_instance(obj: dict) -> LoadedInstance:
    requester = int(obj.get("requester", 0))
    edges = [(int(u), int(v)) for u, v in obj.get("edges", [])]
    raw = obj.get("datasets", {})
    datasets = {
        int(w): frozenset(_datum(int(w), k, item) for k, item in enumerate(items))
        for w, items in raw.items()
    }
    base = Network.from_edges(edges, requester=requester, workers=datasets.keys(),
                              directed=bool(obj.get("directed", True)))
    schema = FeatureSchema.from_json(obj["schema"]) if obj.get("schema") else None
    return LoadedInstance(base, datasets, schema, obj.get("universe_size"))


def load_instance(source: Union[str, Path, dict]) -> LoadedInstance:
    if isinstance(source, dict):
        return parse_instance(source)
    with open(source) as fh:
        return parse_instance(json.load(fh))


def instance_to_json(base: Network, datasets, schema: Optional[FeatureSchema] = None,
                     universe_size: Optional[int] = None) -> dict:
    def enc(d):
        if isinstance(d, AtomicDatum):
            return {"id": d.id, "features": list(d.features) if d.features else None}
        return d

    out = {
        "requester": base.requester,
        "edges": sorted([u, v] for u, v in base.edges),
        "directed": True,
        "datasets": {str(w): sorted((enc(d) for d in ds), key=repr)
                     for w, ds in sorted(datasets.items())},
    }
    if schema is not None:
        out["schema"] = schema.to_json()
    if universe_size is not None:
        out["universe_size"] = universe_size
    return out

"""Every orientation/key/mode query over a graph, rendered as canonical JSON."""

from __future__ import annotations

import json

from consentchain.domain.conditions import CONDITION_TYPES
from consentchain.errors import UnknownKey
from consentchain.provenance import Mode, Orientation, OrientationQuery

KEYS = {
    Orientation.USER: ["david", "nina", "DOC:david"],
    Orientation.RESOURCE: [f"PHI{n}" for n in range(1001, 1011)],
    Orientation.OPERATION: ["Read", "Write", "Update"],
    Orientation.CONDITION: sorted(CONDITION_TYPES),
}


def all_queries(graph) -> dict[str, list[dict]]:
    out = {}
    for orientation, keys in KEYS.items():
        for key in keys:
            for mode in Mode:
                name = f"{orientation.value}|{key}|{mode.value}"
                try:
                    out[name] = [r.to_dict() for r in graph.query(OrientationQuery(orientation, key, mode))]
                except UnknownKey:
                    out[name] = "UnknownKey"
    return out


def render(graph) -> str:
    return json.dumps(all_queries(graph), sort_keys=True, indent=1) + "\n"

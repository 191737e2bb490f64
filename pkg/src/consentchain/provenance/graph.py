"""Consent-provenance graph built from ledger events.

Nodes are keyed by a typed string id (``user:DOC:david``, ``resource:PHI1005``)
so two graphs built from the same event stream compare equal field by field.
Consents get a node of their own: resource, operation and condition edges
need a source, and a consent may name several users.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from ..domain.conditions import CONDITION_TYPES
from ..domain.matrix import PhiCatalog, default_catalog
from ..domain.serialize import condition_from_dict
from ..domain.types import OperationKind, UserRef
from ..errors import MalformedEvent, UnknownKey, UnknownPhi
from ..ledger.chain import EventKind, EventRecord


class NodeKind(str, enum.Enum):
    PATIENT = "PatientNode"
    USER = "UserNode"
    RESOURCE = "ResourceNode"
    OPERATION = "OperationNode"
    CONDITION = "ConditionNode"
    CONSENT = "ConsentNode"
    EVENT = "EventNode"


class EdgeKind(str, enum.Enum):
    GAVE = "GAVE"
    GRANTS_TO = "GRANTS_TO"
    COVERS = "COVERS"
    PERMITS = "PERMITS"
    GUARDED_BY = "GUARDED_BY"
    EXECUTED = "EXECUTED"


class Orientation(str, enum.Enum):
    USER = "UserOriented"
    RESOURCE = "ResourceOriented"
    OPERATION = "OperationOriented"
    CONDITION = "ConditionOriented"


class Mode(str, enum.Enum):
    GIVEN = "Given"
    EXECUTED = "Executed"


SHAPES = {
    NodeKind.PATIENT: "house",
    NodeKind.USER: "ellipse",
    NodeKind.RESOURCE: "note",
    NodeKind.OPERATION: "diamond",
    NodeKind.CONDITION: "hexagon",
    NodeKind.CONSENT: "box",
    NodeKind.EVENT: "plaintext",
}

_CONSENT_KEYS = ("consent_id", "patient_id", "users", "objects", "operations", "conditions")
_ACCESS_KEYS = ("request_id", "patient_id", "consent_id", "user", "phi_id", "operation", "outcome",
                "reasons", "evaluated", "requested_at", "use_ordinal")


@dataclass
class Node:
    kind: NodeKind
    node_id: str
    attrs: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.node_id, "kind": self.kind.value, "attrs": self.attrs}


@dataclass(frozen=True)
class Edge:
    kind: EdgeKind
    src: str
    dst: str
    consent_id: str
    attrs: tuple[tuple[str, Any], ...] = ()

    def attr(self, name: str, default=None):
        return dict(self.attrs).get(name, default)

    def sort_key(self):
        return (self.kind.value, self.src, self.dst, self.consent_id, json.dumps(self.attrs))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "src": self.src, "dst": self.dst, "consent_id": self.consent_id,
                "attrs": dict(self.attrs)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Edge":
        return cls(EdgeKind(d["kind"]), d["src"], d["dst"], d["consent_id"], _freeze(d["attrs"]))


def _freeze(attrs: dict[str, Any]) -> tuple[tuple[str, Any], ...]:
    # lists become tuples so edges stay hashable
    return tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in attrs.items()))


@dataclass(frozen=True)
class OrientationQuery:
    orientation: Orientation
    key: str
    mode: Mode = Mode.GIVEN

    def __post_init__(self) -> None:
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass(frozen=True)
class QueryRow:
    consent_id: str
    patient_id: str
    users: tuple[str, ...]
    resources: tuple[str, ...]
    operations: tuple[str, ...]
    conditions: tuple[str, ...]
    status: str
    outcome: str | None = None
    timestamp: int | None = None
    use_ordinal: int | None = None
    event_id: str | None = None
    reasons: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}


def _require(payload: dict[str, Any], keys: Iterable[str], ev: EventRecord) -> None:
    missing = [k for k in keys if k not in payload]
    if missing:
        raise MalformedEvent(f"event {ev.event_id} ({ev.kind.value}) lacks {', '.join(missing)}")


def _event_order(event_id: str) -> tuple[int, int]:
    height, _, index = event_id.partition("-")
    return int(height), int(index)


class ProvenanceGraph:
    def __init__(self, catalog: PhiCatalog | None = None) -> None:
        self.catalog = catalog or default_catalog()
        self.nodes: dict[str, Node] = {}
        self.edges: set[Edge] = set()
        self.ingested: set[str] = set()

    # construction ----------------------------------------------------------
    def _node(self, kind: NodeKind, node_id: str, **attrs) -> str:
        node = self.nodes.get(node_id)
        if node is None:
            node = self.nodes[node_id] = Node(kind, node_id, {})
        node.attrs.update(attrs)
        return node_id

    def _resource(self, phi_id: str) -> str:
        name = self.catalog[phi_id].name if phi_id in self.catalog else phi_id
        return self._node(NodeKind.RESOURCE, f"resource:{phi_id}", phi_id=phi_id, name=name)

    def ingest(self, events: Iterable[EventRecord]) -> "ProvenanceGraph":
        """Fold events (in chain order) into the graph. Already-seen event ids are skipped."""
        for ev in events:
            if ev.event_id in self.ingested:
                continue
            handler = getattr(self, f"_on_{ev.kind.name.lower()}", None)
            if handler is not None:
                handler(ev, ev.payload)
            self.ingested.add(ev.event_id)
        return self

    def _on_consent_created(self, ev: EventRecord, p: dict[str, Any]) -> None:
        _require(p, _CONSENT_KEYS, ev)
        cid = p["consent_id"]
        patient = self._node(NodeKind.PATIENT, f"patient:{p['patient_id']}", patient_id=p["patient_id"])
        consent = self._node(NodeKind.CONSENT, f"consent:{cid}", consent_id=cid, patient_id=p["patient_id"],
                             status="active", created_at=ev.event_id, source=p.get("source", ""))
        self.edges.add(Edge(EdgeKind.GAVE, patient, consent, cid))
        for u in p["users"]:
            ref = UserRef.parse(u)
            user = self._node(NodeKind.USER, f"user:{u}", user_id=ref.user_id, role=ref.role.value)
            self.edges.add(Edge(EdgeKind.GRANTS_TO, consent, user, cid))
        for phi in p["objects"]:
            self.edges.add(Edge(EdgeKind.COVERS, consent, self._resource(phi), cid))
        for op in p["operations"]:
            node = self._node(NodeKind.OPERATION, f"operation:{op}", operation=op)
            self.edges.add(Edge(EdgeKind.PERMITS, consent, node, cid))
        for cd in p["conditions"]:
            cond = condition_from_dict(cd)
            node = self._node(NodeKind.CONDITION, f"condition:{cond.label}",
                              condition_kind=cond.kind, label=cond.label)
            self.edges.add(Edge(EdgeKind.GUARDED_BY, consent, node, cid))

    def _consent(self, ev: EventRecord, p: dict[str, Any]) -> str:
        _require(p, ("consent_id", "patient_id"), ev)
        return self._node(NodeKind.CONSENT, f"consent:{p['consent_id']}", consent_id=p["consent_id"],
                          patient_id=p["patient_id"])

    def _on_consent_altered(self, ev: EventRecord, p: dict[str, Any]) -> None:
        _require(p, ("new_consent_id",), ev)
        self._node(NodeKind.CONSENT, self._consent(ev, p), replaced_by=p["new_consent_id"])

    def _on_consent_terminated(self, ev: EventRecord, p: dict[str, Any]) -> None:
        self._consent(ev, p)

    def _on_consent_expired(self, ev: EventRecord, p: dict[str, Any]) -> None:
        _require(p, ("violated",), ev)
        label = condition_from_dict(p["violated"]).label if p["violated"] else None
        self._node(NodeKind.CONSENT, self._consent(ev, p), violated=label)

    def _on_consent_archived(self, ev: EventRecord, p: dict[str, Any]) -> None:
        _require(p, ("reason",), ev)
        self._node(NodeKind.CONSENT, self._consent(ev, p), status="historical", archive_reason=p["reason"])

    def _on_access(self, ev: EventRecord, p: dict[str, Any]) -> None:
        _require(p, _ACCESS_KEYS, ev)
        # a deny hangs off the first consent evaluated, else the archived consent that explains it
        blamed = [r["consent_id"] for r in p["reasons"] if r.get("consent_id")]
        cid = p["consent_id"] or next(iter([*p["evaluated"], *blamed]), "")
        target = f"consent:{cid}" if cid else self._node(NodeKind.PATIENT, f"patient:{p['patient_id']}",
                                                          patient_id=p["patient_id"])
        if cid:
            self._node(NodeKind.CONSENT, target, consent_id=cid, patient_id=p["patient_id"])
        node = self._node(NodeKind.EVENT, f"event:{ev.event_id}", event_id=ev.event_id, request_id=p["request_id"])
        reasons = []
        for r in p["reasons"]:
            cond = r.get("condition")
            reasons.append(f"{r['code']}({condition_from_dict(cond).label})" if cond else r["code"])
        attrs = {
            "outcome": p["outcome"], "at": p["requested_at"], "ordinal": p["use_ordinal"],
            "user": p["user"], "resource": p["phi_id"], "operation": p["operation"],
            "patient_id": p["patient_id"], "event_id": ev.event_id, "reasons": reasons,
        }
        self.edges.add(Edge(EdgeKind.EXECUTED, node, target, cid, _freeze(attrs)))

    _on_access_granted = _on_access
    _on_access_denied = _on_access

    # inspection ------------------------------------------------------------
    def edges_of(self, kind: EdgeKind, consent_id: str | None = None) -> list[Edge]:
        out = [e for e in self.edges if e.kind is kind and (consent_id is None or e.consent_id == consent_id)]
        return sorted(out, key=Edge.sort_key)

    def executed_grants(self, consent_id: str) -> int:
        return sum(1 for e in self.edges_of(EdgeKind.EXECUTED, consent_id) if e.attr("outcome") == "Grant")

    def _targets(self, consent_id: str, kind: EdgeKind) -> list[str]:
        return sorted(e.dst for e in self.edges if e.kind is kind and e.consent_id == consent_id)

    def _given_row(self, node: Node) -> QueryRow:
        cid = node.attrs["consent_id"]
        conds = [self.nodes[n].attrs["label"] for n in self._targets(cid, EdgeKind.GUARDED_BY)]
        return QueryRow(
            consent_id=cid,
            patient_id=node.attrs.get("patient_id", ""),
            users=tuple(n.removeprefix("user:") for n in self._targets(cid, EdgeKind.GRANTS_TO)),
            resources=tuple(self.nodes[n].attrs["name"] for n in self._targets(cid, EdgeKind.COVERS)),
            operations=tuple(sorted((self.nodes[n].attrs["operation"]
                                     for n in self._targets(cid, EdgeKind.PERMITS)),
                                    key=[o.value for o in OperationKind].index)),
            conditions=tuple(conds),
            status=node.attrs.get("status", "active"),
        )

    # queries ---------------------------------------------------------------
    def _match_user(self, key: str) -> set[str]:
        ids = {nid.removeprefix("user:") for nid, n in self.nodes.items() if n.kind is NodeKind.USER
               and key in (nid.removeprefix("user:"), n.attrs["user_id"])}
        if not ids:
            raise UnknownKey(f"no user {key!r} in the graph")
        return ids

    def _match_resource(self, key: str) -> str:
        try:
            return self.catalog.resolve(key)
        except UnknownPhi:
            if f"resource:{key}" in self.nodes:
                return key
            raise UnknownKey(f"no resource {key!r}") from None

    @staticmethod
    def _match_operation(key: str) -> str:
        try:
            return OperationKind(key.capitalize()).value
        except ValueError:
            raise UnknownKey(f"no operation {key!r}") from None

    def _match_condition(self, key: str):
        if key in CONDITION_TYPES:
            return lambda label: label.split("(", 1)[0] == key
        labels = {n.attrs["label"] for n in self.nodes.values() if n.kind is NodeKind.CONDITION}
        if key in labels:
            return lambda label: label == key
        raise UnknownKey(f"no condition {key!r}")

    def query(self, q: OrientationQuery) -> list[QueryRow]:
        """Rows for one orientation and mode, ordered by consent id and then time."""
        if q.orientation is Orientation.USER:
            users = self._match_user(q.key)
            given = lambda row: bool(users & set(row.users))
            executed = lambda e: e.attr("user") in users
        elif q.orientation is Orientation.RESOURCE:
            phi = self._match_resource(q.key)
            name = self.catalog[phi].name if phi in self.catalog else phi
            given = lambda row: name in row.resources
            executed = lambda e: e.attr("resource") == phi
        elif q.orientation is Orientation.OPERATION:
            op = self._match_operation(q.key)
            given = lambda row: op in row.operations
            executed = lambda e: e.attr("operation") == op
        else:
            hit = self._match_condition(q.key)
            given = lambda row: any(hit(c) for c in row.conditions)
            executed = lambda e: (any(hit(c) for c in self._row(e.consent_id).conditions) if e.consent_id
                                  else False) or any(hit(r.partition("(")[2][:-1]) for r in e.attr("reasons", ()))

        if q.mode is Mode.GIVEN:
            rows = [self._given_row(n) for n in self.nodes.values()
                    if n.kind is NodeKind.CONSENT and "consent_id" in n.attrs]
            return sorted((r for r in rows if given(r)), key=lambda r: r.consent_id)

        rows = []
        for e in self.edges_of(EdgeKind.EXECUTED):
            if not executed(e):
                continue
            base = self._row(e.consent_id)
            rows.append(QueryRow(
                consent_id=e.consent_id, patient_id=e.attr("patient_id"), users=(e.attr("user"),),
                resources=(self._resource_name(e.attr("resource")),), operations=(e.attr("operation"),),
                conditions=base.conditions, status=base.status, outcome=e.attr("outcome"),
                timestamp=e.attr("at"), use_ordinal=e.attr("ordinal"), event_id=e.attr("event_id"),
                reasons=tuple(e.attr("reasons", ())),
            ))
        return sorted(rows, key=lambda r: (r.consent_id, r.timestamp, _event_order(r.event_id)))

    def _resource_name(self, phi_id: str) -> str:
        return self.catalog[phi_id].name if phi_id in self.catalog else phi_id

    def _row(self, consent_id: str) -> QueryRow:
        node = self.nodes.get(f"consent:{consent_id}")
        if not consent_id or node is None:
            return QueryRow(consent_id, "", (), (), (), (), "unknown")
        return self._given_row(node)

    # export ----------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [self.nodes[k].to_dict() for k in sorted(self.nodes)],
            "edges": [e.to_dict() for e in sorted(self.edges, key=Edge.sort_key)],
            "ingested": sorted(self.ingested, key=_event_order),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str, catalog: PhiCatalog | None = None) -> "ProvenanceGraph":
        data = json.loads(text)
        g = cls(catalog)
        for n in data["nodes"]:
            g.nodes[n["id"]] = Node(NodeKind(n["kind"]), n["id"], dict(n["attrs"]))
        g.edges = {Edge.from_dict(e) for e in data["edges"]}
        g.ingested = set(data["ingested"])
        return g

    def to_dot(self) -> str:
        lines = ["digraph provenance {", "  rankdir=LR;"]
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            label = _node_label(node)
            lines.append(f"  {_q(nid)} [shape={SHAPES[node.kind]}, label={_q(label)}, "
                         f"type={_q(node.kind.value)}];")
        for e in sorted(self.edges, key=Edge.sort_key):
            label = f"{e.kind.value} {e.consent_id}".strip()
            if e.kind is EdgeKind.EXECUTED:
                label += f" {e.attr('outcome')}"
            lines.append(f"  {_q(e.src)} -> {_q(e.dst)} [label={_q(label)}];")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def export(self, fmt: str = "dot") -> bytes:
        if fmt == "dot":
            return self.to_dot().encode()
        if fmt in ("json", "structured-text"):
            return self.to_json().encode()
        raise ValueError(f"unknown export format {fmt!r}")


def _node_label(node: Node) -> str:
    a = node.attrs
    return {
        NodeKind.PATIENT: lambda: a.get("patient_id", ""),
        NodeKind.USER: lambda: f"{a.get('role')}:{a.get('user_id')}",
        NodeKind.RESOURCE: lambda: a.get("name", ""),
        NodeKind.OPERATION: lambda: a.get("operation", ""),
        NodeKind.CONDITION: lambda: a.get("label", ""),
        NodeKind.CONSENT: lambda: f"{a.get('consent_id', '')} ({a.get('status', 'active')})",
        NodeKind.EVENT: lambda: a.get("event_id", ""),
    }[node.kind]()


def _q(text: str) -> str:
    return json.dumps(text, ensure_ascii=True)


def build_graph(events: Iterable[EventRecord], catalog: PhiCatalog | None = None) -> ProvenanceGraph:
    return ProvenanceGraph(catalog).ingest(events)

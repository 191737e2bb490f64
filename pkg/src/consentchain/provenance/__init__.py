from .graph import (
    Edge,
    EdgeKind,
    Mode,
    Node,
    NodeKind,
    Orientation,
    OrientationQuery,
    ProvenanceGraph,
    QueryRow,
    build_graph,
)

__all__ = [
    "Edge", "EdgeKind", "Mode", "Node", "NodeKind", "Orientation", "OrientationQuery",
    "ProvenanceGraph", "QueryRow", "build_graph",
]

"""Directed parameter graph used by the graph-convolution layer.

Nodes are monitored quantities (irradiances and temperatures); a directed edge
``src -> dst`` means ``src`` influences ``dst`` at the same time step. The same
spatial adjacency is applied at every step of a window, and temporal links from
a node to its next state are carried by the recurrent cell, not by edges.
Power output is deliberately not a node: it is the prediction target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidEdge, NotNeighbor

DEFAULT_NODES = ("G_sw", "G_lw", "T_air", "T_pv")
DEFAULT_EDGES = ((0, 3), (1, 3), (2, 3))


@dataclass(frozen=True)
class TemporalGraphSpec:
    node_names: tuple[str, ...]
    spatial_edges: tuple[tuple[int, int], ...]
    feature_dim: int
    neighbor_counts: tuple[int, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.node_names)

    def in_neighbors(self, i: int) -> list[int]:
        return [src for src, dst in self.spatial_edges if dst == i]

    def aggregation_matrix(self) -> np.ndarray:
        """``|V| x |V|`` matrix ``M`` with ``M[i, j] = 1/|N(i)|`` for each edge ``j -> i``."""
        n = self.num_nodes
        m = np.zeros((n, n))
        for src, dst in self.spatial_edges:
            m[dst, src] = 1.0 / self.neighbor_counts[dst]
        return m

    def to_dict(self) -> dict:
        return {
            "node_names": list(self.node_names),
            "spatial_edges": [list(e) for e in self.spatial_edges],
            "feature_dim": self.feature_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TemporalGraphSpec":
        return build_parameter_graph(d["node_names"], [tuple(e) for e in d["spatial_edges"]], d["feature_dim"])


def build_parameter_graph(node_names=DEFAULT_NODES, spatial_edges=DEFAULT_EDGES, d: int = 1) -> TemporalGraphSpec:
    """Validate a node list and directed edge list and count in-neighbours.

    Raises
    ------
    InvalidEdge
        For an endpoint out of range, a duplicate edge or a self-loop.
    """
    names = tuple(str(n) for n in node_names)
    if len(names) < 1:
        raise InvalidEdge("graph needs at least one node")
    if len(set(names)) != len(names):
        raise InvalidEdge(f"duplicate node names in {names}")
    if d < 1:
        raise InvalidEdge(f"feature_dim must be >= 1, got {d}")
    n = len(names)
    seen: set[tuple[int, int]] = set()
    edges = []
    for edge in spatial_edges:
        src, dst = (int(v) for v in edge)
        if not (0 <= src < n and 0 <= dst < n):
            raise InvalidEdge(f"edge {src}->{dst} out of range for {n} nodes")
        if src == dst:
            raise InvalidEdge(f"self-loop on node {src}")
        if (src, dst) in seen:
            raise InvalidEdge(f"duplicate edge {src}->{dst}")
        seen.add((src, dst))
        edges.append((src, dst))
    counts = [0] * n
    for _, dst in edges:
        counts[dst] += 1
    return TemporalGraphSpec(names, tuple(edges), int(d), tuple(counts))


def aggregation_weight(spec: TemporalGraphSpec, i: int, j: int) -> float:
    """Weight ``1/c_ij`` applied to message ``j -> i``; mean aggregation, ``c_ij = |N(i)|``."""
    if (j, i) not in spec.spatial_edges:
        raise NotNeighbor(f"node {j} is not an in-neighbour of node {i}")
    return 1.0 / spec.neighbor_counts[i]


def parse_edges(text: str, node_names) -> list[tuple[int, int]]:
    """Parse ``"G_sw->T_pv,G_lw->T_pv"`` into index pairs (names or integer indices)."""
    names = list(node_names)
    edges = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "->" not in item:
            raise InvalidEdge(f"edge {item!r} is not of the form src->dst")
        src, dst = (s.strip() for s in item.split("->", 1))
        edges.append((_node_index(src, names), _node_index(dst, names)))
    return edges


def _node_index(token: str, names: list[str]) -> int:
    if token in names:
        return names.index(token)
    try:
        return int(token)
    except ValueError:
        raise InvalidEdge(f"unknown node {token!r}") from None

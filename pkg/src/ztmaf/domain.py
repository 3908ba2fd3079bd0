"""Core identities, topology graph, and shared value types.

The network is a set of vehicle and fog-node identities on a local planar
frame (meters). Links are range-based vehicle-fog pairs; everything here is
an immutable snapshot, safe to share, rebuilt rather than mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

Point = Tuple[float, float]


class NodeKind(Enum):
    VEHICLE = "vehicle"
    FOG = "fog"


class InvalidPosition(ValueError):
    """A coordinate is not a finite number."""


class UnknownNode(KeyError):
    """Referenced node is not part of the topology."""


@dataclass(frozen=True, order=True)
class NodeId:
    kind: NodeKind
    index: int
    label: str

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("node index must be non-negative")

    @staticmethod
    def vehicle(index: int) -> "NodeId":
        return NodeId(NodeKind.VEHICLE, index, f"v{index:03d}")

    @staticmethod
    def fog(index: int) -> "NodeId":
        return NodeId(NodeKind.FOG, index, f"f{index:02d}")


@dataclass(frozen=True)
class ContextVector:
    """Per-vehicle (speed, location, behavior) snapshot at a sim time."""

    speed_mps: float
    location: Point
    behavior: float
    timestamp_s: float

    def __post_init__(self):
        if not math.isfinite(self.speed_mps) or self.speed_mps < 0:
            raise ValueError("speed must be finite and >= 0")
        if not all(math.isfinite(c) for c in self.location):
            raise InvalidPosition(f"non-finite location {self.location}")
        if not 0.0 <= self.behavior <= 1.0:
            raise ValueError("behavior must be in [0, 1]")


@dataclass(frozen=True)
class TopologyGraph:
    vehicles: FrozenSet[NodeId]
    fog_nodes: FrozenSet[NodeId]
    links: FrozenSet[Tuple[NodeId, NodeId]]  # (vehicle, fog) pairs
    comm_range_m: float

    def linked_fogs(self, vehicle: NodeId) -> List[NodeId]:
        return sorted((f for v, f in self.links if v == vehicle), key=lambda n: n.index)


@dataclass
class TrustState:
    """Trust score in [0, 1] plus a bounded update history."""

    value: float = 0.5
    last_update_s: float = 0.0
    history: List[Tuple[float, float]] = field(default_factory=list)
    history_limit: int = 4096

    def record(self, t_s: float, value: float) -> None:
        # equal-timestamp updates coalesce so history stays strictly increasing
        if self.history and t_s <= self.history[-1][0]:
            self.history[-1] = (self.history[-1][0], value)
        else:
            self.history.append((t_s, value))
            if len(self.history) > self.history_limit:
                del self.history[0]
        self.value = value
        self.last_update_s = max(self.last_update_s, t_s)


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def rebuild_links(
    positions: Dict[NodeId, Point],
    fog_positions: Dict[NodeId, Point],
    range_m: float,
) -> TopologyGraph:
    """Recompute the vehicle-fog link set for the given positions.

    A link exists iff the Euclidean distance is <= range_m (closed ball, so
    a vehicle exactly at the boundary stays linked).
    """
    if range_m <= 0:
        raise ValueError("range_m must be positive")
    for pos_map in (positions, fog_positions):
        for node, p in pos_map.items():
            if not all(math.isfinite(c) for c in p):
                raise InvalidPosition(f"non-finite position for {node.label}: {p}")
    links = set()
    for v, vp in positions.items():
        for f, fp in fog_positions.items():
            if distance(vp, fp) <= range_m:
                links.add((v, f))
    return TopologyGraph(
        vehicles=frozenset(positions),
        fog_nodes=frozenset(fog_positions),
        links=frozenset(links),
        comm_range_m=range_m,
    )


def nearest_fog(
    vehicle: NodeId,
    graph: TopologyGraph,
    positions: Dict[NodeId, Point],
    fog_positions: Dict[NodeId, Point],
) -> Optional[NodeId]:
    """Closest linked fog node; ties broken by smallest fog index, None if unlinked."""
    if vehicle not in graph.vehicles:
        raise UnknownNode(vehicle.label)
    candidates = graph.linked_fogs(vehicle)
    if not candidates:
        return None
    vp = positions[vehicle]
    return min(candidates, key=lambda f: (distance(vp, fog_positions[f]), f.index))

"""Tiered HAN/NAN/WAN communication graph and its mixing operator.

The benchmark graph has 12 nodes spread over three tiers. Home-area smart
meters hang off a gateway, neighborhood DER/relay nodes hang off an LTE
controller, and the wide-area backbone links each WAN device to the
controller plus a chain across the WAN devices themselves. Direct
HAN-to-WAN edges are forbidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROLES = (
    "SmartMeter",
    "Gateway",
    "DER",
    "FeederRelay",
    "Controller",
    "PMU",
    "SCADA",
    "AMIHeadend",
    "SubstationGW",
)
TIERS = ("HAN", "NAN", "WAN")
TECHS = ("ZigBee", "WiFi", "LoRa", "PLC", "LTE", "Fiber")

DEFAULT_ELIGIBLE_TECH = ("ZigBee", "WiFi", "LoRa", "PLC", "LTE")

# (id, role, tier, tech) for the fixed 12-node benchmark inventory.
DEFAULT_INVENTORY = (
    (0, "SmartMeter", "HAN", "ZigBee"),
    (1, "SmartMeter", "HAN", "ZigBee"),
    (2, "SmartMeter", "HAN", "WiFi"),
    (3, "Gateway", "HAN", "WiFi"),
    (4, "DER", "NAN", "LoRa"),
    (5, "DER", "NAN", "LoRa"),
    (6, "FeederRelay", "NAN", "PLC"),
    (7, "Controller", "NAN", "LTE"),
    (8, "PMU", "WAN", "Fiber"),
    (9, "SCADA", "WAN", "Fiber"),
    (10, "AMIHeadend", "WAN", "LTE"),
    (11, "SubstationGW", "WAN", "PLC"),
)

# Undirected edges: meters to gateway, gateway to controller, DER/relay to
# controller, every WAN device to the controller, plus the WAN chain.
DEFAULT_EDGES = (
    (0, 3),
    (1, 3),
    (2, 3),
    (3, 7),
    (4, 7),
    (5, 7),
    (6, 7),
    (7, 8),
    (7, 9),
    (7, 10),
    (7, 11),
    (8, 9),
    (9, 10),
    (10, 11),
)


@dataclass(frozen=True)
class NodeSpec:
    id: int
    role: str
    tier: str
    tech: str
    eligible: bool


@dataclass(frozen=True)
class Topology:
    nodes: tuple[NodeSpec, ...]
    adjacency: np.ndarray  # (N, N) binary, symmetric, zero diagonal

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, node_id: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[node_id])]

    def eligible_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.eligible]

    def edges(self) -> list[tuple[int, int]]:
        iu, ju = np.triu_indices(self.n, k=1)
        mask = self.adjacency[iu, ju] > 0
        return [(int(i), int(j)) for i, j in zip(iu[mask], ju[mask])]


def build_default_topology(eligible_tech=DEFAULT_ELIGIBLE_TECH) -> Topology:
    """Construct the fixed 12-node benchmark graph.

    Eligibility is purely a function of technology; fiber nodes are never
    eligible regardless of ``eligible_tech``.
    """
    eligible = set(eligible_tech) - {"Fiber"}
    nodes = tuple(
        NodeSpec(i, role, tier, tech, tech in eligible)
        for i, role, tier, tech in DEFAULT_INVENTORY
    )
    adjacency = np.zeros((len(nodes), len(nodes)), dtype=np.int64)
    for i, j in DEFAULT_EDGES:
        adjacency[i, j] = 1
        adjacency[j, i] = 1
    adjacency.setflags(write=False)
    return Topology(nodes=nodes, adjacency=adjacency)


def compute_mixing(topology: Topology, alpha: float) -> np.ndarray:
    """Row-stochastic self/neighbor blend ``alpha*I + (1-alpha)*D^-1 A``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    degrees = topology.degrees
    zero = np.flatnonzero(degrees == 0)
    if zero.size:
        raise ValueError(f"node {int(zero[0])} has zero degree; mixing undefined")
    a = topology.adjacency.astype(np.float64)
    p = a / degrees[:, None]
    return alpha * np.eye(topology.n) + (1.0 - alpha) * p


def neighbor_aggregate(mixing: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the mixing operator to a node vector (or node-by-time matrix)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != mixing.shape[1]:
        raise ValueError(
            f"dimension mismatch: mixing is {mixing.shape}, signal has leading "
            f"dimension {x.shape[0]}"
        )
    return mixing @ x


def check_tier_constraints(topology: Topology) -> list[str]:
    """Return human-readable violations; empty for a well-formed graph."""
    violations = []
    a = topology.adjacency
    if not np.array_equal(a, a.T):
        bad = np.argwhere(a != a.T)
        i, j = bad[0]
        violations.append(f"adjacency asymmetry at ({int(i)}, {int(j)})")
    if np.any(np.diag(a) != 0):
        violations.append("adjacency has nonzero diagonal")
    nodes = topology.nodes
    for i in range(topology.n):
        for j in range(i + 1, topology.n):
            if not a[i, j]:
                continue
            tiers = {nodes[i].tier, nodes[j].tier}
            if tiers == {"HAN", "WAN"}:
                violations.append(f"HAN-WAN edge ({i}, {j})")
    for node in nodes:
        if node.role != "SmartMeter":
            continue
        for j in topology.neighbors(node.id):
            if nodes[j].role != "Gateway":
                violations.append(
                    f"smart meter {node.id} linked to non-gateway node {j}"
                )
    return violations

"""Priority computation and slot allocation.

Two schemes share one comparator chain:

* mdlps — priority index (PDR/M) * ULB * (1/v) * X, gated to a sentinel
  when the flow's delivery ratio sits below its threshold. Lower index wins.
* data — priority index 1/importance, so the most important data takes the
  lowest index and the first slot.

Ties break by mobility class (faster class first), then battery level index
(first above-threshold band first, below-threshold last), then node id.
Candidates carry a network rank N1 ahead of the node index N2; the grid of
frequency x time positions is filled in scan order by tuple order and stays
frozen until the next critical event re-arms it.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .mobility import MobilityClass

# gate sentinel: strictly greater than every finite priority index
GATE_SENTINEL = float("inf")


class ZeroVelocity(Exception):
    pass


class EmptyGrid(Exception):
    pass


class FrozenGrid(Exception):
    pass


class UnknownNetwork(Exception):
    pass


class OrphanNode(Exception):
    pass


@dataclass(frozen=True)
class FlowParams:
    desired_pdr: float = 0.9
    pdr_threshold: float = 0.25
    deadline_budget: float = 5.0

    def __post_init__(self):
        if not (0 < self.desired_pdr <= 1):
            raise ValueError("desired_pdr must lie in (0, 1]")
        if not (0 <= self.pdr_threshold < 1):
            raise ValueError("pdr_threshold must lie in [0, 1)")
        if self.desired_pdr <= self.pdr_threshold:
            raise ValueError("desired_pdr must exceed pdr_threshold")
        if self.deadline_budget <= 0:
            raise ValueError("deadline_budget must be positive")


def compute_ulb(deadline: float, now: float, remaining_hops: int) -> float:
    """Laxity budget: max(0, deadline - now) / 2^remaining_hops.

    An expired packet (now >= deadline) has budget zero; expiry itself is
    the caller's flag, not an error here.
    """
    if remaining_hops < 0:
        raise ValueError("remaining_hops must be >= 0")
    return max(0.0, deadline - now) / (2.0 ** remaining_hops)


def pdr_gate(pi: float, pdr: float, flow: FlowParams) -> float:
    """Replace the index with the always-lose sentinel when the flow's
    delivery ratio is strictly below its threshold; equality passes."""
    if pdr < flow.pdr_threshold:
        return GATE_SENTINEL
    return pi


def compute_pi_mdlps(pdr: float, flow: FlowParams, ulb: float, v: float, x: float) -> float:
    """Laxity-based priority index: (pdr / desired) * ulb * (1/v) * x,
    passed through the delivery-ratio gate. Lower value = higher priority."""
    if v == 0:
        raise ZeroVelocity("velocity must be positive; clamp paused nodes before calling")
    if v < 0:
        raise ValueError("velocity must be positive")
    if not (0 <= pdr <= 1):
        raise ValueError("pdr must lie in [0, 1]")
    if x < 1:
        raise ValueError("battery factor must be >= 1")
    if ulb < 0:
        raise ValueError("ulb must be non-negative")
    pi = (pdr / flow.desired_pdr) * ulb * (1.0 / v) * x
    return pdr_gate(pi, pdr, flow)


def compute_pi_data(importance: float) -> float:
    """Reciprocal importance: the most important data gets the lowest index."""
    if importance <= 0:
        raise ValueError("importance must be strictly positive")
    return 1.0 / importance


@dataclass(frozen=True)
class Candidate:
    """One contender for a transmission position."""

    node: int
    pi: float
    mob_class: MobilityClass = MobilityClass.V_L
    batt_level: int = 1


def _battery_rank(level_index: int) -> tuple[int, int]:
    # below-threshold (index 0) sorts after every above-threshold band
    return (1, 0) if level_index == 0 else (0, level_index)


def candidate_key(c: Candidate):
    """Total-order sort key: index ascending, mobility class descending,
    battery band ascending (below-threshold last), node id ascending."""
    return (c.pi, -int(c.mob_class), _battery_rank(c.batt_level), c.node)


def rank_candidates(candidates) -> list[Candidate]:
    return sorted(candidates, key=candidate_key)


@dataclass(frozen=True)
class Network:
    id: str
    bandwidth: float
    members: tuple[int, ...] = ()


def network_priority(
    networks,
    positions: dict[int, tuple[float, float]],
    event_xy: tuple[float, float],
    radius: float,
    w_density: float = 0.7,
    w_bandwidth: float = 0.3,
) -> tuple[dict[str, int], bool]:
    """Rank networks 1..K (1 best) for a critical event at event_xy.

    Score = w_density * (own members inside the radius / all members inside
    it) + w_bandwidth * (bandwidth / max bandwidth). When no network reaches
    the area at all, ranking falls back to bandwidth alone and the returned
    flag is True. Ties break by network id.
    """
    networks = list(networks)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if w_density < 0 or w_bandwidth < 0 or (w_density == 0 and w_bandwidth == 0):
        raise ValueError("weights must be non-negative and not both zero")
    if not networks:
        return {}, False
    ex, ey = event_xy
    r2 = radius * radius
    in_area = {}
    for net in networks:
        count = 0
        for node in net.members:
            x, y = positions[node]
            if (x - ex) ** 2 + (y - ey) ** 2 <= r2:
                count += 1
        in_area[net.id] = count
    total_in_area = sum(in_area.values())
    max_bw = max(net.bandwidth for net in networks)
    empty_area = total_in_area == 0
    scores = {}
    for net in networks:
        bw_share = net.bandwidth / max_bw if max_bw > 0 else 0.0
        if empty_area:
            scores[net.id] = bw_share
        else:
            density_share = in_area[net.id] / total_in_area
            scores[net.id] = w_density * density_share + w_bandwidth * bw_share
    ordered = sorted(scores, key=lambda nid: (-scores[nid], nid))
    return {nid: rank + 1 for rank, nid in enumerate(ordered)}, empty_area


@dataclass(frozen=True)
class PriorityTuple:
    """Network rank first, node candidate second; compared lexicographically."""

    n1: int
    n2: Candidate

    @property
    def node(self) -> int:
        return self.n2.node


def tuple_key(pt: PriorityTuple):
    return (pt.n1,) + candidate_key(pt.n2)


def priority_tuple(candidate: Candidate, network_id: str, n1_map: dict[str, int]) -> PriorityTuple:
    if network_id not in n1_map:
        raise UnknownNetwork(f"network {network_id!r} has no rank")
    return PriorityTuple(n1=n1_map[network_id], n2=candidate)


class SlotGrid:
    """frequencies x slots_per_frame transmission positions for one frame.

    The assignment maps each (frequency, slot) position to at most one
    source node and is immutable between critical events: allocation only
    proceeds when the grid has been armed (at startup or by a critical
    event) and each arming permits exactly one allocation.
    """

    def __init__(self, frequencies: int, slots_per_frame: int, frame_length: float):
        self.frequencies = frequencies
        self.slots_per_frame = slots_per_frame
        self.frame_length = frame_length
        self.assignment: dict[tuple[int, int], int | None] = {
            pos: None for pos in self.positions()
        }
        self.frozen_since: float | None = None
        self.armed = True
        self.ever_allocated = False

    def positions(self) -> list[tuple[int, int]]:
        """All (frequency, slot) positions in the fixed scan order."""
        return [(f, s) for f in range(self.frequencies) for s in range(self.slots_per_frame)]

    @property
    def capacity(self) -> int:
        return self.frequencies * self.slots_per_frame

    @property
    def slot_duration(self) -> float:
        return self.frame_length / self.slots_per_frame

    def rearm(self) -> None:
        """Permit one fresh allocation (called at each critical event)."""
        self.armed = True

    def holder(self, pos: tuple[int, int]) -> int | None:
        return self.assignment[pos]

    def position_of(self, node: int) -> tuple[int, int] | None:
        for pos, holder in self.assignment.items():
            if holder == node:
                return pos
        return None

    def assigned_nodes(self) -> set[int]:
        return {n for n in self.assignment.values() if n is not None}


def allocate_slots(sources, grid: SlotGrid, t: float) -> SlotGrid:
    """Fill the grid with the best min(|sources|, capacity) tuples.

    Positions fill in scan order (frequency-major, then slot); the result is
    frozen until the grid is re-armed by the next critical event.
    """
    if grid.capacity == 0:
        raise EmptyGrid("grid has no positions")
    if not grid.armed:
        raise FrozenGrid("allocation without an intervening critical event")
    ranked = sorted(sources, key=tuple_key)
    assignment: dict[tuple[int, int], int | None] = {}
    for pos, src in zip(grid.positions(), ranked):
        assignment[pos] = src.node
    for pos in grid.positions():
        assignment.setdefault(pos, None)
    grid.assignment = {pos: assignment[pos] for pos in grid.positions()}
    grid.frozen_since = t
    grid.armed = False
    grid.ever_allocated = True
    return grid


def assign_clusters(sensors, cluster_heads, positions, reach) -> tuple[dict[int, list[int]], list[int]]:
    """Affiliate each sensor to its nearest in-range cluster head.

    reach(a, b) decides radio reachability. Returns ({ch: members}, orphans);
    orphans are sensors with no cluster head in range. Distance ties break by
    cluster-head id.
    """
    reports: dict[int, list[int]] = {ch: [] for ch in sorted(cluster_heads)}
    orphans: list[int] = []
    for sensor in sorted(sensors):
        sx, sy = positions[sensor]
        best = None
        for ch in sorted(cluster_heads):
            if not reach(sensor, ch):
                continue
            cx, cy = positions[ch]
            d2 = (sx - cx) ** 2 + (sy - cy) ** 2
            if best is None or d2 < best[0]:
                best = (d2, ch)
        if best is None:
            orphans.append(sensor)
        else:
            reports[best[1]].append(sensor)
    return reports, orphans


def global_importance_ranking(cluster_reports: dict[int, list[Candidate]]) -> list[Candidate]:
    """Merge per-cluster-head candidate lists into one global order.

    Each cluster head's list is sorted locally by the shared comparator and
    the lists are then k-way merged, which is exactly equivalent to sorting
    the union.
    """
    local = [sorted(members, key=candidate_key) for _, members in sorted(cluster_reports.items())]
    return list(heapq.merge(*local, key=candidate_key))

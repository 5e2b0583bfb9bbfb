"""Traffic plane: constant-bit-rate flows, bounded priority queues,
hop-count routing over the connectivity graph, and per-flow delivery-ratio
tracking.

Routing deliberately reduces to shortest hop count: the hop count is the
only routing quantity the schedulers consume (it exponentiates the laxity
budget), so on-demand route discovery is replaced by a per-frame BFS.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .scheduler import FlowParams


class NoRoute(Exception):
    pass


class Expired(Exception):
    pass


@dataclass
class Packet:
    id: int
    flow: str
    src: int
    dst: int
    size: int
    created: float
    deadline: float
    importance: float
    remaining_hops: int | None = None
    strikes: int = 0      # consecutive no-route transmission attempts
    retries: int = 0      # link-broken retransmission attempts
    enqueue_seq: int = 0  # FIFO tie-break inside a queue


@dataclass(frozen=True)
class Flow:
    id: str
    src: int
    dst: int
    interval: float
    params: FlowParams
    start: float = 0.0
    stop: float = 100.0
    importance_override: float | None = None

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        if not (self.start < self.stop):
            raise ValueError("need start < stop")


def generate_cbr(flow: Flow, until: float) -> list[float]:
    """Emission times start + k*interval for k = 1, 2, ... up to
    min(stop, until), boundary inclusive."""
    horizon = min(flow.stop, until)
    times = []
    k = 1
    while True:
        t = flow.start + k * flow.interval
        if t > horizon:
            break
        times.append(t)
        k += 1
    return times


class NodeQueue:
    """Bounded queue ordered by the active scheme's key at inspection time.

    Keys are recomputed when the queue is read (laxity decays with the
    clock), so only membership and FIFO sequence are stored. On overflow the
    worst-keyed packet is dropped, which may be the incoming one; key ties
    evict the newest arrival.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Packet] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def enqueue(self, packet: Packet, key_fn, now: float) -> Packet | None:
        """Insert packet; returns the evicted packet on overflow, else None.

        Raises Expired when the packet's deadline has already passed.
        """
        if now >= packet.deadline:
            raise Expired(f"packet {packet.id} expired before enqueue")
        packet.enqueue_seq = self._seq
        self._seq += 1
        if len(self._items) < self.capacity:
            self._items.append(packet)
            return None
        worst = max(self._items + [packet], key=lambda p: (key_fn(p), p.enqueue_seq))
        if worst is packet:
            return packet
        self._items.remove(worst)
        self._items.append(packet)
        return worst

    def sorted_items(self, key_fn) -> list[Packet]:
        """Queue contents best-first under the given key, FIFO among ties."""
        return sorted(self._items, key=lambda p: (key_fn(p), p.enqueue_seq))

    def best_key(self, key_fn):
        """Smallest key in the queue, or None when empty."""
        if not self._items:
            return None
        return min(key_fn(p) for p in self._items)

    def remove(self, packet: Packet) -> None:
        self._items.remove(packet)

    def purge_expired(self, now: float) -> list[Packet]:
        """Remove and return all packets whose deadline has passed (laxity 0)."""
        expired = [p for p in self._items if now >= p.deadline]
        for p in expired:
            self._items.remove(p)
        return expired


class PdrTracker:
    """Delivery ratio of a flow over a sliding window of send outcomes.

    The ratio is 1 by convention before any outcome is recorded.
    """

    def __init__(self, window: int = 20):
        if window < 1:
            raise ValueError("window must be >= 1")
        self._outcomes: deque[bool] = deque(maxlen=window)

    def record(self, delivered_within_deadline: bool) -> "PdrTracker":
        self._outcomes.append(bool(delivered_within_deadline))
        return self

    @property
    def value(self) -> float:
        if not self._outcomes:
            return 1.0
        return sum(self._outcomes) / len(self._outcomes)


def hop_distances(graph, dst: int) -> dict[int, int]:
    """BFS hop counts from every reachable node to dst."""
    if dst not in graph:
        return {}
    dist = {dst: 0}
    frontier = deque([dst])
    while frontier:
        u = frontier.popleft()
        for v in graph.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                frontier.append(v)
    return dist


def next_hop(graph, dist: dict[int, int], node: int) -> int | None:
    """Deterministic next hop: the lowest-id neighbor one hop closer to dst."""
    here = dist.get(node)
    if here is None or here == 0:
        return None
    for v in graph.neighbors(node):  # adjacency is sorted ascending
        if dist.get(v) == here - 1:
            return v
    return None


def shortest_hop_route(graph, src: int, dst: int) -> list[int]:
    """Minimum-hop path from src to dst; among equal-hop paths the
    lexicographically smallest node sequence. Raises NoRoute when
    disconnected."""
    if src not in graph or dst not in graph:
        raise NoRoute(f"{src} -> {dst}: node missing from graph")
    if src == dst:
        return [src]
    dist = hop_distances(graph, dst)
    if src not in dist:
        raise NoRoute(f"{src} -> {dst}: disconnected")
    route = [src]
    node = src
    while node != dst:
        node = next_hop(graph, dist, node)
        route.append(node)
    return route

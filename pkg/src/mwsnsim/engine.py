"""Deterministic discrete-event core and the simulation run loop.

The engine owns a virtual clock, a (time, sequence)-ordered event queue and
one seeded random stream per purpose, all derived from a single master seed
so adding a consumer never perturbs existing draw sequences. A Simulation
wires the mobility, radio, energy, scheduling and traffic planes together
and replays identically for identical configuration and seed: the trace it
produces is byte-stable.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from . import energy as energy_mod
from . import radio as radio_mod
from . import scheduler as sched
from . import traffic as traffic_mod
from ._kernels import BACKEND
from .config import ScenarioConfig
from .mobility import MobilityField, snapshot_classes


class PastEvent(Exception):
    pass


class BadRange(Exception):
    pass


class EventKind(Enum):
    PACKET_GENERATED = "packet_generated"
    FRAME_BOUNDARY = "frame_boundary"
    MOBILITY_TICK = "mobility_tick"
    CRITICAL_EVENT = "critical_event"
    SLOT_TRANSMIT = "slot_transmit"
    PACKET_DELIVERED = "packet_delivered"
    ENERGY_DEPLETED = "energy_depleted"


class NodeKind(IntEnum):
    SENSOR = 0
    CLUSTER_HEAD = 1
    BASE_STATION = 2


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    network: str


@dataclass(frozen=True)
class Event:
    time: float
    seq: int
    kind: EventKind
    payload: tuple


class EventQueue:
    """Min-heap of events keyed by (time, sequence); sequence numbers are
    assigned at schedule time, so simultaneous events dequeue FIFO."""

    def __init__(self):
        self._heap: list[tuple[float, int, Event]] = []
        self._next_seq = 0
        self.now = 0.0
        self.scheduled = 0
        self.processed = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: float, kind: EventKind, payload: tuple = ()) -> int:
        """Enqueue an event; returns its sequence handle."""
        if time < self.now:
            raise PastEvent(f"event at {time} is before the clock at {self.now}")
        if not math.isfinite(time):
            raise ValueError("event time must be finite")
        seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, (time, seq, Event(time, seq, kind, payload)))
        self.scheduled += 1
        return seq

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        time, _, event = heapq.heappop(self._heap)
        self.now = time
        self.processed += 1
        return event


_PURPOSES = ("mobility", "placement", "traffic", "importance")


class RandomStream:
    """Seeded uniform stream for one purpose; counts its draws."""

    def __init__(self, master_seed: int, purpose: str):
        if purpose not in _PURPOSES:
            raise ValueError(f"unknown stream purpose {purpose!r}")
        self.purpose = purpose
        self.seed = master_seed
        self.draws = 0
        ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(_PURPOSES.index(purpose),))
        self._gen = np.random.default_rng(ss)

    def uniform(self, a: float, b: float) -> float:
        if a > b:
            raise BadRange(f"uniform({a}, {b}): need a <= b")
        self.draws += 1
        if a == b:
            # still advance the stream so call counts stay comparable
            self._gen.uniform(0.0, 1.0)
            return float(a)
        return float(self._gen.uniform(a, b))

    def sample(self, population, k: int) -> list:
        """k distinct elements from population, order drawn from the stream."""
        if k > len(population):
            raise BadRange(f"cannot sample {k} from {len(population)} items")
        self.draws += k
        picked = self._gen.choice(np.asarray(population), size=k, replace=False)
        return [int(v) for v in picked]


class RandomStreams:
    def __init__(self, master_seed: int):
        self.master_seed = master_seed
        self._streams = {p: RandomStream(master_seed, p) for p in _PURPOSES}

    def __getitem__(self, purpose: str) -> RandomStream:
        return self._streams[purpose]

    def draw_counts(self) -> dict[str, int]:
        return {p: self._streams[p].draws for p in _PURPOSES}


def trace_to_jsonl(trace: list[dict]) -> str:
    """Canonical byte-stable serialization: one compact sorted-key record
    per line."""
    return "".join(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n" for rec in trace)


def trace_from_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


class Simulation:
    """One seeded run of one scheduling scheme over one scenario."""

    def __init__(self, config: ScenarioConfig, seed: int | None = None, scheme: str | None = None):
        self.cfg = config
        self.seed = config["seed"] if seed is None else seed
        self.scheme = config.scheduler if scheme is None else scheme
        if self.scheme not in ("mdlps", "data"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.streams = RandomStreams(self.seed)
        self.queue = EventQueue()
        self.trace: list[dict] = []
        self._finalized = False

        self._build_nodes()
        self._build_networks()
        self._build_kinematics()
        self._build_radio()
        self._build_energy()
        self._build_traffic()
        self._build_scheduling()
        self._schedule_initial_events()

        self.trace.append({
            "k": "hdr", "t": 0.0, "seed": self.seed, "scheme": self.scheme,
            "n": self.n, "range": float(self.cfg["radio"]["nominal_range"]),
            "rx_threshold": self.radio.rx_threshold, "backend": BACKEND,
        })

    # construction ----------------------------------------------------------
    def _build_nodes(self) -> None:
        cfg = self.cfg
        self.n = cfg.node_count
        n_ch = cfg["cluster_heads"]
        n_bs = cfg["base_stations"]
        n_sensor = self.n - n_ch - n_bs
        kinds = ([NodeKind.SENSOR] * n_sensor + [NodeKind.CLUSTER_HEAD] * n_ch
                 + [NodeKind.BASE_STATION] * n_bs)
        self.kinds = kinds
        self.sensor_ids = list(range(n_sensor))
        self.ch_ids = list(range(n_sensor, n_sensor + n_ch))
        self.bs_ids = list(range(n_sensor + n_ch, self.n))

    def _build_networks(self) -> None:
        raw = self.cfg["networks"]
        if raw is None:
            nets = [sched.Network(id="net0", bandwidth=self.cfg["energy"]["link_rate"],
                                  members=tuple(range(self.n)))]
        else:
            nets = [sched.Network(id=str(n["id"]), bandwidth=float(n["bandwidth"]),
                                  members=tuple(sorted(n["members"]))) for n in raw]
        self.networks = sorted(nets, key=lambda net: net.id)
        self.net_of = {}
        for net in self.networks:
            for node in net.members:
                self.net_of[node] = net.id
        self.nodes = [Node(i, self.kinds[i], self.net_of[i]) for i in range(self.n)]

    def _build_kinematics(self) -> None:
        cfg = self.cfg
        w, h = cfg.terrain
        placement = self.streams["placement"]
        pos = np.empty((self.n, 2))
        if cfg["node_placement"] is not None:
            for i, (x, y) in enumerate(cfg["node_placement"]):
                pos[i, 0] = x
                pos[i, 1] = y
        else:
            for i in range(self.n):
                pos[i, 0] = placement.uniform(0.0, w)
                pos[i, 1] = placement.uniform(0.0, h)
        controlled = np.array([k != NodeKind.SENSOR for k in self.kinds])
        m = cfg["mobility"]
        self.mob = MobilityField(
            pos, controlled, (w, h),
            rng=self.streams["mobility"], patrol_rng=placement,
            speed_range=(m["speed_min"], m["speed_max"]),
            pause_time=m["pause_time"],
            controlled_speed_cap=m["controlled_speed_cap"],
            patrol_radius=m["patrol_radius"],
        )
        self.class_thresholds = tuple(m["class_thresholds"])
        self.tick_interval = m["tick_interval"]
        self._pos_cache: tuple[float, np.ndarray, np.ndarray] | None = None

    def _build_radio(self) -> None:
        r = self.cfg["radio"]
        base = radio_mod.RadioParams(
            tx_power=r["tx_power"], tx_gain=r["tx_gain"], rx_gain=r["rx_gain"],
            antenna_height_tx=r["antenna_height_tx"], antenna_height_rx=r["antenna_height_rx"],
            system_loss=r["system_loss"], wavelength=self.cfg.wavelength,
            rx_threshold=1.0,
        )
        threshold = radio_mod.threshold_for_range(base, r["nominal_range"])
        self.radio = radio_mod.RadioParams(
            tx_power=base.tx_power, tx_gain=base.tx_gain, rx_gain=base.rx_gain,
            antenna_height_tx=base.antenna_height_tx, antenna_height_rx=base.antenna_height_rx,
            system_loss=base.system_loss, wavelength=base.wavelength,
            rx_threshold=threshold,
        )
        self.graph = None
        self.dist_maps: dict[int, dict[int, int]] = {}

    def _build_energy(self) -> None:
        e = self.cfg["energy"]
        self.costs = energy_mod.EnergyCosts(
            tx_power=e["tx_power"], rx_power=e["rx_power"],
            idle_power=e["idle_power"], link_rate=e["link_rate"],
        )
        self.battery = [
            energy_mod.BatteryState(
                level=self.cfg["initial_energy"], initial=self.cfg["initial_energy"],
                hard_threshold=e["battery_threshold"], levels_above=e["battery_levels"],
                level_penalty=e["level_penalty"],
            )
            for _ in range(self.n)
        ]
        self.dead: set[int] = set()

    def _nearest_bs(self, node: int, px: np.ndarray, py: np.ndarray) -> int:
        best = None
        for bs in self.bs_ids:
            d2 = (px[node] - px[bs]) ** 2 + (py[node] - py[bs]) ** 2
            if best is None or d2 < best[0]:
                best = (d2, bs)
        return best[1]

    def _build_traffic(self) -> None:
        cfg = self.cfg
        f = cfg["flow"]
        self.flow_params = sched.FlowParams(
            desired_pdr=f["desired_pdr"], pdr_threshold=f["pdr_threshold"],
            deadline_budget=f["deadline_budget"],
        )
        self.pdr_window = f["pdr_window"]
        raw = cfg["flows"]
        flows: list[traffic_mod.Flow] = []
        if raw is None:
            count = cfg["flow_count"]
            sources = sorted(self.streams["traffic"].sample(self.sensor_ids, count)) if count else []
            px, py = self.mob.positions_at(0.0)
            for i, src in enumerate(sources):
                flows.append(traffic_mod.Flow(
                    id=f"f{i}", src=src, dst=self._nearest_bs(src, px, py),
                    interval=cfg["cbr_interval"], params=self.flow_params,
                    start=0.0, stop=cfg.session_duration,
                ))
        else:
            for fl in raw:
                flows.append(traffic_mod.Flow(
                    id=str(fl["id"]), src=fl["src"], dst=fl["dst"],
                    interval=fl["interval"], params=self.flow_params,
                    start=fl["start"], stop=fl["stop"],
                    importance_override=fl["importance_override"],
                ))
        self.flows = flows
        self.flow_by_id = {fl.id: fl for fl in flows}
        self.queues = [traffic_mod.NodeQueue(cfg["queue_size"]) for _ in range(self.n)]
        self.trackers: dict[str, traffic_mod.PdrTracker] = {}
        self.next_packet_id = 0

    def _build_scheduling(self) -> None:
        cfg = self.cfg
        g = cfg["grid"]
        self.grid = sched.SlotGrid(g["frequencies"], g["slots_per_frame"], g["frame_length"])
        self.frame_length = g["frame_length"]
        o = cfg["options"]
        self.velocity_floor = o["velocity_floor"]
        self.gate_mode = o["gate_mode"]
        self.weights = (o["density_weight"], o["bandwidth_weight"])
        self.orphan_policy = o["orphan_policy"]
        self.mob_snapshot = snapshot_classes(self.mob.speeds_at(0.0), self.class_thresholds)
        # before any critical event, networks rank by bandwidth alone
        ordered = sorted(self.networks, key=lambda net: (-net.bandwidth, net.id))
        self.n1_map = {net.id: rank + 1 for rank, net in enumerate(ordered)}
        raw_events = cfg["critical_events"]
        if raw_events is None:
            w, h = cfg.terrain
            raw_events = []
            if cfg.session_duration >= 10.0:
                raw_events = [{"time": 10.0, "x": w / 2, "y": h / 2, "radius": 400.0,
                               "reporter": None, "emit_reports": True}]
        self.critical_events = raw_events
        self.active_events: list[dict] = []
        self._orphans_this_frame: list[int] = []

    def _schedule_initial_events(self) -> None:
        session = self.cfg.session_duration
        self.queue.schedule(0.0, EventKind.FRAME_BOUNDARY)
        if self.tick_interval <= session:
            self.queue.schedule(self.tick_interval, EventKind.MOBILITY_TICK)
        for idx, ev in enumerate(self.critical_events):
            self.queue.schedule(ev["time"], EventKind.CRITICAL_EVENT, (idx,))
        for fl in self.flows:
            for t in traffic_mod.generate_cbr(fl, session):
                self.queue.schedule(t, EventKind.PACKET_GENERATED, (fl.id,))

    # helpers ---------------------------------------------------------------
    def _positions(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self._pos_cache is not None and self._pos_cache[0] == t:
            return self._pos_cache[1], self._pos_cache[2]
        px, py = self.mob.positions_at(t)
        self._pos_cache = (t, px, py)
        return px, py

    def _alive(self) -> list[int]:
        return [i for i in range(self.n) if i not in self.dead]

    def _tracker(self, flow_id: str) -> traffic_mod.PdrTracker:
        tr = self.trackers.get(flow_id)
        if tr is None:
            tr = traffic_mod.PdrTracker(self.pdr_window)
            self.trackers[flow_id] = tr
        return tr

    def _rebuild_graph(self, t: float) -> None:
        alive = self._alive()
        px, py = self._positions(t)
        self.graph = radio_mod.build_graph(
            alive, px[alive], py[alive], self.radio)
        dsts = {fl.dst for fl in self.flows}
        for q in self.queues:
            for p in q:
                dsts.add(p.dst)
        self.dist_maps = {dst: traffic_mod.hop_distances(self.graph, dst)
                          for dst in sorted(dsts) if dst in self.graph}

    def _hops_from(self, node: int, dst: int) -> int | None:
        dmap = self.dist_maps.get(dst)
        if dmap is None:
            return None
        return dmap.get(node)

    def _key_fn(self, node: int, t: float):
        """Fresh per-packet contention key for this node at this instant.

        Expired and currently unroutable packets get the sentinel (they can
        never transmit, so they lose every contention and every eviction).
        The arithmetic matches scheduler.compute_pi_mdlps / compute_pi_data
        term for term; it is unrolled here because this closure sits on the
        hottest path of a run.
        """
        sentinel = sched.GATE_SENTINEL
        dist_maps = self.dist_maps
        if self.scheme == "data":
            def key(p: traffic_mod.Packet) -> float:
                if t >= p.deadline:
                    return sentinel
                dmap = dist_maps.get(p.dst)
                if dmap is None or node not in dmap:
                    return sentinel
                return 1.0 / p.importance
            return key

        v = max(self.mob.instantaneous_speed(node, t), self.velocity_floor)
        inv_v = 1.0 / v
        state = self.battery[node]
        # depleted nodes never transmit; their queue order is irrelevant
        x = energy_mod.battery_factor(state) if not state.depleted else 1.0
        desired = self.flow_params.desired_pdr
        threshold = self.flow_params.pdr_threshold
        trackers = self.trackers
        pdr_cache: dict[str, float] = {}

        def key(p: traffic_mod.Packet) -> float:
            if t >= p.deadline:
                return sentinel
            dmap = dist_maps.get(p.dst)
            hops = dmap.get(node) if dmap is not None else None
            if hops is None:
                return sentinel
            pdr = pdr_cache.get(p.flow)
            if pdr is None:
                tracker = trackers.get(p.flow)
                pdr = tracker.value if tracker is not None else 1.0
                pdr_cache[p.flow] = pdr
            if pdr < threshold:
                return sentinel
            ulb = (p.deadline - t) / (2.0 ** hops)
            return (pdr / desired) * ulb * inv_v * x
        return key

    def _gated_out(self, packet: traffic_mod.Packet) -> bool:
        """Hard-drop mode: discard below-threshold-PDR packets at enqueue."""
        return (self.scheme == "mdlps" and self.gate_mode == "drop"
                and self._tracker(packet.flow).value < self.flow_params.pdr_threshold)

    def _enqueue(self, node: int, packet: traffic_mod.Packet, t: float) -> None:
        if self._gated_out(packet):
            self._drop(packet, node, t, "gated")
            return
        try:
            evicted = self.queues[node].enqueue(packet, self._key_fn(node, t), t)
        except traffic_mod.Expired:
            self._drop(packet, node, t, "expired")
            return
        if evicted is not None:
            self._drop(evicted, node, t, "overflow")

    def _drop(self, packet: traffic_mod.Packet, node: int, t: float, cause: str,
              detail: str | None = None) -> None:
        rec = {"k": "drop", "t": t, "p": packet.id, "n": node, "c": cause}
        if detail:
            rec["d"] = detail
        self.trace.append(rec)
        if cause != "starved":
            self._tracker(packet.flow).record(False)

    def _candidates(self, t: float) -> list[sched.PriorityTuple]:
        """Contenders for transmission positions: alive non-sink nodes with
        queued data, keyed by their best packet under the active scheme.

        Under the data scheme sensors are ranked through their nearest
        in-range cluster head and the per-cluster lists are merged globally;
        orphan sensors either contend directly or are excluded, per policy.
        """
        alive = [i for i in self._alive() if self.kinds[i] != NodeKind.BASE_STATION]
        holders = [i for i in alive if len(self.queues[i]) > 0]
        cands: dict[int, sched.Candidate] = {}
        for node in holders:
            pi = self.queues[node].best_key(self._key_fn(node, t))
            cands[node] = sched.Candidate(
                node=node, pi=pi,
                mob_class=self.mob_snapshot[node],
                batt_level=energy_mod.battery_level(self.battery[node]),
            )
        if self.scheme == "data":
            px, py = self._positions(t)
            positions = {i: (float(px[i]), float(py[i])) for i in alive}
            chs = [c for c in self.ch_ids if c not in self.dead]
            sensors = [s for s in holders if self.kinds[s] == NodeKind.SENSOR]
            reach = lambda a, b: (self.graph is not None and self.graph.has_edge(a, b))
            reports, orphans = sched.assign_clusters(sensors, chs, positions, reach)
            if orphans:
                self._orphans_this_frame = list(orphans)
            merged = sched.global_importance_ranking(
                {ch: [cands[m] for m in members] for ch, members in reports.items()})
            chosen = [c.node for c in merged]
            chosen += [n for n in holders if self.kinds[n] != NodeKind.SENSOR]
            if self.orphan_policy == "contend":
                chosen += orphans
            selected = sorted(set(chosen))
        else:
            selected = holders
        return [sched.priority_tuple(cands[n], self.net_of[n], self.n1_map) for n in selected]

    # handlers ---------------------------------------------------------------
    def _on_mobility_tick(self, ev: Event) -> None:
        t = ev.time
        self.mob.tick(t)
        self._pos_cache = None
        nxt = t + self.tick_interval
        if nxt <= self.cfg.session_duration:
            self.queue.schedule(nxt, EventKind.MOBILITY_TICK)

    def _on_frame_boundary(self, ev: Event) -> None:
        t = ev.time
        self._orphans_this_frame = []
        self._rebuild_graph(t)
        if self.costs.idle_power > 0:
            for node in self._alive():
                energy_mod.consume_idle(self.battery[node], self.costs, self.frame_length)
                if self.battery[node].depleted:
                    self.queue.schedule(t, EventKind.ENERGY_DEPLETED, (node,))
        if not self.grid.ever_allocated:
            sources = self._candidates(t)
            if sources:
                sched.allocate_slots(sources, self.grid, t)
                self._trace_alloc(t, "startup", -1)
        granted: list[tuple[int, int, int]] = []
        transient: list[tuple[int, int, int]] = []
        taken: set[int] = set()
        empty_positions: list[tuple[int, int]] = []
        for pos in self.grid.positions():
            holder = self.grid.holder(pos)
            if holder is None or holder in self.dead:
                empty_positions.append(pos)
            else:
                taken.add(holder)
                if len(self.queues[holder]) > 0:
                    granted.append((pos[0], pos[1], holder))
        if empty_positions:
            spare = [pt for pt in self._candidates(t) if pt.node not in taken]
            spare.sort(key=sched.tuple_key)
            for pos, pt in zip(empty_positions, spare):
                transient.append((pos[0], pos[1], pt.node))
        rec = {
            "k": "frame", "t": t,
            "g": [list(g) for g in granted],
            "x": [list(g) for g in transient],
            "q": [len(q) for q in self.queues],
        }
        if self.scheme == "data" and self._orphans_this_frame:
            rec["orph"] = sorted(set(self._orphans_this_frame))
        self.trace.append(rec)
        slot_dur = self.grid.slot_duration
        for f, s, node in sorted(granted + transient):
            self.queue.schedule(t + s * slot_dur, EventKind.SLOT_TRANSMIT, (f, s, node))
        nxt = t + self.frame_length
        if nxt <= self.cfg.session_duration:
            self.queue.schedule(nxt, EventKind.FRAME_BOUNDARY)

    def _trace_alloc(self, t: float, why: str, ev_idx: int) -> None:
        self.trace.append({
            "k": "alloc", "t": t, "why": why, "ev": ev_idx,
            "a": [[pos[0], pos[1], holder] for pos, holder in self.grid.assignment.items()
                  if holder is not None],
            "n1": dict(sorted(self.n1_map.items())),
        })

    def _on_slot_transmit(self, ev: Event) -> None:
        t = ev.time
        f, s, node = ev.payload
        if node in self.dead:
            return
        q = self.queues[node]
        for p in q.purge_expired(t):
            self._drop(p, node, t, "expired")
        key_fn = self._key_fn(node, t)
        px, py = self._positions(t)
        for p in q.sorted_items(key_fn):
            hops = self._hops_from(node, p.dst)
            if hops is None:
                p.strikes += 1
                if p.strikes >= 2:
                    q.remove(p)
                    self._drop(p, node, t, "no_route")
                continue
            hop = traffic_mod.next_hop(self.graph, self.dist_maps[p.dst], node)
            if hop is None:
                p.strikes += 1
                if p.strikes >= 2:
                    q.remove(p)
                    self._drop(p, node, t, "no_route")
                continue
            if not radio_mod.in_range(self.radio, (px[node], py[node]), (px[hop], py[hop])):
                # edge vanished since the frame-start grant: one retry, then drop
                p.retries += 1
                if p.retries > 1:
                    q.remove(p)
                    self._drop(p, node, t, "no_route", detail="link_broken")
                else:
                    self.trace.append({"k": "lb", "t": t, "p": p.id, "u": node, "v": hop})
                break
            q.remove(p)
            p.strikes = 0
            p.retries = 0
            p.remaining_hops = hops
            energy_mod.consume_tx(self.battery[node], self.costs, p.size)
            self.trace.append({
                "k": "tx", "t": t, "p": p.id, "u": node, "v": hop, "f": f, "s": s,
                "h": hops, "e": self.battery[node].level,
            })
            if self.battery[node].depleted:
                self.queue.schedule(t, EventKind.ENERGY_DEPLETED, (node,))
            self.queue.schedule(
                t + energy_mod.airtime(p.size, self.costs),
                EventKind.PACKET_DELIVERED, (p, node, hop))
            break

    def _on_packet_delivered(self, ev: Event) -> None:
        t = ev.time
        p, sender, receiver = ev.payload
        if receiver in self.dead:
            self._drop(p, receiver, t, "no_route", detail="receiver_dead")
            return
        energy_mod.consume_rx(self.battery[receiver], self.costs, p.size)
        drained = self.battery[receiver].depleted
        rec = {"k": "rx", "t": t, "p": p.id, "n": receiver,
               "e": self.battery[receiver].level, "fin": 0}
        if receiver == p.dst:
            on_time = t <= p.deadline
            rec["fin"] = 1
            rec["delay"] = t - p.created
            rec["ok"] = 1 if on_time else 0
            self.trace.append(rec)
            self._tracker(p.flow).record(on_time)
        else:
            self.trace.append(rec)
            if drained:
                self._drop(p, receiver, t, "no_route", detail="receiver_dead")
            else:
                self._enqueue(receiver, p, t)
        if drained:
            self.queue.schedule(t, EventKind.ENERGY_DEPLETED, (receiver,))

    def _on_energy_depleted(self, ev: Event) -> None:
        (node,) = ev.payload
        if node in self.dead:
            return
        self.dead.add(node)
        self.trace.append({"k": "dep", "t": ev.time, "n": node})

    def _on_critical_event(self, ev: Event) -> None:
        t = ev.time
        (idx,) = ev.payload
        ev_cfg = self.critical_events[idx]
        x, y, r = float(ev_cfg["x"]), float(ev_cfg["y"]), float(ev_cfg["radius"])
        self.trace.append({"k": "crit", "t": t, "ev": idx, "x": x, "y": y, "r": r})
        self.active_events.append({"x": x, "y": y, "r": r, "since": t})
        px, py = self._positions(t)
        if ev_cfg.get("emit_reports", True):
            reporter = ev_cfg.get("reporter")
            r2 = r * r
            for node in self.sensor_ids:
                in_area = (px[node] - x) ** 2 + (py[node] - y) ** 2 <= r2
                if node == reporter:
                    imp = 1.0
                elif in_area:
                    imp = self.streams["importance"].uniform(0.8, 1.0)
                else:
                    continue
                self._generate_packet(
                    flow_id=f"report-{idx}-n{node}", src=node,
                    dst=self._nearest_bs(node, px, py), t=t, importance=imp)
        self.mob_snapshot = snapshot_classes(self.mob.speeds_at(t), self.class_thresholds)
        self.trace.append({
            "k": "cls", "t": t, "ev": idx,
            "c": [int(self.mob_snapshot[i]) for i in range(self.n)],
        })
        self._rebuild_graph(t)
        positions = {i: (float(px[i]), float(py[i])) for i in range(self.n)}
        self.n1_map, bw_only = sched.network_priority(
            self.networks, positions, (x, y), r,
            w_density=self.weights[0], w_bandwidth=self.weights[1])
        self.grid.rearm()
        sched.allocate_slots(self._candidates(t), self.grid, t)
        self._trace_alloc(t, "critical", idx)
        if bw_only:
            self.trace[-1]["bw_only"] = 1

    def _in_active_event_area(self, x: float, y: float) -> bool:
        for ev in self.active_events:
            if (x - ev["x"]) ** 2 + (y - ev["y"]) ** 2 <= ev["r"] ** 2:
                return True
        return False

    def _generate_packet(self, flow_id: str, src: int, dst: int, t: float,
                         importance: float) -> None:
        cfg = self.cfg
        p = traffic_mod.Packet(
            id=self.next_packet_id, flow=flow_id, src=src, dst=dst,
            size=cfg["packet_size"], created=t,
            deadline=t + self.flow_params.deadline_budget,
            importance=importance,
            remaining_hops=self._hops_from(src, dst),
        )
        self.next_packet_id += 1
        self.trace.append({
            "k": "gen", "t": t, "p": p.id, "fl": flow_id, "src": src, "dst": dst,
            "sz": p.size, "dl": p.deadline, "imp": importance,
        })
        self._enqueue(src, p, t)

    def _on_packet_generated(self, ev: Event) -> None:
        t = ev.time
        (flow_id,) = ev.payload
        fl = self.flow_by_id[flow_id]
        if fl.importance_override is not None:
            imp = fl.importance_override
        else:
            px, py = self._positions(t)
            if self._in_active_event_area(float(px[fl.src]), float(py[fl.src])):
                imp = self.streams["importance"].uniform(0.8, 1.0)
            else:
                imp = self.streams["importance"].uniform(0.1, 0.5)
        self._generate_packet(flow_id, fl.src, fl.dst, t, imp)

    _HANDLERS = {
        EventKind.MOBILITY_TICK: _on_mobility_tick,
        EventKind.FRAME_BOUNDARY: _on_frame_boundary,
        EventKind.SLOT_TRANSMIT: _on_slot_transmit,
        EventKind.PACKET_DELIVERED: _on_packet_delivered,
        EventKind.ENERGY_DEPLETED: _on_energy_depleted,
        EventKind.CRITICAL_EVENT: _on_critical_event,
        EventKind.PACKET_GENERATED: _on_packet_generated,
    }

    def run_until(self, t_end: float) -> list[dict]:
        """Process every pending event with time <= t_end, in (time, seq)
        order; returns the trace so far."""
        while len(self.queue) > 0:
            nxt = self.queue.peek_time()
            if nxt > t_end:
                break
            event = self.queue.pop()
            self._HANDLERS[event.kind](self, event)
        return self.trace

    def run(self) -> list[dict]:
        """Run the full session and finalize the trace."""
        if self._finalized:
            return self.trace
        self._finalized = True
        t_end = self.cfg.session_duration
        self.run_until(t_end)
        # packets still on the air when the session closes count as starved
        for _, _, event in sorted(self.queue._heap):
            if event.kind is EventKind.PACKET_DELIVERED:
                p, _, receiver = event.payload
                self._drop(p, receiver, t_end, "starved", detail="in_flight")
        for node in range(self.n):
            for p in list(self.queues[node]):
                self.queues[node].remove(p)
                self._drop(p, node, t_end, "starved")
        self.trace.append({
            "k": "end", "t": t_end,
            "draws": self.streams.draw_counts(),
            "events": {"scheduled": self.queue.scheduled,
                       "processed": self.queue.processed,
                       "pending": len(self.queue)},
        })
        return self.trace

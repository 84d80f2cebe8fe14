"""Topology graph and layer 2: nodes, interfaces, broadcast segments.

A segment offers every frame to all other attached powered-on interfaces
after its latency. Corruption is a per-receiver-copy coin flip decided at
send time, consuming one RNG draw per receiver in ascending interface-id
order, so replays are independent of dispatch micro-order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .engine import Engine, Event
from .errors import (
    Detached,
    DuplicateIp,
    DuplicateName,
    OutOfRange,
    PoweredOff,
    UnknownNode,
    UnknownSegment,
)
from .routing import Route, RoutingTable, format_ip

BROADCAST_HW = 0xFFFFFFFFFFFF
BROADCAST_IP = 0xFFFFFFFF

_NOISE_SPAN = float(1 << 32)


def format_hw(hw: int) -> str:
    if hw == BROADCAST_HW:
        return "ff:ff:ff:ff:ff:ff"
    return ":".join(f"{(hw >> s) & 0xFF:02x}" for s in range(40, -8, -8))


@dataclass
class Frame:
    src_hw: int
    dst_hw: int
    proto: str  # arp | rarp | ip | lapb
    payload: object
    corrupted: bool = False

    def trace_fields(self) -> dict:
        fields = {"proto": self.proto}
        brief = getattr(self.payload, "trace_fields", None)
        if brief is not None:
            fields.update(brief())
        return fields


@dataclass
class Node:
    id: int
    name: str
    kind: str  # host | router
    power: str = "on"
    power_epoch: int = 0
    interfaces: list[int] = field(default_factory=list)
    # protocol state slots, attached lazily by their modules
    routes: RoutingTable = field(default_factory=RoutingTable)
    arp: object = None
    rip: object = None
    lapb: dict = field(default_factory=dict)  # iface id -> endpoint
    x25: dict = field(default_factory=dict)  # iface id -> {lci: circuit}
    pings: dict = field(default_factory=dict)  # ident -> session
    traceroutes: dict = field(default_factory=dict)
    rarp_table: Optional[dict] = None  # hw -> ip, present on RARP servers
    icmp_ident: int = 0
    ip_ident: int = 0
    lapb_config: object = None
    x25_config: object = None


@dataclass
class Interface:
    id: int
    owner: int
    hw: int
    ip: Optional[int]
    prefix_len: Optional[int]
    segment: Optional[int]
    rarp_client: bool = False


@dataclass
class Segment:
    id: int
    name: str
    latency: int
    status: str = "up"  # up | broken
    noise_p: float = 0.0
    attached: list[int] = field(default_factory=list)
    tx_count: int = 0
    forced_corrupt: set = field(default_factory=set)


@dataclass(frozen=True)
class FrameArrival:
    iface_id: int
    frame: Frame
    frame_id: int


@dataclass(frozen=True)
class TimerFire:
    node_id: int
    epoch: int
    fn: Callable[[], None]


class Network:
    """The user-built graph plus all fault state, owned by one engine."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self.nodes: dict[int, Node] = {}
        self.segments: dict[int, Segment] = {}
        self.interfaces: dict[int, Interface] = {}
        self.node_by_name: dict[str, Node] = {}
        self.segment_by_name: dict[str, Segment] = {}
        self.frame_handlers: dict[str, Callable[[Interface, Frame], None]] = {}
        self.local_proto_handlers: dict[str, Callable[[Node, Interface, object], None]] = {}
        self.power_hooks: list[Callable[[Node, str], None]] = []
        self._node_seq = 0
        self._segment_seq = 0
        self._iface_seq = 0
        self._hw_seq = 0
        self._frame_seq = 0

    # -- construction --------------------------------------------------------

    def add_node(self, kind: str, name: str) -> Node:
        if kind not in ("host", "router"):
            raise OutOfRange(f"node kind must be host or router, got {kind!r}")
        if name in self.node_by_name:
            raise DuplicateName(f"node name {name!r} already in use")
        self._node_seq += 1
        node = Node(id=self._node_seq, name=name, kind=kind)
        self.nodes[node.id] = node
        self.node_by_name[name] = node
        self.engine.register(f"node:{node.id}", self._on_timer_event)
        return node

    def add_segment(self, name: str, latency: int, noise_p: float = 0.0) -> Segment:
        if name in self.segment_by_name:
            raise DuplicateName(f"segment name {name!r} already in use")
        if latency < 1:
            raise OutOfRange(f"latency must be >= 1 tick, got {latency}")
        if not 0.0 <= noise_p <= 1.0:
            raise OutOfRange(f"noise_p must be in [0,1], got {noise_p}")
        self._segment_seq += 1
        seg = Segment(id=self._segment_seq, name=name, latency=latency, noise_p=noise_p)
        self.segments[seg.id] = seg
        self.segment_by_name[name] = seg
        return seg

    def attach(
        self,
        node_id: int,
        segment_id: int,
        ip: Optional[int],
        prefix_len: Optional[int],
    ) -> Interface:
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNode(f"no node {node_id}")
        seg = self.segments.get(segment_id)
        if seg is None:
            raise UnknownSegment(f"no segment {segment_id}")
        if ip is not None:
            if prefix_len is None or not 0 <= prefix_len <= 32:
                raise OutOfRange(f"prefix_len must be 0..32, got {prefix_len}")
            for other_id in seg.attached:
                if self.interfaces[other_id].ip == ip:
                    raise DuplicateIp(f"{format_ip(ip)} already present on {seg.name}")
        self._iface_seq += 1
        self._hw_seq += 1
        iface = Interface(
            id=self._iface_seq,
            owner=node.id,
            hw=0x020000000000 + self._hw_seq,
            ip=ip,
            prefix_len=prefix_len,
            segment=seg.id,
            rarp_client=ip is None,
        )
        self.interfaces[iface.id] = iface
        node.interfaces.append(iface.id)
        seg.attached.append(iface.id)
        self.engine.register(f"iface:{iface.id}", self._on_frame_event)
        if ip is not None:
            self.install_connected_route(node, iface)
        return iface

    def install_connected_route(self, node: Node, iface: Interface) -> None:
        prefix = iface.ip & _mask(iface.prefix_len)
        node.routes.install(
            Route(
                prefix=prefix,
                prefix_len=iface.prefix_len,
                next_hop=None,
                out_iface=iface.id,
                metric=1,
                source="connected",
                installed_at=self.engine.now,
            )
        )
        self.engine.observe(
            "route_changed",
            node=node.name,
            prefix=format_ip(prefix),
            prefix_len=iface.prefix_len,
            change="add",
            metric=1,
            next_hop=None,
            source="connected",
        )

    # -- timers ----------------------------------------------------------------

    def schedule_node_timer(self, node: Node, delay: int, fn: Callable[[], None]) -> int:
        """Arm a timer bound to the node's current power epoch.

        Powering the node off bumps the epoch, so stale timers fall through
        silently instead of firing.
        """
        payload = TimerFire(node_id=node.id, epoch=node.power_epoch, fn=fn)
        return self.engine.schedule_in(delay, f"node:{node.id}", payload)

    def _on_timer_event(self, ev: Event) -> None:
        tf: TimerFire = ev.payload
        node = self.nodes.get(tf.node_id)
        if node is None or node.power != "on" or node.power_epoch != tf.epoch:
            return
        tf.fn()

    # -- transmission ------------------------------------------------------------

    def transmit(self, iface_id: int, frame: Frame) -> list[int]:
        iface = self.interfaces[iface_id]
        node = self.nodes[iface.owner]
        if node.power != "on":
            raise PoweredOff(f"{node.name} is powered off")
        if iface.segment is None:
            raise Detached(f"interface {iface.id} is not attached")
        seg = self.segments[iface.segment]
        self._frame_seq += 1
        frame_id = self._frame_seq
        self.engine.observe(
            "frame_sent",
            frame_id=frame_id,
            segment=seg.name,
            node=node.name,
            iface=iface.id,
            src_hw=format_hw(frame.src_hw),
            dst_hw=format_hw(frame.dst_hw),
            **frame.trace_fields(),
        )
        if seg.status != "up":
            self.engine.observe(
                "frame_dropped",
                frame_id=frame_id,
                segment=seg.name,
                reason="link_broken",
            )
            return []
        seg.tx_count += 1
        forced = seg.tx_count in seg.forced_corrupt
        if forced:
            seg.forced_corrupt.discard(seg.tx_count)
        event_ids = []
        for other_id in sorted(seg.attached):
            if other_id == iface.id:
                continue
            other = self.interfaces[other_id]
            if self.nodes[other.owner].power != "on":
                continue
            if forced:
                corrupted = True
            else:
                draw = self.engine.rng_draw(1 << 32)
                corrupted = draw < seg.noise_p * _NOISE_SPAN
            copy = replace(frame, corrupted=corrupted or frame.corrupted)
            event_ids.append(
                self.engine.schedule_in(
                    seg.latency,
                    f"iface:{other_id}",
                    FrameArrival(iface_id=other_id, frame=copy, frame_id=frame_id),
                )
            )
        return event_ids

    def force_corrupt_next(self, segment_id: int, n: int = 1) -> None:
        """Test hook: deterministically corrupt the nth next frame sent on
        the segment, bypassing the RNG (no draws are consumed for it)."""
        seg = self.segments.get(segment_id)
        if seg is None:
            raise UnknownSegment(f"no segment {segment_id}")
        if n < 1:
            raise OutOfRange(f"n must be >= 1, got {n}")
        seg.forced_corrupt.add(seg.tx_count + n)

    def _on_frame_event(self, ev: Event) -> None:
        arrival: FrameArrival = ev.payload
        iface = self.interfaces.get(arrival.iface_id)
        if iface is None:
            return
        node = self.nodes[iface.owner]
        if node.power != "on":
            return  # powered off mid-flight: discard without a word
        frame = arrival.frame
        if frame.dst_hw not in (iface.hw, BROADCAST_HW):
            return  # not addressed to this interface
        seg = self.segments[iface.segment] if iface.segment else None
        if frame.corrupted:
            self.engine.observe(
                "frame_corrupted",
                frame_id=arrival.frame_id,
                segment=seg.name if seg else None,
                node=node.name,
                iface=iface.id,
                proto=frame.proto,
            )
            if frame.proto == "lapb":
                handler = self.frame_handlers.get("lapb")
                if handler is not None:
                    handler(iface, frame)
            return
        self.engine.observe(
            "frame_delivered",
            frame_id=arrival.frame_id,
            segment=seg.name if seg else None,
            node=node.name,
            iface=iface.id,
            proto=frame.proto,
        )
        handler = self.frame_handlers.get(frame.proto)
        if handler is None:
            self.engine.observe(
                "frame_dropped",
                frame_id=arrival.frame_id,
                reason="no_handler",
                proto=frame.proto,
            )
            return
        handler(iface, frame)

    # -- faults -------------------------------------------------------------------

    def break_link(self, segment_id: int) -> None:
        self._set_link(segment_id, "broken", "break_link")

    def restore_link(self, segment_id: int) -> None:
        self._set_link(segment_id, "up", "restore_link")

    def _set_link(self, segment_id: int, status: str, action: str) -> None:
        seg = self.segments.get(segment_id)
        if seg is None:
            raise UnknownSegment(f"no segment {segment_id}")
        seg.status = status
        self.engine.observe("fault_applied", action=action, segment=seg.name)

    def set_noise(self, segment_id: int, p: float) -> None:
        seg = self.segments.get(segment_id)
        if seg is None:
            raise UnknownSegment(f"no segment {segment_id}")
        if not 0.0 <= p <= 1.0:
            raise OutOfRange(f"noise_p must be in [0,1], got {p}")
        seg.noise_p = float(p)
        self.engine.observe("fault_applied", action="set_noise", segment=seg.name, value=p)

    def set_power(self, node_id: int, power: str) -> None:
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNode(f"no node {node_id}")
        if power not in ("on", "off"):
            raise OutOfRange(f"power must be on or off, got {power!r}")
        self.engine.observe("fault_applied", action="set_power", node=node.name, value=power)
        if node.power == power:
            return
        node.power = power
        node.power_epoch += 1
        if power == "off":
            self._flush_volatile(node)
        for hook in self.power_hooks:
            hook(node, power)

    def _flush_volatile(self, node: Node) -> None:
        # configuration survives, learned state does not
        for route in list(node.routes.entries):
            if route.source == "rip":
                node.routes.entries.remove(route)
                self.engine.observe(
                    "route_changed",
                    node=node.name,
                    prefix=format_ip(route.prefix),
                    prefix_len=route.prefix_len,
                    change="delete",
                    metric=route.metric,
                    next_hop=format_ip(route.next_hop) if route.next_hop is not None else None,
                    source="rip",
                )
        for iface_id in node.interfaces:
            iface = self.interfaces[iface_id]
            if iface.rarp_client and iface.ip is not None:
                prefix = iface.ip & _mask(iface.prefix_len)
                node.routes.remove(prefix, iface.prefix_len, "connected")
                self.engine.observe(
                    "route_changed",
                    node=node.name,
                    prefix=format_ip(prefix),
                    prefix_len=iface.prefix_len,
                    change="delete",
                    metric=1,
                    next_hop=None,
                    source="connected",
                )
                iface.ip = None
        node.pings.clear()
        node.traceroutes.clear()

    # -- lookups ---------------------------------------------------------------------

    def iface_of(self, node: Node, segment: Segment) -> Optional[Interface]:
        for iface_id in node.interfaces:
            iface = self.interfaces[iface_id]
            if iface.segment == segment.id:
                return iface
        return None

    def iface_by_ip(self, node: Node, ip: int) -> Optional[Interface]:
        for iface_id in node.interfaces:
            iface = self.interfaces[iface_id]
            if iface.ip == ip:
                return iface
        return None

    def node_of_iface(self, iface: Interface) -> Node:
        return self.nodes[iface.owner]

    def owns_ip(self, node: Node, ip: int) -> bool:
        return any(self.interfaces[i].ip == ip for i in node.interfaces)

    def find_iface_by_hw(self, hw: int) -> Optional[Interface]:
        for iface in self.interfaces.values():
            if iface.hw == hw:
                return iface
        return None


def _mask(prefix_len: int) -> int:
    if prefix_len == 0:
        return 0
    return (0xFFFFFFFF << (32 - prefix_len)) & 0xFFFFFFFF

"""ARP resolution with caching/retries and RARP boot-time address acquisition.

Requests broadcast on the local segment; entries age out after a TTL and a
periodic sweep evicts them. A sender learns from a request only when it is
the target or the sender is already cached (the classic merge rule).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .engine import SECOND
from .errors import AlreadyConfigured, OffSubnet
from .netmodel import BROADCAST_HW, Frame, Interface, Network, Node, format_hw
from .routing import format_ip, in_subnet, prefix_mask


@dataclass
class ArpConfig:
    ttl: int = 600 * SECOND
    retries: int = 3
    retry_interval: int = SECOND
    sweep_interval: int = 60 * SECOND


@dataclass
class ArpPacket:
    op: str  # request | reply
    sender_hw: int
    sender_ip: int
    target_hw: Optional[int]
    target_ip: int

    def trace_fields(self) -> dict:
        return {
            "arp_op": self.op,
            "sender_ip": format_ip(self.sender_ip),
            "target_ip": format_ip(self.target_ip),
        }


@dataclass
class RarpPacket:
    op: str  # request | reply
    hw: int
    ip: Optional[int]

    def trace_fields(self) -> dict:
        return {"rarp_op": self.op, "rarp_hw": format_hw(self.hw),
                "rarp_ip": format_ip(self.ip) if self.ip is not None else None}


@dataclass
class ArpEntry:
    hw: int
    learned_at: int


@dataclass
class Pending:
    target_ip: int
    iface_id: int
    attempts: int = 0
    waiters: list = field(default_factory=list)  # Callable[[int], None]


class ArpState:
    def __init__(self, config: ArpConfig):
        self.config = config
        self.cache: dict[int, ArpEntry] = {}
        self.pending: dict[int, Pending] = {}
        self.rarp_pending = False
        self.rarp_attempts = 0


def state(node: Node, config: Optional[ArpConfig] = None) -> ArpState:
    if node.arp is None:
        node.arp = ArpState(config or ArpConfig())
    return node.arp


def resolve(
    net: Network,
    iface: Interface,
    target_ip: int,
    waiter: Optional[Callable[[int], None]] = None,
) -> Optional[int]:
    """Return the hardware address if cached, else start/join a resolution.

    ``waiter`` is invoked with the address once a reply lands; on retry
    exhaustion the queue is dropped with a resolution_failed observation.
    """
    node = net.node_of_iface(iface)
    if iface.ip is None or not in_subnet(target_ip, iface.ip & prefix_mask(iface.prefix_len), iface.prefix_len):
        raise OffSubnet(f"{format_ip(target_ip)} not on interface subnet")
    st = state(node)
    entry = st.cache.get(target_ip)
    if entry is not None and net.engine.now - entry.learned_at <= st.config.ttl:
        return entry.hw
    pend = st.pending.get(target_ip)
    if pend is not None:
        if waiter is not None:
            pend.waiters.append(waiter)
        return None
    pend = Pending(target_ip=target_ip, iface_id=iface.id)
    if waiter is not None:
        pend.waiters.append(waiter)
    st.pending[target_ip] = pend
    _send_request(net, node, iface, pend)
    _arm_retry(net, node, pend)
    return None


def _send_request(net: Network, node: Node, iface: Interface, pend: Pending) -> None:
    pend.attempts += 1
    pkt = ArpPacket(
        op="request",
        sender_hw=iface.hw,
        sender_ip=iface.ip,
        target_hw=None,
        target_ip=pend.target_ip,
    )
    net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=BROADCAST_HW, proto="arp", payload=pkt))


def _arm_retry(net: Network, node: Node, pend: Pending) -> None:
    st = state(node)

    def on_timer():
        if st.pending.get(pend.target_ip) is not pend:
            return  # resolved meanwhile
        if pend.attempts >= st.config.retries:
            del st.pending[pend.target_ip]
            net.engine.observe(
                "state_transition",
                proto="arp",
                node=node.name,
                event="resolution_failed",
                target_ip=format_ip(pend.target_ip),
            )
            return
        iface = net.interfaces[pend.iface_id]
        _send_request(net, node, iface, pend)
        _arm_retry(net, node, pend)

    net.schedule_node_timer(node, st.config.retry_interval, on_timer)


def _learn(net: Network, node: Node, ip: int, hw: int) -> None:
    st = state(node)
    entry = st.cache.get(ip)
    if entry is None:
        st.cache[ip] = ArpEntry(hw=hw, learned_at=net.engine.now)
        change = "add"
    elif entry.hw != hw:
        st.cache[ip] = ArpEntry(hw=hw, learned_at=net.engine.now)
        change = "update"
    else:
        entry.learned_at = net.engine.now
        _flush_pending(net, node, ip, hw)
        return  # silent refresh
    net.engine.observe(
        "cache_changed",
        node=node.name,
        ip=format_ip(ip),
        hw=_hw_str(hw),
        change=change,
    )
    _flush_pending(net, node, ip, hw)


def _flush_pending(net: Network, node: Node, ip: int, hw: int) -> None:
    st = state(node)
    pend = st.pending.pop(ip, None)
    if pend is None:
        return
    for waiter in pend.waiters:
        waiter(hw)


def handle_arp(net: Network, iface: Interface, frame: Frame) -> None:
    pkt: ArpPacket = frame.payload
    node = net.node_of_iface(iface)
    st = state(node)
    if pkt.op == "request":
        if iface.ip is not None and pkt.target_ip == iface.ip:
            _learn(net, node, pkt.sender_ip, pkt.sender_hw)
            reply = ArpPacket(
                op="reply",
                sender_hw=iface.hw,
                sender_ip=iface.ip,
                target_hw=pkt.sender_hw,
                target_ip=pkt.sender_ip,
            )
            net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=pkt.sender_hw, proto="arp", payload=reply))
        elif pkt.sender_ip in st.cache:
            _learn(net, node, pkt.sender_ip, pkt.sender_hw)
        # else: not for me, sender unknown -> no state change
    elif pkt.op == "reply":
        _learn(net, node, pkt.sender_ip, pkt.sender_hw)


def sweep(net: Network, node: Node) -> None:
    """Evict entries older than the TTL; rearms itself."""
    st = state(node)
    expired = [ip for ip, e in st.cache.items() if net.engine.now - e.learned_at > st.config.ttl]
    for ip in expired:
        entry = st.cache.pop(ip)
        net.engine.observe(
            "cache_changed",
            node=node.name,
            ip=format_ip(ip),
            hw=_hw_str(entry.hw),
            change="expire",
        )
    net.schedule_node_timer(node, st.config.sweep_interval, lambda: sweep(net, node))


def start_node(net: Network, node: Node) -> None:
    """Arm standing timers; called at scenario start and on power-on."""
    st = state(node)
    net.schedule_node_timer(node, st.config.sweep_interval, lambda: sweep(net, node))
    if _unconfigured_iface(net, node) is not None:
        net.schedule_node_timer(node, 0, lambda: _auto_boot(net, node))


def _auto_boot(net: Network, node: Node) -> None:
    if not state(node).rarp_pending and _unconfigured_iface(net, node) is not None:
        rarp_boot(net, node)


def on_power(net: Network, node: Node, power: str) -> None:
    if power == "off":
        st = state(node)
        for ip, entry in st.cache.items():
            net.engine.observe(
                "cache_changed",
                node=node.name,
                ip=format_ip(ip),
                hw=_hw_str(entry.hw),
                change="delete",
            )
        st.cache.clear()
        st.pending.clear()
        st.rarp_pending = False
    else:
        start_node(net, node)


def _unconfigured_iface(net: Network, node: Node) -> Optional[Interface]:
    for iface_id in node.interfaces:
        iface = net.interfaces[iface_id]
        if iface.ip is None and iface.segment is not None:
            return iface
    return None


def rarp_boot(net: Network, node: Node) -> None:
    iface = _unconfigured_iface(net, node)
    if iface is None:
        raise AlreadyConfigured(f"{node.name} has no unconfigured interface")
    st = state(node)
    if st.rarp_pending:
        return
    st.rarp_pending = True
    st.rarp_attempts = 0
    _send_rarp_request(net, node, iface)
    _arm_rarp_retry(net, node, iface)


def _send_rarp_request(net: Network, node: Node, iface: Interface) -> None:
    st = state(node)
    st.rarp_attempts += 1
    pkt = RarpPacket(op="request", hw=iface.hw, ip=None)
    net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=BROADCAST_HW, proto="rarp", payload=pkt))


def _arm_rarp_retry(net: Network, node: Node, iface: Interface) -> None:
    st = state(node)

    def on_timer():
        if not st.rarp_pending:
            return
        if st.rarp_attempts >= st.config.retries:
            st.rarp_pending = False
            net.engine.observe(
                "state_transition",
                proto="rarp",
                node=node.name,
                event="resolution_failed",
            )
            return
        _send_rarp_request(net, node, iface)
        _arm_rarp_retry(net, node, iface)

    net.schedule_node_timer(node, st.config.retry_interval, on_timer)


def handle_rarp(net: Network, iface: Interface, frame: Frame) -> None:
    pkt: RarpPacket = frame.payload
    node = net.node_of_iface(iface)
    if pkt.op == "request":
        if node.rarp_table is None:
            return
        ip = node.rarp_table.get(pkt.hw)
        if ip is None:
            return
        reply = RarpPacket(op="reply", hw=pkt.hw, ip=ip)
        net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=pkt.hw, proto="rarp", payload=reply))
    elif pkt.op == "reply":
        st = state(node)
        if iface.ip is not None or not st.rarp_pending or pkt.hw != iface.hw:
            return
        iface.ip = pkt.ip
        st.rarp_pending = False
        net.install_connected_route(node, iface)
        net.engine.observe(
            "cache_changed",
            node=node.name,
            iface=iface.id,
            ip=format_ip(pkt.ip),
            change="ip_assigned",
        )


_hw_str = format_hw

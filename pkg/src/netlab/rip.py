"""Distance-vector routing: periodic adverts, split horizon, timeout/GC.

Metric convention: connected = 1, each hop adds 1, 16 means unreachable.
Triggered updates are batched behind a one-second hold-down so a change
storm produces a single extra advert.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ip as ip_mod
from .engine import SECOND
from .errors import OutOfRange
from .netmodel import BROADCAST_IP, Interface, Network, Node
from .routing import Route, format_ip

INFINITY_METRIC = 16
SWEEP_INTERVAL = SECOND


@dataclass
class RipConfig:
    update_interval: int = 30 * SECOND
    route_timeout: int = 180 * SECOND
    gc_timeout: int = 120 * SECOND
    split_horizon: str = "poisoned_reverse"  # off | simple | poisoned_reverse
    triggered_updates: bool = True


@dataclass
class RipUpdate:
    sender_ip: int
    entries: list  # of (prefix, prefix_len, metric)

    def trace_fields(self) -> dict:
        return {
            "rip_sender": format_ip(self.sender_ip),
            "rip_entries": [[format_ip(p), l, m] for p, l, m in self.entries],
        }


class RipState:
    def __init__(self, config: RipConfig):
        self.config = config
        self.enabled = False
        self.triggered_pending = False


def state(node: Node, config: Optional[RipConfig] = None) -> RipState:
    if node.rip is None:
        node.rip = RipState(config or RipConfig())
    return node.rip


def enable(net: Network, node: Node) -> None:
    if node.kind != "router":
        raise OutOfRange(f"{node.name} is not a router")
    st = state(node)
    if st.enabled:
        return
    st.enabled = True
    net.engine.observe("state_transition", proto="rip", node=node.name, event="enabled")
    net.schedule_node_timer(node, 0, lambda: tick(net, node))
    net.schedule_node_timer(node, SWEEP_INTERVAL, lambda: sweep(net, node))


def on_power(net: Network, node: Node, power: str) -> None:
    if power == "on" and node.rip is not None and node.rip.enabled:
        node.rip.triggered_pending = False
        net.schedule_node_timer(node, 0, lambda: tick(net, node))
        net.schedule_node_timer(node, SWEEP_INTERVAL, lambda: sweep(net, node))


def tick(net: Network, node: Node) -> None:
    """Periodic full advert on every interface; reschedules itself."""
    st = state(node)
    if not st.enabled or node.power != "on":
        return
    advertise(net, node)
    net.schedule_node_timer(node, st.config.update_interval, lambda: tick(net, node))


def advertise(net: Network, node: Node) -> None:
    st = state(node)
    for iface_id in node.interfaces:
        iface = net.interfaces[iface_id]
        if iface.ip is None or iface.segment is None:
            continue
        entries = []
        for route in node.routes.best_per_prefix():
            metric = route.metric
            if route.source == "rip" and route.learned_if == iface.id:
                if st.config.split_horizon == "simple":
                    continue
                if st.config.split_horizon == "poisoned_reverse":
                    metric = INFINITY_METRIC
            entries.append((route.prefix, route.prefix_len, metric))
        if not entries:
            continue
        node.ip_ident += 1
        pkt = ip_mod.IpPacket(
            src=iface.ip,
            dst=BROADCAST_IP,
            ttl=1,
            proto="rip_udp",
            ident=node.ip_ident,
            payload=RipUpdate(sender_ip=iface.ip, entries=entries),
        )
        ip_mod.broadcast(net, iface, pkt)


def on_packet(net: Network, node: Node, in_iface: Interface, pkt) -> None:
    if node.kind != "router" or node.rip is None or not node.rip.enabled:
        return
    process(net, node, pkt.payload, in_iface)


def process(net: Network, node: Node, upd: RipUpdate, in_iface: Interface) -> None:
    from .routing import in_subnet, prefix_mask

    if in_iface.ip is None:
        return
    local_prefix = in_iface.ip & prefix_mask(in_iface.prefix_len)
    if not in_subnet(upd.sender_ip, local_prefix, in_iface.prefix_len):
        return  # not a directly connected sender
    st = state(node)
    changed = False
    for entry in upd.entries:
        try:
            prefix, prefix_len, metric = entry
        except (TypeError, ValueError):
            _skip(net, node, entry)
            continue
        if not (0 <= prefix_len <= 32) or not (1 <= metric <= INFINITY_METRIC):
            _skip(net, node, entry)
            continue
        candidate = min(metric + 1, INFINITY_METRIC)
        existing = node.routes.get(prefix, prefix_len, "rip")
        if existing is None:
            if candidate >= INFINITY_METRIC:
                continue
            floor = _non_rip_floor(node, prefix, prefix_len)
            if floor is not None and candidate >= floor:
                continue
            node.routes.install(
                Route(
                    prefix=prefix,
                    prefix_len=prefix_len,
                    next_hop=upd.sender_ip,
                    out_iface=in_iface.id,
                    metric=candidate,
                    source="rip",
                    installed_at=net.engine.now,
                    learned_if=in_iface.id,
                    last_heard=net.engine.now,
                )
            )
            _observe_route(net, node, prefix, prefix_len, "add", candidate, upd.sender_ip)
            changed = True
        elif existing.next_hop == upd.sender_ip:
            existing.last_heard = net.engine.now
            if candidate != existing.metric:
                existing.metric = candidate
                existing.gc_deadline = (
                    net.engine.now + st.config.gc_timeout if candidate == INFINITY_METRIC else None
                )
                _observe_route(net, node, prefix, prefix_len, "update", candidate, upd.sender_ip)
                changed = True
        elif candidate < existing.metric:
            existing.next_hop = upd.sender_ip
            existing.out_iface = in_iface.id
            existing.learned_if = in_iface.id
            existing.metric = candidate
            existing.last_heard = net.engine.now
            existing.gc_deadline = None
            _observe_route(net, node, prefix, prefix_len, "update", candidate, upd.sender_ip)
            changed = True
    if changed:
        trigger(net, node)


def _non_rip_floor(node: Node, prefix: int, prefix_len: int) -> Optional[int]:
    metrics = [
        r.metric
        for r in node.routes.entries
        if r.prefix == prefix and r.prefix_len == prefix_len and r.source != "rip"
    ]
    return min(metrics) if metrics else None


def _skip(net: Network, node: Node, entry) -> None:
    net.engine.observe(
        "state_transition",
        proto="rip",
        node=node.name,
        event="entry_skipped",
        entry=repr(entry),
    )


def sweep(net: Network, node: Node) -> None:
    """Age out silent routes and collect poisoned ones; rearms itself."""
    st = state(node)
    if not st.enabled or node.power != "on":
        return
    now = net.engine.now
    changed = False
    for route in list(node.routes.rip_routes()):
        if route.gc_deadline is not None:
            if now >= route.gc_deadline:
                node.routes.entries.remove(route)
                _observe_route(net, node, route.prefix, route.prefix_len, "delete", route.metric, route.next_hop)
        elif now - route.last_heard >= st.config.route_timeout:
            route.metric = INFINITY_METRIC
            route.gc_deadline = now + st.config.gc_timeout
            _observe_route(net, node, route.prefix, route.prefix_len, "update", route.metric, route.next_hop)
            changed = True
    if changed:
        trigger(net, node)
    net.schedule_node_timer(node, SWEEP_INTERVAL, lambda: sweep(net, node))


def trigger(net: Network, node: Node) -> None:
    st = state(node)
    if not st.config.triggered_updates or st.triggered_pending:
        return
    st.triggered_pending = True

    def fire():
        st.triggered_pending = False
        if st.enabled and node.power == "on":
            advertise(net, node)

    net.schedule_node_timer(node, SECOND, fire)


def _observe_route(net, node, prefix, prefix_len, change, metric, next_hop) -> None:
    net.engine.observe(
        "route_changed",
        node=node.name,
        prefix=format_ip(prefix),
        prefix_len=prefix_len,
        change=change,
        metric=metric,
        next_hop=format_ip(next_hop) if next_hop is not None else None,
        source="rip",
    )

"""IP forwarding with TTL, ICMP echo/errors, and the ping/traceroute procedures.

Routers decrement TTL and answer its expiry with time-exceeded; hosts never
forward. Ping and traceroute are event chains: probes go out on timers and
reports are emitted as observations once every probe has resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from . import arp
from .engine import SECOND
from .errors import OutOfRange
from .netmodel import BROADCAST_HW, BROADCAST_IP, Frame, Interface, Network, Node
from .routing import format_ip

DEFAULT_TTL = 64
PROBE_TIMEOUT = 2 * SECOND

ICMP_ERRORS = ("time_exceeded", "dest_unreachable")


@dataclass
class IpPacket:
    src: int
    dst: int
    ttl: int
    proto: str  # icmp | rip_udp | data
    ident: int
    payload: object

    def trace_fields(self) -> dict:
        fields = {
            "ip_src": format_ip(self.src),
            "ip_dst": format_ip(self.dst),
            "ttl": self.ttl,
            "ip_proto": self.proto,
        }
        brief = getattr(self.payload, "trace_fields", None)
        if brief is not None:
            fields.update(brief())
        return fields


@dataclass
class IcmpMessage:
    type: str  # echo_request | echo_reply | time_exceeded | dest_unreachable
    ident: int
    seq: int
    orig: Optional[dict] = None  # embedded original header, errors only

    def trace_fields(self) -> dict:
        return {"icmp_type": self.type, "icmp_ident": self.ident, "icmp_seq": self.seq}


def send(
    net: Network,
    node: Node,
    pkt: IpPacket,
    notify: Optional[Callable[[int], None]] = None,
) -> bool:
    """Route and transmit a locally originated packet.

    Returns False when there is no route (a local dest_unreachable
    observation is emitted, nothing hits the wire). ``notify`` fires with
    the tick at which the frame actually leaves, after any ARP wait.
    """
    if node.power != "on":
        return False
    if net.owns_ip(node, pkt.dst):
        iface = net.iface_by_ip(node, pkt.dst)
        deliver_local(net, node, iface, pkt)
        if notify is not None:
            notify(net.engine.now)
        return True
    if _route_and_emit(net, node, pkt, notify):
        return True
    net.engine.observe(
        "icmp_emitted",
        node=node.name,
        icmp_type="dest_unreachable",
        local=True,
        ip_dst=format_ip(pkt.dst),
    )
    return False


def _route_and_emit(
    net: Network,
    node: Node,
    pkt: IpPacket,
    notify: Optional[Callable[[int], None]] = None,
) -> bool:
    route = node.routes.lookup(pkt.dst)
    if route is None:
        return False
    iface = net.interfaces[route.out_iface]
    if iface.ip is None or iface.segment is None:
        return False
    if pkt.src == 0:
        pkt = replace(pkt, src=iface.ip)
    target = route.next_hop if route.next_hop is not None else pkt.dst

    def emit(hw: int):
        net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=hw, proto="ip", payload=pkt))
        if notify is not None:
            notify(net.engine.now)

    hw = arp.resolve(net, iface, target, waiter=emit)
    if hw is not None:
        emit(hw)
    return True


def broadcast(net: Network, iface: Interface, pkt: IpPacket) -> None:
    net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=BROADCAST_HW, proto="ip", payload=pkt))


def handle_frame(net: Network, iface: Interface, frame: Frame) -> None:
    pkt: IpPacket = frame.payload
    node = net.node_of_iface(iface)
    if pkt.dst == BROADCAST_IP or net.owns_ip(node, pkt.dst):
        deliver_local(net, node, iface, pkt)
        return
    if node.kind != "router":
        return  # hosts never forward
    ttl = pkt.ttl - 1
    if ttl <= 0:
        _icmp_error(net, node, iface, pkt, "time_exceeded")
        return
    fwd = replace(pkt, ttl=ttl)
    if not _route_and_emit(net, node, fwd):
        _icmp_error(net, node, iface, pkt, "dest_unreachable")


def _icmp_error(net: Network, node: Node, in_iface: Interface, orig_pkt: IpPacket, err_type: str) -> None:
    if orig_pkt.proto == "icmp" and getattr(orig_pkt.payload, "type", None) in ICMP_ERRORS:
        return  # errors are never answered with errors
    if in_iface.ip is None:
        return
    orig = {
        "src": format_ip(orig_pkt.src),
        "dst": format_ip(orig_pkt.dst),
        "ttl": orig_pkt.ttl,
        "proto": orig_pkt.proto,
    }
    ident = seq = 0
    if orig_pkt.proto == "icmp":
        ident = orig_pkt.payload.ident
        seq = orig_pkt.payload.seq
        orig["icmp_ident"] = ident
        orig["icmp_seq"] = seq
    msg = IcmpMessage(type=err_type, ident=ident, seq=seq, orig=orig)
    net.engine.observe(
        "icmp_emitted",
        node=node.name,
        icmp_type=err_type,
        ip_dst=format_ip(orig_pkt.src),
        icmp_ident=ident,
        icmp_seq=seq,
    )
    node.ip_ident += 1
    reply = IpPacket(
        src=in_iface.ip,
        dst=orig_pkt.src,
        ttl=DEFAULT_TTL,
        proto="icmp",
        ident=node.ip_ident,
        payload=msg,
    )
    send(net, node, reply)


def deliver_local(net: Network, node: Node, in_iface: Interface, pkt: IpPacket) -> None:
    if pkt.proto == "icmp":
        _deliver_icmp(net, node, in_iface, pkt)
        return
    handler = net.local_proto_handlers.get(pkt.proto)
    if handler is not None:
        handler(node, in_iface, pkt)


def _deliver_icmp(net: Network, node: Node, in_iface: Interface, pkt: IpPacket) -> None:
    msg: IcmpMessage = pkt.payload
    if msg.type == "echo_request":
        src_ip = pkt.dst if net.owns_ip(node, pkt.dst) else in_iface.ip
        if src_ip is None:
            return
        net.engine.observe(
            "icmp_emitted",
            node=node.name,
            icmp_type="echo_reply",
            ip_dst=format_ip(pkt.src),
            icmp_ident=msg.ident,
            icmp_seq=msg.seq,
        )
        node.ip_ident += 1
        reply = IpPacket(
            src=src_ip,
            dst=pkt.src,
            ttl=DEFAULT_TTL,
            proto="icmp",
            ident=node.ip_ident,
            payload=IcmpMessage(type="echo_reply", ident=msg.ident, seq=msg.seq),
        )
        send(net, node, reply)
    elif msg.type == "echo_reply":
        session = node.pings.get(msg.ident) or node.traceroutes.get(msg.ident)
        if session is not None:
            session.on_reply(msg.seq, pkt.src)
    elif msg.type in ICMP_ERRORS:
        session = node.pings.get(msg.ident) or node.traceroutes.get(msg.ident)
        if session is not None:
            session.on_error(msg.type, msg.seq, pkt.src)


# -- ping ------------------------------------------------------------------------


@dataclass
class ProbeResult:
    seq: int
    status: Optional[str] = None  # reply | timeout | unreachable
    responder: Optional[int] = None
    rtt: Optional[int] = None
    sent_wire: Optional[int] = None


class PingSession:
    def __init__(self, net, node, dst, count, interval, timeout, ttl):
        self.net = net
        self.node = node
        self.dst = dst
        self.count = count
        self.interval = interval
        self.timeout = timeout
        self.ttl = ttl
        node.icmp_ident += 1
        self.ident = node.icmp_ident
        self.probes: dict[int, ProbeResult] = {}
        self.report: Optional[dict] = None

    def start(self) -> None:
        self.node.pings[self.ident] = self
        for seq in range(1, self.count + 1):
            delay = (seq - 1) * self.interval
            self.net.schedule_node_timer(self.node, delay, self._sender(seq))

    def _sender(self, seq: int) -> Callable[[], None]:
        def go():
            if self.report is not None:
                return
            probe = ProbeResult(seq=seq)
            self.probes[seq] = probe
            msg = IcmpMessage(type="echo_request", ident=self.ident, seq=seq)
            self.net.engine.observe(
                "icmp_emitted",
                node=self.node.name,
                icmp_type="echo_request",
                ip_dst=format_ip(self.dst),
                icmp_ident=self.ident,
                icmp_seq=seq,
            )
            self.node.ip_ident += 1
            pkt = IpPacket(
                src=0, dst=self.dst, ttl=self.ttl, proto="icmp",
                ident=self.node.ip_ident, payload=msg,
            )

            def mark_wire(t):
                probe.sent_wire = t

            if not send(self.net, self.node, pkt, notify=mark_wire):
                self._resolve(probe, "unreachable")
                return
            self.net.schedule_node_timer(self.node, self.timeout, self._timeouter(seq))

        return go

    def _timeouter(self, seq: int) -> Callable[[], None]:
        def fire():
            probe = self.probes.get(seq)
            if probe is not None and probe.status is None:
                self._resolve(probe, "timeout")

        return fire

    def on_reply(self, seq: int, responder: int) -> None:
        probe = self.probes.get(seq)
        if probe is None or probe.status is not None or probe.sent_wire is None:
            return
        probe.responder = responder
        probe.rtt = self.net.engine.now - probe.sent_wire
        self._resolve(probe, "reply")

    def on_error(self, err_type: str, seq: int, responder: int) -> None:
        probe = self.probes.get(seq)
        if probe is None or probe.status is not None:
            return
        probe.responder = responder
        self._resolve(probe, "unreachable")

    def _resolve(self, probe: ProbeResult, status: str) -> None:
        probe.status = status
        if len(self.probes) == self.count and all(p.status for p in self.probes.values()):
            self._finish()

    def _finish(self) -> None:
        rtts = [p.rtt for p in self.probes.values() if p.status == "reply"]
        self.report = {
            "dst": format_ip(self.dst),
            "sent": self.count,
            "received": len(rtts),
            "rtt_min": min(rtts) if rtts else None,
            "rtt_avg": sum(rtts) // len(rtts) if rtts else None,
            "rtt_max": max(rtts) if rtts else None,
            "probes": [
                {
                    "seq": p.seq,
                    "status": p.status,
                    "responder": format_ip(p.responder) if p.responder is not None else None,
                    "rtt": p.rtt,
                }
                for p in sorted(self.probes.values(), key=lambda p: p.seq)
            ],
        }
        self.net.engine.observe(
            "state_transition",
            proto="ping",
            node=self.node.name,
            ident=self.ident,
            event="report",
            **self.report,
        )
        self.node.pings.pop(self.ident, None)


def ping(
    net: Network,
    node: Node,
    dst_ip: int,
    count: int = 4,
    interval: int = SECOND,
    timeout: int = PROBE_TIMEOUT,
    ttl: int = DEFAULT_TTL,
) -> PingSession:
    if count < 1:
        raise OutOfRange(f"count must be >= 1, got {count}")
    session = PingSession(net, node, dst_ip, count, interval, timeout, ttl)
    session.start()
    return session


# -- traceroute ---------------------------------------------------------------------


@dataclass
class HopProbe:
    ttl: int
    seq: int
    status: Optional[str] = None  # ttl_exceeded | reply | timeout | unreachable
    responder: Optional[int] = None
    rtt: Optional[int] = None
    sent_wire: Optional[int] = None


class TracerouteSession:
    def __init__(self, net, node, dst, max_ttl, probes_per_ttl, timeout):
        self.net = net
        self.node = node
        self.dst = dst
        self.max_ttl = max_ttl
        self.probes_per_ttl = probes_per_ttl
        self.timeout = timeout
        node.icmp_ident += 1
        self.ident = node.icmp_ident
        self.cur_ttl = 1
        self.cur_probe = 0
        self.next_seq = 0
        self.probes: dict[int, HopProbe] = {}
        self.report: Optional[dict] = None

    def start(self) -> None:
        self.node.traceroutes[self.ident] = self
        self._send_next()

    def _send_next(self) -> None:
        if self.report is not None:
            return
        self.next_seq += 1
        seq = self.next_seq
        probe = HopProbe(ttl=self.cur_ttl, seq=seq)
        self.probes[seq] = probe
        msg = IcmpMessage(type="echo_request", ident=self.ident, seq=seq)
        self.net.engine.observe(
            "icmp_emitted",
            node=self.node.name,
            icmp_type="echo_request",
            ip_dst=format_ip(self.dst),
            icmp_ident=self.ident,
            icmp_seq=seq,
            ttl=self.cur_ttl,
        )
        self.node.ip_ident += 1
        pkt = IpPacket(
            src=0, dst=self.dst, ttl=self.cur_ttl, proto="icmp",
            ident=self.node.ip_ident, payload=msg,
        )

        def mark_wire(t):
            probe.sent_wire = t

        if not send(self.net, self.node, pkt, notify=mark_wire):
            probe.status = "unreachable"
            self._finish(reached=False)
            return

        def on_timeout():
            if probe.status is None:
                probe.status = "timeout"
                self._advance()

        self.net.schedule_node_timer(self.node, self.timeout, on_timeout)

    def on_reply(self, seq: int, responder: int) -> None:
        probe = self.probes.get(seq)
        if probe is None or probe.status is not None:
            return
        probe.status = "reply"
        probe.responder = responder
        if probe.sent_wire is not None:
            probe.rtt = self.net.engine.now - probe.sent_wire
        self._finish(reached=True)

    def on_error(self, err_type: str, seq: int, responder: int) -> None:
        probe = self.probes.get(seq)
        if probe is None or probe.status is not None:
            return
        probe.responder = responder
        if probe.sent_wire is not None:
            probe.rtt = self.net.engine.now - probe.sent_wire
        if err_type == "time_exceeded":
            probe.status = "ttl_exceeded"
            self._advance()
        else:
            probe.status = "unreachable"
            self._finish(reached=False)

    def _advance(self) -> None:
        if self.report is not None:
            return
        self.cur_probe += 1
        if self.cur_probe >= self.probes_per_ttl:
            self.cur_ttl += 1
            self.cur_probe = 0
            if self.cur_ttl > self.max_ttl:
                self._finish(reached=False)
                return
        self._send_next()

    def _finish(self, reached: bool) -> None:
        hops: list[dict] = []
        for ttl in range(1, max((p.ttl for p in self.probes.values()), default=0) + 1):
            ttl_probes = [p for p in self.probes.values() if p.ttl == ttl]
            if not ttl_probes:
                continue
            hops.append(
                {
                    "ttl": ttl,
                    "probes": [
                        {
                            "status": p.status,
                            "responder": format_ip(p.responder) if p.responder is not None else None,
                            "rtt": p.rtt,
                        }
                        for p in sorted(ttl_probes, key=lambda p: p.seq)
                    ],
                }
            )
        self.report = {"dst": format_ip(self.dst), "reached": reached, "hops": hops}
        self.net.engine.observe(
            "state_transition",
            proto="traceroute",
            node=self.node.name,
            ident=self.ident,
            event="report",
            **self.report,
        )
        self.node.traceroutes.pop(self.ident, None)


def traceroute(
    net: Network,
    node: Node,
    dst_ip: int,
    max_ttl: int = 30,
    probes_per_ttl: int = 1,
    timeout: int = PROBE_TIMEOUT,
) -> TracerouteSession:
    if max_ttl < 1:
        raise OutOfRange(f"max_ttl must be >= 1, got {max_ttl}")
    session = TracerouteSession(net, node, dst_ip, max_ttl, probes_per_ttl, timeout)
    session.start()
    return session

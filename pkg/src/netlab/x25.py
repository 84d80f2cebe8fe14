"""Simplified X.25 stack: LAPB sliding-window link layer plus a
virtual-circuit packet layer with call setup/clear and window-2 flow control.

The link layer is a go-back style ARQ with modulo-8 sequence numbers:
corrupted frames vanish silently and recovery is driven by REJ frames and
the T1 retransmission timer. Network-layer packets travel only inside
I-frames, so the packet layer never sees loss or reordering.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .engine import SECOND
from .errors import (
    BadCircuitState,
    BadState,
    LinkDown,
    NoFreeLci,
    NotPointToPoint,
    UnknownLci,
)
from .netmodel import Frame, Interface, Network, Node

MAX_LCI = 4095


@dataclass
class LapbConfig:
    window: int = 7  # 1..7 with modulo-8 numbering
    t1: int = 3 * SECOND
    n2: int = 10


@dataclass
class X25Config:
    window: int = 2


@dataclass
class LapbFrame:
    kind: str  # SABM | UA | DISC | I | RR | REJ
    ns: Optional[int] = None
    nr: Optional[int] = None
    payload: object = None

    def trace_fields(self) -> dict:
        fields = {"lapb_kind": self.kind}
        if self.ns is not None:
            fields["ns"] = self.ns
        if self.nr is not None:
            fields["nr"] = self.nr
        brief = getattr(self.payload, "trace_fields", None)
        if brief is not None:
            fields.update(brief())
        return fields


@dataclass
class X25Packet:
    kind: str  # call_request | call_accepted | clear_request | clear_confirm | data | rr
    lci: int
    ps: Optional[int] = None
    pr: Optional[int] = None
    called: Optional[str] = None
    calling: Optional[str] = None
    data: object = None

    def trace_fields(self) -> dict:
        fields = {"x25_kind": self.kind, "lci": self.lci}
        if self.ps is not None:
            fields["x25_ps"] = self.ps
        if self.pr is not None:
            fields["x25_pr"] = self.pr
        return fields


class LapbEndpoint:
    def __init__(self, iface_id: int, config: LapbConfig):
        self.iface_id = iface_id
        self.config = config
        self.state = "disconnected"  # disconnected | setup | connected | disconnecting
        self.vs = 0
        self.vr = 0
        self.va = 0
        self.send_queue: deque = deque()
        self.buffer: list[tuple[int, object]] = []  # unacked (ns, payload) in order
        self.retry_count = 0
        self.rej_outstanding = False
        self.t1_epoch = 0
        self.sabm_attempts = 0

    def inflight(self) -> int:
        return (self.vs - self.va) % 8

    def reset_counters(self) -> None:
        self.vs = self.vr = self.va = 0
        self.send_queue.clear()
        self.buffer.clear()
        self.retry_count = 0
        self.rej_outstanding = False


def endpoint(net: Network, node: Node, iface: Interface, config: Optional[LapbConfig] = None) -> LapbEndpoint:
    ep = node.lapb.get(iface.id)
    if ep is None:
        ep = LapbEndpoint(iface.id, config or node.lapb_config or LapbConfig())
        node.lapb[iface.id] = ep
    return ep


def _transition(net: Network, node: Node, ep: LapbEndpoint, to: str, reason: str = "") -> None:
    if ep.state == to:
        return
    detail = {"proto": "lapb", "node": node.name, "iface": ep.iface_id,
              "from": ep.state, "to": to}
    if reason:
        detail["reason"] = reason
    ep.state = to
    net.engine.observe("state_transition", **detail)


def _send(net: Network, iface: Interface, peer_frame: LapbFrame) -> None:
    peer = _peer_iface(net, iface)
    net.transmit(iface.id, Frame(src_hw=iface.hw, dst_hw=peer.hw, proto="lapb", payload=peer_frame))


def _peer_iface(net: Network, iface: Interface) -> Interface:
    seg = net.segments[iface.segment]
    for other_id in seg.attached:
        if other_id != iface.id:
            return net.interfaces[other_id]
    raise NotPointToPoint(f"segment {seg.name} has no peer interface")


def connect(net: Network, node: Node, iface: Interface) -> None:
    seg = net.segments.get(iface.segment)
    if seg is None or len(seg.attached) != 2:
        raise NotPointToPoint("LAPB requires a segment with exactly 2 interfaces")
    ep = endpoint(net, node, iface)
    if ep.state != "disconnected":
        raise BadState(f"connect in state {ep.state}")
    ep.reset_counters()
    ep.sabm_attempts = 1
    _transition(net, node, ep, "setup")
    _send(net, iface, LapbFrame(kind="SABM"))
    _arm_t1(net, node, ep)


def disconnect(net: Network, node: Node, iface: Interface) -> None:
    ep = endpoint(net, node, iface)
    if ep.state != "connected":
        raise BadState(f"disconnect in state {ep.state}")
    _transition(net, node, ep, "disconnecting")
    _send(net, iface, LapbFrame(kind="DISC"))
    _arm_t1(net, node, ep)


def send_payload(net: Network, node: Node, iface: Interface, payload: object) -> None:
    ep = endpoint(net, node, iface)
    if ep.state != "connected":
        raise BadState(f"send in state {ep.state}")
    if ep.inflight() < ep.config.window:
        _emit_i(net, node, iface, ep, payload)
    else:
        ep.send_queue.append(payload)


def _emit_i(net: Network, node: Node, iface: Interface, ep: LapbEndpoint, payload: object) -> None:
    frame = LapbFrame(kind="I", ns=ep.vs, nr=ep.vr, payload=payload)
    ep.buffer.append((ep.vs, payload))
    ep.vs = (ep.vs + 1) % 8
    _send(net, iface, frame)
    _arm_t1(net, node, ep)


def _arm_t1(net: Network, node: Node, ep: LapbEndpoint) -> None:
    ep.t1_epoch += 1
    epoch = ep.t1_epoch

    def fire():
        if ep.t1_epoch != epoch:
            return
        _on_t1(net, node, ep)

    net.schedule_node_timer(node, ep.config.t1, fire)


def _cancel_t1(ep: LapbEndpoint) -> None:
    ep.t1_epoch += 1


def _on_t1(net: Network, node: Node, ep: LapbEndpoint) -> None:
    iface = net.interfaces[ep.iface_id]
    if ep.state == "setup":
        if ep.sabm_attempts >= ep.config.n2:
            _transition(net, node, ep, "disconnected", reason="connect_failed")
            return
        ep.sabm_attempts += 1
        _send(net, iface, LapbFrame(kind="SABM"))
        _arm_t1(net, node, ep)
        return
    if ep.state == "disconnecting":
        _transition(net, node, ep, "disconnected", reason="disc_timeout")
        return
    if ep.state != "connected" or not ep.buffer:
        return
    ep.retry_count += 1
    if ep.retry_count > ep.config.n2:
        _link_down(net, node, ep, reason="link_reset")
        return
    ns, payload = ep.buffer[0]
    _send(net, iface, LapbFrame(kind="I", ns=ns, nr=ep.vr, payload=payload))
    _arm_t1(net, node, ep)


def _link_down(net: Network, node: Node, ep: LapbEndpoint, reason: str) -> None:
    ep.reset_counters()
    _cancel_t1(ep)
    _transition(net, node, ep, "disconnected", reason=reason)
    iface = net.interfaces[ep.iface_id]
    on_link_down(net, node, iface)


def handle_frame(net: Network, iface: Interface, frame: Frame) -> None:
    if frame.corrupted:
        return  # checksum model: corrupted frames vanish, REJ/T1 recover
    node = net.node_of_iface(iface)
    ep = endpoint(net, node, iface)
    lf: LapbFrame = frame.payload
    if lf.kind == "SABM":
        was = ep.state
        ep.reset_counters()
        _cancel_t1(ep)
        _transition(net, node, ep, "connected", reason="sabm")
        if was in ("connected", "setup"):
            on_link_down(net, node, iface)
        _send(net, iface, LapbFrame(kind="UA"))
        return
    if lf.kind == "UA":
        if ep.state == "setup":
            ep.reset_counters()
            _cancel_t1(ep)
            _transition(net, node, ep, "connected")
        elif ep.state == "disconnecting":
            _cancel_t1(ep)
            _transition(net, node, ep, "disconnected")
            on_link_down(net, node, iface)
        return
    if lf.kind == "DISC":
        _send(net, iface, LapbFrame(kind="UA"))
        ep.reset_counters()
        _cancel_t1(ep)
        _transition(net, node, ep, "disconnected", reason="disc")
        on_link_down(net, node, iface)
        return
    if ep.state != "connected":
        return
    if lf.kind == "I":
        _process_ack(net, node, ep, lf.nr)
        if lf.ns == ep.vr:
            ep.vr = (ep.vr + 1) % 8
            ep.rej_outstanding = False
            _send(net, iface, LapbFrame(kind="RR", nr=ep.vr))
            _deliver_up(net, node, iface, lf.payload)
        elif (ep.vr - lf.ns) % 8 <= 8 - ep.config.window:
            # unambiguous duplicate of an already-accepted frame: re-ack
            _send(net, iface, LapbFrame(kind="RR", nr=ep.vr))
        elif not ep.rej_outstanding:
            ep.rej_outstanding = True
            _send(net, iface, LapbFrame(kind="REJ", nr=ep.vr))
        else:
            # REJ already out (possibly lost to noise): keep acking with RR
            # so retransmissions always make the sender's window progress
            _send(net, iface, LapbFrame(kind="RR", nr=ep.vr))
        return
    if lf.kind == "RR":
        _process_ack(net, node, ep, lf.nr)
        return
    if lf.kind == "REJ":
        _process_ack(net, node, ep, lf.nr)
        ep.retry_count = 0
        for ns, payload in ep.buffer:
            _send(net, iface, LapbFrame(kind="I", ns=ns, nr=ep.vr, payload=payload))
        if ep.buffer:
            _arm_t1(net, node, ep)
        return


def _process_ack(net: Network, node: Node, ep: LapbEndpoint, nr: Optional[int]) -> None:
    if nr is None:
        return
    acked = (nr - ep.va) % 8
    if acked == 0 or acked > ep.inflight():
        return
    del ep.buffer[:acked]
    ep.va = nr
    ep.retry_count = 0
    iface = net.interfaces[ep.iface_id]
    while ep.send_queue and ep.inflight() < ep.config.window:
        _emit_i(net, node, iface, ep, ep.send_queue.popleft())
    if ep.buffer:
        _arm_t1(net, node, ep)
    else:
        _cancel_t1(ep)


def _deliver_up(net: Network, node: Node, iface: Interface, payload: object) -> None:
    if isinstance(payload, X25Packet):
        handle_packet(net, node, iface, payload)
    else:
        net.engine.observe(
            "state_transition",
            proto="lapb",
            node=node.name,
            iface=iface.id,
            event="payload_delivered",
            data=payload,
        )


# -- packet layer -----------------------------------------------------------------


class VirtualCircuit:
    def __init__(self, lci: int, window: int):
        self.lci = lci
        self.state = "ready"  # ready | call_sent | call_received | data_transfer | clearing
        self.ps_next = 0
        self.pa = 0
        self.pr = 0
        self.window = window
        self.send_queue: deque = deque()

    def inflight(self) -> int:
        return (self.ps_next - self.pa) % 8


def _circuits(node: Node, iface: Interface) -> dict:
    return node.x25.setdefault(iface.id, {})


def _vc_transition(net: Network, node: Node, iface: Interface, vc: VirtualCircuit, to: str, reason: str = "") -> None:
    detail = {"proto": "x25", "node": node.name, "iface": iface.id, "lci": vc.lci,
              "from": vc.state, "to": to}
    if reason:
        detail["reason"] = reason
    vc.state = to
    net.engine.observe("state_transition", **detail)


def _x25_config(node: Node) -> X25Config:
    return node.x25_config if node.x25_config is not None else X25Config()


def call(net: Network, node: Node, iface: Interface, remote_addr: str) -> int:
    ep = node.lapb.get(iface.id)
    if ep is None or ep.state != "connected":
        raise LinkDown("LAPB link is not connected")
    circuits = _circuits(node, iface)
    lci = next((i for i in range(1, MAX_LCI + 1) if i not in circuits), None)
    if lci is None:
        raise NoFreeLci("all logical channels busy")
    vc = VirtualCircuit(lci, _x25_config(node).window)
    circuits[lci] = vc
    _vc_transition(net, node, iface, vc, "call_sent")
    send_payload(net, node, iface, X25Packet(
        kind="call_request", lci=lci, called=remote_addr, calling=node.name))
    return lci


def send_data(net: Network, node: Node, iface: Interface, lci: int, data: object) -> None:
    vc = _circuits(node, iface).get(lci)
    if vc is None:
        raise UnknownLci(f"no circuit on lci {lci}")
    if vc.state != "data_transfer":
        raise BadCircuitState(f"send in state {vc.state}")
    if vc.inflight() < vc.window:
        _emit_data(net, node, iface, vc, data)
    else:
        vc.send_queue.append(data)


def _emit_data(net: Network, node: Node, iface: Interface, vc: VirtualCircuit, data: object) -> None:
    pkt = X25Packet(kind="data", lci=vc.lci, ps=vc.ps_next, pr=vc.pr, data=data)
    vc.ps_next = (vc.ps_next + 1) % 8
    send_payload(net, node, iface, pkt)


def clear(net: Network, node: Node, iface: Interface, lci: int) -> None:
    vc = _circuits(node, iface).get(lci)
    if vc is None:
        raise UnknownLci(f"no circuit on lci {lci}")
    if vc.state not in ("data_transfer", "call_sent", "call_received"):
        raise BadCircuitState(f"clear in state {vc.state}")
    _vc_transition(net, node, iface, vc, "clearing")
    send_payload(net, node, iface, X25Packet(kind="clear_request", lci=lci))


def handle_packet(net: Network, node: Node, iface: Interface, pkt: X25Packet) -> None:
    circuits = _circuits(node, iface)
    vc = circuits.get(pkt.lci)
    if pkt.kind == "call_request":
        if vc is not None:
            _discard(net, node, iface, pkt, "lci_busy")
            return
        if pkt.called not in (None, node.name):
            send_payload(net, node, iface, X25Packet(kind="clear_request", lci=pkt.lci))
            net.engine.observe(
                "state_transition",
                proto="x25", node=node.name, iface=iface.id, lci=pkt.lci,
                event="call_refused", called=pkt.called,
            )
            return
        vc = VirtualCircuit(pkt.lci, _x25_config(node).window)
        circuits[pkt.lci] = vc
        _vc_transition(net, node, iface, vc, "call_received")
        _vc_transition(net, node, iface, vc, "data_transfer", reason="accepted")
        send_payload(net, node, iface, X25Packet(kind="call_accepted", lci=pkt.lci))
        return
    if pkt.kind == "call_accepted":
        if vc is None or vc.state != "call_sent":
            _discard(net, node, iface, pkt, "unexpected_call_accepted")
            return
        vc.ps_next = vc.pa = vc.pr = 0
        _vc_transition(net, node, iface, vc, "data_transfer")
        return
    if pkt.kind == "data":
        if vc is None:
            _discard(net, node, iface, pkt, "unknown_lci")
            return
        if vc.state != "data_transfer":
            _discard(net, node, iface, pkt, f"data_in_{vc.state}")
            return
        _vc_ack(net, node, iface, vc, pkt.pr)
        if pkt.ps != vc.pr:
            _discard(net, node, iface, pkt, "packet_seq_error")
            return
        vc.pr = (vc.pr + 1) % 8
        net.engine.observe(
            "state_transition",
            proto="x25", node=node.name, iface=iface.id, lci=vc.lci,
            event="data_delivered", ps=pkt.ps, data=pkt.data,
        )
        send_payload(net, node, iface, X25Packet(kind="rr", lci=vc.lci, pr=vc.pr))
        return
    if pkt.kind == "rr":
        if vc is None:
            _discard(net, node, iface, pkt, "unknown_lci")
            return
        if vc.state != "data_transfer":
            _discard(net, node, iface, pkt, f"rr_in_{vc.state}")
            return
        _vc_ack(net, node, iface, vc, pkt.pr)
        return
    if pkt.kind == "clear_request":
        if vc is None:
            _discard(net, node, iface, pkt, "unknown_lci")
            return
        _vc_transition(net, node, iface, vc, "ready", reason="cleared_by_peer")
        del circuits[pkt.lci]
        send_payload(net, node, iface, X25Packet(kind="clear_confirm", lci=pkt.lci))
        return
    if pkt.kind == "clear_confirm":
        if vc is None or vc.state != "clearing":
            _discard(net, node, iface, pkt, "unexpected_clear_confirm")
            return
        _vc_transition(net, node, iface, vc, "ready", reason="cleared")
        del circuits[pkt.lci]
        return
    _discard(net, node, iface, pkt, "unknown_packet_kind")


def _vc_ack(net: Network, node: Node, iface: Interface, vc: VirtualCircuit, pr: Optional[int]) -> None:
    if pr is None:
        return
    acked = (pr - vc.pa) % 8
    if acked == 0 or acked > vc.inflight():
        return
    vc.pa = pr
    while vc.send_queue and vc.inflight() < vc.window:
        _emit_data(net, node, iface, vc, vc.send_queue.popleft())


def _discard(net: Network, node: Node, iface: Interface, pkt: X25Packet, reason: str) -> None:
    net.engine.observe(
        "state_transition",
        proto="x25", node=node.name, iface=iface.id, lci=pkt.lci,
        event="discard", x25_kind=pkt.kind, reason=reason,
    )


def on_link_down(net: Network, node: Node, iface: Interface) -> None:
    circuits = node.x25.get(iface.id)
    if not circuits:
        return
    for vc in list(circuits.values()):
        _vc_transition(net, node, iface, vc, "ready", reason="link_down")
    circuits.clear()


def on_power(net: Network, node: Node, power: str) -> None:
    if power == "off":
        for iface_id in list(node.x25):
            on_link_down(net, node, net.interfaces[iface_id])
        node.x25.clear()
        for ep in node.lapb.values():
            ep.reset_counters()
            _cancel_t1(ep)
            _transition(net, node, ep, "disconnected", reason="power_off")

"""One simulation instance wired end to end: engine + network + protocols.

The Lab owns action dispatch (scenario scripts and live injections share the
same vocabulary), per-node protocol configs, live parameter changes, state
snapshots, and the injection addendum that makes interactive runs replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import algokit, arp, ip as ip_mod, rip, x25
from .arp import ArpConfig
from .engine import Engine, Event, parse_ticks
from .errors import OutOfRange, UnknownRef
from .netmodel import Network, Node, Segment
from .rip import RipConfig
from .routing import format_ip, parse_ip
from .x25 import LapbConfig, X25Config


@dataclass
class LabConfigs:
    arp: ArpConfig = field(default_factory=ArpConfig)
    rip: RipConfig = field(default_factory=RipConfig)
    lapb: LapbConfig = field(default_factory=LapbConfig)
    x25: X25Config = field(default_factory=X25Config)


# parameter paths accepted by set_param: path -> (config slot, field, type)
PARAMS = {
    "arp.ttl": ("arp", "ttl", "ticks"),
    "arp.retries": ("arp", "retries", "int"),
    "arp.retry_interval": ("arp", "retry_interval", "ticks"),
    "arp.sweep_interval": ("arp", "sweep_interval", "ticks"),
    "rip.update_interval": ("rip", "update_interval", "ticks"),
    "rip.route_timeout": ("rip", "route_timeout", "ticks"),
    "rip.gc_timeout": ("rip", "gc_timeout", "ticks"),
    "rip.split_horizon": ("rip", "split_horizon", "split_horizon"),
    "rip.triggered_updates": ("rip", "triggered_updates", "bool"),
    "lapb.window": ("lapb", "window", "window"),
    "lapb.t1": ("lapb", "t1", "ticks"),
    "lapb.n2": ("lapb", "n2", "int"),
    "x25.window": ("x25", "window", "window"),
}


class Lab:
    def __init__(self, seed: int = 0, configs: Optional[LabConfigs] = None):
        self.seed = seed
        self.configs = configs or LabConfigs()
        self.engine = Engine(seed)
        self.net = Network(self.engine)
        self.net.frame_handlers.update(
            {
                "arp": lambda iface, frame: arp.handle_arp(self.net, iface, frame),
                "rarp": lambda iface, frame: arp.handle_rarp(self.net, iface, frame),
                "ip": lambda iface, frame: ip_mod.handle_frame(self.net, iface, frame),
                "lapb": lambda iface, frame: x25.handle_frame(self.net, iface, frame),
            }
        )
        self.net.local_proto_handlers["rip_udp"] = (
            lambda node, iface, pkt: rip.on_packet(self.net, node, iface, pkt)
        )
        self.net.power_hooks.extend(
            [
                lambda node, power: arp.on_power(self.net, node, power),
                lambda node, power: rip.on_power(self.net, node, power),
                lambda node, power: x25.on_power(self.net, node, power),
            ]
        )
        self.engine.register("script", self._on_script_event)
        self.addendum: list[dict] = []
        self._started = False

    # -- topology -----------------------------------------------------------

    def add_node(self, kind: str, name: str) -> Node:
        node = self.net.add_node(kind, name)
        arp.state(node, replace(self.configs.arp))
        if kind == "router":
            rip.state(node, replace(self.configs.rip))
        node.lapb_config = replace(self.configs.lapb)
        node.x25_config = replace(self.configs.x25)
        return node

    def add_segment(self, name: str, latency, noise_p: float = 0.0) -> Segment:
        return self.net.add_segment(name, parse_ticks(latency), noise_p)

    def attach(self, node: Node, segment: Segment, ip: Optional[str] = None, prefix_len: Optional[int] = None):
        addr = parse_ip(ip) if isinstance(ip, str) else ip
        return self.net.attach(node.id, segment.id, addr, prefix_len)

    def add_static_route(self, node: Node, prefix: str, prefix_len: int, next_hop: str, metric: int = 1) -> None:
        from .routing import Route

        nh = parse_ip(next_hop)
        route = node.routes.lookup(nh)
        if route is None or route.source != "connected":
            raise UnknownRef(f"next hop {next_hop} is not on a connected subnet of {node.name}")
        node.routes.install(
            Route(
                prefix=parse_ip(prefix),
                prefix_len=prefix_len,
                next_hop=nh,
                out_iface=route.out_iface,
                metric=metric,
                source="static",
                installed_at=self.engine.now,
            )
        )
        self.engine.observe(
            "route_changed",
            node=node.name,
            prefix=prefix,
            prefix_len=prefix_len,
            change="add",
            metric=metric,
            next_hop=next_hop,
            source="static",
        )

    def set_rarp_entry(self, server: Node, hw: int, ip: str) -> None:
        if server.rarp_table is None:
            server.rarp_table = {}
        server.rarp_table[hw] = parse_ip(ip)

    def start(self) -> None:
        """Arm standing timers (ARP sweep, RARP auto-boot). Call once."""
        if self._started:
            return
        self._started = True
        for node in self.net.nodes.values():
            arp.start_node(self.net, node)

    # -- execution ------------------------------------------------------------

    def step(self):
        return self.engine.step()

    def run_until(self, t) -> list:
        return self.engine.run_until(parse_ticks(t))

    # -- actions (scripts and live injection share this vocabulary) ------------

    def load_script(self, script: list[dict]) -> None:
        for entry in script:
            at = parse_ticks(entry["at"])
            action = {k: v for k, v in entry.items() if k != "at"}
            self.engine.schedule(at, "script", action)

    def inject(self, action: dict, record: bool = True) -> None:
        """Apply an action at the current event boundary.

        Injections are journaled with the dispatch count so that replaying
        scenario + addendum reproduces the interactive trace exactly.
        """
        self._check_refs(action)
        if record:
            self.addendum.append(
                {
                    "after_steps": self.engine.dispatch_count,
                    "at": self.engine.now,
                    "action": action,
                }
            )
        self.engine.schedule(self.engine.now, "script", action)

    def _on_script_event(self, ev: Event) -> None:
        from .errors import LabError

        try:
            self.do_action(ev.payload)
        except LabError as exc:
            self.engine.observe(
                "state_transition",
                proto="script",
                event="action_failed",
                action=ev.payload.get("action"),
                error=exc.code,
            )

    def _node(self, name: str) -> Node:
        node = self.net.node_by_name.get(name)
        if node is None:
            raise UnknownRef(f"unknown node {name!r}")
        return node

    def _segment(self, name: str) -> Segment:
        seg = self.net.segment_by_name.get(name)
        if seg is None:
            raise UnknownRef(f"unknown segment {name!r}")
        return seg

    def _iface(self, node: Node, segment: Segment):
        iface = self.net.iface_of(node, segment)
        if iface is None:
            raise UnknownRef(f"{node.name} has no interface on {segment.name}")
        return iface

    def _check_refs(self, action: dict) -> None:
        kind = action.get("action")
        if kind not in ACTIONS:
            raise UnknownRef(f"unknown action {kind!r}")
        if "node" in action and action["node"] != "*":
            self._node(action["node"])
        if "segment" in action:
            seg = self._segment(action["segment"])
            if "node" in action and action["node"] != "*":
                self._iface(self._node(action["node"]), seg)
        if "dst" in action:
            try:
                parse_ip(action["dst"])
            except ValueError:
                raise OutOfRange(f"bad ip address {action['dst']!r}")
        if kind == "set_param" and action.get("path") not in PARAMS:
            raise UnknownRef(f"unknown parameter {action.get('path')!r}")
        if kind == "set_noise" and not 0 <= float(action.get("p", -1)) <= 1:
            raise OutOfRange(f"noise must be in [0,1]")

    def do_action(self, action: dict) -> None:
        kind = action["action"]
        handler = ACTIONS.get(kind)
        if handler is None:
            raise UnknownRef(f"unknown action {kind!r}")
        handler(self, action)

    # individual actions

    def _act_break_link(self, a: dict) -> None:
        self.net.break_link(self._segment(a["segment"]).id)

    def _act_restore_link(self, a: dict) -> None:
        self.net.restore_link(self._segment(a["segment"]).id)

    def _act_set_noise(self, a: dict) -> None:
        self.net.set_noise(self._segment(a["segment"]).id, float(a["p"]))

    def _act_set_power(self, a: dict) -> None:
        self.net.set_power(self._node(a["node"]).id, a["power"])

    def _act_set_param(self, a: dict) -> None:
        self.set_param(a["path"], a["value"], a.get("node"))

    def _act_ping(self, a: dict) -> None:
        node = self._node(a["node"])
        ip_mod.ping(
            self.net,
            node,
            parse_ip(a["dst"]),
            count=a.get("count", 4),
            interval=parse_ticks(a.get("interval", "1s")),
            timeout=parse_ticks(a.get("timeout", "2s")),
        )

    def _act_traceroute(self, a: dict) -> None:
        node = self._node(a["node"])
        ip_mod.traceroute(
            self.net,
            node,
            parse_ip(a["dst"]),
            max_ttl=a.get("max_ttl", 30),
            probes_per_ttl=a.get("probes_per_ttl", 1),
            timeout=parse_ticks(a.get("timeout", "2s")),
        )

    def _act_rip_enable(self, a: dict) -> None:
        if a["node"] == "*":
            for node in self.net.nodes.values():
                if node.kind == "router":
                    rip.enable(self.net, node)
        else:
            rip.enable(self.net, self._node(a["node"]))

    def _act_rarp_boot(self, a: dict) -> None:
        arp.rarp_boot(self.net, self._node(a["node"]))

    def _act_lapb_connect(self, a: dict) -> None:
        node = self._node(a["node"])
        x25.connect(self.net, node, self._iface(node, self._segment(a["segment"])))

    def _act_lapb_send(self, a: dict) -> None:
        node = self._node(a["node"])
        x25.send_payload(self.net, node, self._iface(node, self._segment(a["segment"])), a["data"])

    def _act_x25_call(self, a: dict) -> None:
        node = self._node(a["node"])
        x25.call(self.net, node, self._iface(node, self._segment(a["segment"])), a["remote"])

    def _act_x25_send(self, a: dict) -> None:
        node = self._node(a["node"])
        x25.send_data(self.net, node, self._iface(node, self._segment(a["segment"])), int(a["lci"]), a["data"])

    def _act_x25_clear(self, a: dict) -> None:
        node = self._node(a["node"])
        x25.clear(self.net, node, self._iface(node, self._segment(a["segment"])), int(a["lci"]))

    def _act_algo(self, a: dict) -> None:
        for step in algokit.run_scripted(a):
            detail = {"algo": a["algo"], "index": step.index, "op": step.kind,
                      "operands": step.operands}
            if step.annotation:
                detail["annotation"] = step.annotation
            self.engine.observe("algo_step", **detail)

    # -- live parameter changes ---------------------------------------------------

    def set_param(self, path: str, value, node_name: Optional[str] = None) -> None:
        spec = PARAMS.get(path)
        if spec is None:
            raise UnknownRef(f"unknown parameter {path!r}")
        slot, fname, kind = spec
        parsed = _parse_param(kind, value)
        nodes = (
            [self._node(node_name)]
            if node_name and node_name != "*"
            else list(self.net.nodes.values())
        )
        for node in nodes:
            if slot == "arp":
                setattr(arp.state(node).config, fname, parsed)
            elif slot == "rip":
                if node.rip is not None:
                    setattr(node.rip.config, fname, parsed)
            elif slot == "lapb":
                if node.lapb_config is not None:
                    setattr(node.lapb_config, fname, parsed)
                for ep in node.lapb.values():
                    setattr(ep.config, fname, parsed)
            elif slot == "x25":
                if node.x25_config is not None:
                    setattr(node.x25_config, fname, parsed)
        self.engine.observe(
            "fault_applied",
            action="set_param",
            path=path,
            value=value,
            node=node_name or "*",
        )

    # -- snapshot ---------------------------------------------------------------

    def snapshot(self) -> dict:
        nodes = {}
        for node in self.net.nodes.values():
            arp_cache = {}
            if node.arp is not None:
                arp_cache = {
                    format_ip(ip_val): {
                        "hw": _hw(entry.hw),
                        "learned_at": entry.learned_at,
                    }
                    for ip_val, entry in sorted(node.arp.cache.items())
                }
            routes = [
                {
                    "prefix": format_ip(r.prefix),
                    "prefix_len": r.prefix_len,
                    "next_hop": format_ip(r.next_hop) if r.next_hop is not None else None,
                    "metric": r.metric,
                    "source": r.source,
                }
                for r in sorted(
                    node.routes.entries,
                    key=lambda r: (r.prefix, r.prefix_len, r.source),
                )
            ]
            lapb = {
                str(iface_id): {
                    "state": ep.state,
                    "vs": ep.vs,
                    "vr": ep.vr,
                    "va": ep.va,
                    "inflight": ep.inflight(),
                    "queued": len(ep.send_queue),
                }
                for iface_id, ep in sorted(node.lapb.items())
            }
            circuits = {
                str(iface_id): {
                    str(lci): {"state": vc.state, "ps": vc.ps_next, "pr": vc.pr}
                    for lci, vc in sorted(vcs.items())
                }
                for iface_id, vcs in sorted(node.x25.items())
            }
            nodes[node.name] = {
                "kind": node.kind,
                "power": node.power,
                "interfaces": [
                    {
                        "id": i,
                        "segment": self.net.segments[self.net.interfaces[i].segment].name
                        if self.net.interfaces[i].segment
                        else None,
                        "ip": format_ip(self.net.interfaces[i].ip)
                        if self.net.interfaces[i].ip is not None
                        else None,
                        "prefix_len": self.net.interfaces[i].prefix_len,
                        "hw": _hw(self.net.interfaces[i].hw),
                    }
                    for i in node.interfaces
                ],
                "arp_cache": arp_cache,
                "routes": routes,
                "rip_enabled": bool(node.rip is not None and node.rip.enabled),
                "lapb": lapb,
                "x25": circuits,
            }
        segments = {
            seg.name: {
                "status": seg.status,
                "noise_p": seg.noise_p,
                "latency": seg.latency,
                "attached": len(seg.attached),
            }
            for seg in self.net.segments.values()
        }
        return {
            "at": self.engine.now,
            "pending_events": self.engine.pending(),
            "nodes": nodes,
            "segments": segments,
        }


ACTIONS = {
    "break_link": Lab._act_break_link,
    "restore_link": Lab._act_restore_link,
    "set_noise": Lab._act_set_noise,
    "set_power": Lab._act_set_power,
    "set_param": Lab._act_set_param,
    "ping": Lab._act_ping,
    "traceroute": Lab._act_traceroute,
    "rip_enable": Lab._act_rip_enable,
    "rarp_boot": Lab._act_rarp_boot,
    "lapb_connect": Lab._act_lapb_connect,
    "lapb_send": Lab._act_lapb_send,
    "x25_call": Lab._act_x25_call,
    "x25_send": Lab._act_x25_send,
    "x25_clear": Lab._act_x25_clear,
    "algo": Lab._act_algo,
}


def _parse_param(kind: str, value):
    if kind == "ticks":
        ticks = parse_ticks(value)
        if ticks <= 0:
            raise OutOfRange("interval must be positive")
        return ticks
    if kind == "int":
        n = int(value)
        if n < 1:
            raise OutOfRange(f"must be >= 1, got {n}")
        return n
    if kind == "window":
        n = int(value)
        if not 1 <= n <= 7:
            raise OutOfRange(f"window must be 1..7, got {n}")
        return n
    if kind == "bool":
        if isinstance(value, bool):
            return value
        if value in ("true", "false"):
            return value == "true"
        raise OutOfRange(f"expected boolean, got {value!r}")
    if kind == "split_horizon":
        if value not in ("off", "simple", "poisoned_reverse"):
            raise OutOfRange(f"bad split_horizon {value!r}")
        return value
    raise OutOfRange(f"unknown param type {kind}")


def _hw(hw: int) -> str:
    from .netmodel import format_hw

    return format_hw(hw)

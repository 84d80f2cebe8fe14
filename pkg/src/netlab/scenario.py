"""Scenario (.scn.json) and trace (.trace.ndjson) file formats.

Scenarios are JSON documents validated into a normalized form (times in
ticks); traces are newline-delimited JSON records with keys in fixed
lexicographic order, so equal runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional

from .arp import ArpConfig
from .engine import Observation, parse_ticks
from .errors import OutOfRange, ScenarioSyntaxError, ValidationError
from .lab import PARAMS, Lab, LabConfigs
from .rip import RipConfig
from .routing import parse_ip
from .x25 import LapbConfig, X25Config

SCENARIO_SUFFIX = ".scn.json"
TRACE_SUFFIX = ".trace.ndjson"

CATALOG = [
    "arp-basic",
    "arp-two-hosts",
    "rarp-boot",
    "ping-wan",
    "traceroute-preset",
    "traceroute-buildable",
    "rip-line-3",
    "rip-two-variants",
    "x25-noisy-link",
]


@dataclass
class Scenario:
    meta: dict
    configs: dict
    overrides: list
    nodes: list
    segments: list
    interfaces: list
    static_routes: list
    rarp: list
    script: list

    @property
    def name(self) -> str:
        return self.meta["name"]

    @property
    def seed(self) -> int:
        return self.meta["seed"]

    @property
    def duration(self) -> int:
        return self.meta["duration"]


# -- parsing / validation --------------------------------------------------------


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioSyntaxError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("bad_field", "scenario must be a JSON object", "$")
    return validate(doc)


def serialize_scenario(scn: Scenario) -> str:
    return json.dumps(asdict(scn), indent=2, sort_keys=True) + "\n"


def _need(doc: dict, key: str, typ, path: str):
    if key not in doc:
        raise ValidationError("bad_field", f"missing field {key!r}", path)
    val = doc[key]
    if not isinstance(val, typ) or isinstance(val, bool) and typ is not bool:
        raise ValidationError("bad_field", f"field {key!r} has wrong type", f"{path}.{key}")
    return val


def _ticks(value, path: str, minimum: int = 0) -> int:
    try:
        t = parse_ticks(value)
    except OutOfRange as exc:
        raise ValidationError("out_of_range", str(exc), path)
    if t < minimum:
        raise ValidationError("out_of_range", f"must be >= {minimum} ticks", path)
    return t


def _ip(value, path: str) -> str:
    if not isinstance(value, str):
        raise ValidationError("bad_field", "ip must be a dotted string", path)
    try:
        parse_ip(value)
    except ValueError:
        raise ValidationError("out_of_range", f"bad ip address {value!r}", path)
    return value


CONFIG_FIELDS = {
    "arp": {"ttl": "ticks", "retries": "int", "retry_interval": "ticks", "sweep_interval": "ticks"},
    "rip": {
        "update_interval": "ticks",
        "route_timeout": "ticks",
        "gc_timeout": "ticks",
        "split_horizon": "split_horizon",
        "triggered_updates": "bool",
    },
    "lapb": {"window": "window", "t1": "ticks", "n2": "int"},
    "x25": {"window": "window"},
}


def _validate_config_block(block: dict, path: str) -> dict:
    out = {}
    for proto, fields in block.items():
        if proto not in CONFIG_FIELDS:
            raise ValidationError("unknown_ref", f"unknown protocol config {proto!r}", f"{path}.{proto}")
        if not isinstance(fields, dict):
            raise ValidationError("bad_field", "config block must be an object", f"{path}.{proto}")
        got = {}
        for fname, value in fields.items():
            ftype = CONFIG_FIELDS[proto].get(fname)
            fpath = f"{path}.{proto}.{fname}"
            if ftype is None:
                raise ValidationError("unknown_ref", f"unknown config field {fname!r}", fpath)
            if ftype == "ticks":
                got[fname] = _ticks(value, fpath, minimum=1)
            elif ftype == "int":
                if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                    raise ValidationError("out_of_range", "must be a positive integer", fpath)
                got[fname] = value
            elif ftype == "window":
                if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 7:
                    raise ValidationError("out_of_range", "window must be 1..7", fpath)
                got[fname] = value
            elif ftype == "bool":
                if not isinstance(value, bool):
                    raise ValidationError("bad_field", "must be a boolean", fpath)
                got[fname] = value
            elif ftype == "split_horizon":
                if value not in ("off", "simple", "poisoned_reverse"):
                    raise ValidationError("out_of_range", f"bad split_horizon {value!r}", fpath)
                got[fname] = value
        out[proto] = got
    return out


SCRIPT_PARAMS = {
    # action -> (required fields, optional fields)
    "break_link": ({"segment"}, set()),
    "restore_link": ({"segment"}, set()),
    "set_noise": ({"segment", "p"}, set()),
    "set_power": ({"node", "power"}, set()),
    "set_param": ({"path", "value"}, {"node"}),
    "ping": ({"node", "dst"}, {"count", "interval", "timeout"}),
    "traceroute": ({"node", "dst"}, {"max_ttl", "probes_per_ttl", "timeout"}),
    "rip_enable": ({"node"}, set()),
    "rarp_boot": ({"node"}, set()),
    "lapb_connect": ({"node", "segment"}, set()),
    "lapb_send": ({"node", "segment", "data"}, set()),
    "x25_call": ({"node", "segment", "remote"}, set()),
    "x25_send": ({"node", "segment", "lci", "data"}, set()),
    "x25_clear": ({"node", "segment", "lci"}, set()),
    "algo": ({"algo"}, {"ops", "mode", "edges", "vertices", "src"}),
}


def validate(doc: dict) -> Scenario:
    meta_in = _need(doc, "meta", dict, "$")
    name = _need(meta_in, "name", str, "$.meta")
    seed = _need(meta_in, "seed", int, "$.meta")
    duration = _ticks(_need(meta_in, "duration", (int, str), "$.meta"), "$.meta.duration", minimum=1)
    meta = {"name": name, "seed": seed, "duration": duration}
    if "description" in meta_in:
        meta["description"] = _need(meta_in, "description", str, "$.meta")

    configs = _validate_config_block(doc.get("configs", {}), "$.configs")

    node_names = set()
    nodes = []
    for i, spec in enumerate(doc.get("nodes", [])):
        path = f"$.nodes[{i}]"
        nname = _need(spec, "name", str, path)
        kind = _need(spec, "kind", str, path)
        if kind not in ("host", "router"):
            raise ValidationError("out_of_range", f"bad node kind {kind!r}", f"{path}.kind")
        if nname in node_names:
            raise ValidationError("duplicate_name", f"duplicate node name {nname!r}", path)
        node_names.add(nname)
        nodes.append({"name": nname, "kind": kind})

    seg_names = set()
    segments = []
    for i, spec in enumerate(doc.get("segments", [])):
        path = f"$.segments[{i}]"
        sname = _need(spec, "name", str, path)
        if sname in seg_names:
            raise ValidationError("duplicate_name", f"duplicate segment name {sname!r}", path)
        seg_names.add(sname)
        latency = _ticks(_need(spec, "latency", (int, str), path), f"{path}.latency", minimum=1)
        noise = spec.get("noise", 0.0)
        if isinstance(noise, bool) or not isinstance(noise, (int, float)) or not 0 <= noise <= 1:
            raise ValidationError("out_of_range", "noise must be in [0,1]", f"{path}.noise")
        segments.append({"name": sname, "latency": latency, "noise": float(noise)})

    interfaces = []
    ips_per_segment: dict[str, set] = {}
    ifaces_by_key: dict[tuple, dict] = {}
    for i, spec in enumerate(doc.get("interfaces", [])):
        path = f"$.interfaces[{i}]"
        nname = _need(spec, "node", str, path)
        sname = _need(spec, "segment", str, path)
        if nname not in node_names:
            raise ValidationError("unknown_ref", f"unknown node {nname!r}", f"{path}.node")
        if sname not in seg_names:
            raise ValidationError("unknown_ref", f"unknown segment {sname!r}", f"{path}.segment")
        plen = _need(spec, "prefix_len", int, path)
        if not 0 <= plen <= 32:
            raise ValidationError("out_of_range", "prefix_len must be 0..32", f"{path}.prefix_len")
        ip_val = spec.get("ip")
        if ip_val is not None:
            _ip(ip_val, f"{path}.ip")
            taken = ips_per_segment.setdefault(sname, set())
            if ip_val in taken:
                raise ValidationError("duplicate_ip", f"{ip_val} already on {sname}", f"{path}.ip")
            taken.add(ip_val)
        entry = {"node": nname, "segment": sname, "ip": ip_val, "prefix_len": plen}
        interfaces.append(entry)
        ifaces_by_key[(nname, sname)] = entry

    static_routes = []
    for i, spec in enumerate(doc.get("static_routes", [])):
        path = f"$.static_routes[{i}]"
        nname = _need(spec, "node", str, path)
        if nname not in node_names:
            raise ValidationError("unknown_ref", f"unknown node {nname!r}", f"{path}.node")
        prefix = _ip(_need(spec, "prefix", str, path), f"{path}.prefix")
        plen = _need(spec, "prefix_len", int, path)
        if not 0 <= plen <= 32:
            raise ValidationError("out_of_range", "prefix_len must be 0..32", f"{path}.prefix_len")
        next_hop = _ip(_need(spec, "next_hop", str, path), f"{path}.next_hop")
        metric = spec.get("metric", 1)
        if not isinstance(metric, int) or isinstance(metric, bool) or not 1 <= metric <= 16:
            raise ValidationError("out_of_range", "metric must be 1..16", f"{path}.metric")
        static_routes.append(
            {"node": nname, "prefix": prefix, "prefix_len": plen, "next_hop": next_hop, "metric": metric}
        )

    rarp = []
    servers_per_segment: dict[str, str] = {}
    for i, spec in enumerate(doc.get("rarp", [])):
        path = f"$.rarp[{i}]"
        server = _need(spec, "server", str, path)
        if server not in node_names:
            raise ValidationError("unknown_ref", f"unknown node {server!r}", f"{path}.server")
        entries = _need(spec, "entries", list, path)
        checked = []
        for j, ent in enumerate(entries):
            epath = f"{path}.entries[{j}]"
            nname = _need(ent, "node", str, epath)
            sname = _need(ent, "segment", str, epath)
            key = (nname, sname)
            if key not in ifaces_by_key:
                raise ValidationError("unknown_ref", f"no interface for {nname} on {sname}", epath)
            if ifaces_by_key[key]["ip"] is not None:
                raise ValidationError("out_of_range", f"{nname} on {sname} already has an ip", epath)
            other = servers_per_segment.get(sname)
            if other is not None and other != server:
                raise ValidationError(
                    "duplicate_rarp_server", f"segment {sname} already served by {other}", epath
                )
            servers_per_segment[sname] = server
            checked.append({"node": nname, "segment": sname, "ip": _ip(_need(ent, "ip", str, epath), epath)})
        rarp.append({"server": server, "entries": checked})

    overrides = []
    for i, spec in enumerate(doc.get("overrides", [])):
        path = f"$.overrides[{i}]"
        nname = _need(spec, "node", str, path)
        if nname not in node_names:
            raise ValidationError("unknown_ref", f"unknown node {nname!r}", f"{path}.node")
        block = _validate_config_block({k: v for k, v in spec.items() if k != "node"}, path)
        overrides.append({"node": nname, **block})

    script = []
    last_at = 0
    for i, spec in enumerate(doc.get("script", [])):
        path = f"$.script[{i}]"
        at = _ticks(_need(spec, "at", (int, str), path), f"{path}.at")
        if at < last_at:
            raise ValidationError("bad_time_order", "script times must be non-decreasing", f"{path}.at")
        last_at = at
        action = _need(spec, "action", str, path)
        if action not in SCRIPT_PARAMS:
            raise ValidationError("unknown_ref", f"unknown action {action!r}", f"{path}.action")
        required, optional = SCRIPT_PARAMS[action]
        given = set(spec) - {"at", "action"}
        missing = required - given
        if missing:
            raise ValidationError("bad_field", f"missing {sorted(missing)} for {action}", path)
        unknown = given - required - optional
        if unknown:
            raise ValidationError("bad_field", f"unknown fields {sorted(unknown)} for {action}", path)
        if "node" in spec and spec["node"] != "*" and spec["node"] not in node_names:
            raise ValidationError("unknown_ref", f"unknown node {spec['node']!r}", f"{path}.node")
        if "segment" in spec:
            if spec["segment"] not in seg_names:
                raise ValidationError("unknown_ref", f"unknown segment {spec['segment']!r}", f"{path}.segment")
            if "node" in spec and spec["node"] != "*" and (spec["node"], spec["segment"]) not in ifaces_by_key:
                raise ValidationError(
                    "unknown_ref", f"{spec['node']} has no interface on {spec['segment']}", path
                )
        if "dst" in spec:
            _ip(spec["dst"], f"{path}.dst")
        if action == "set_noise":
            p = spec["p"]
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0 <= p <= 1:
                raise ValidationError("out_of_range", "noise must be in [0,1]", f"{path}.p")
        if action == "set_power" and spec["power"] not in ("on", "off"):
            raise ValidationError("out_of_range", "power must be on or off", f"{path}.power")
        if action == "set_param" and spec["path"] not in PARAMS:
            raise ValidationError("unknown_ref", f"unknown parameter {spec['path']!r}", f"{path}.path")
        if action == "ping" and not (isinstance(spec.get("count", 1), int) and spec.get("count", 1) >= 1):
            raise ValidationError("out_of_range", "count must be >= 1", f"{path}.count")
        if action == "traceroute" and not (
            isinstance(spec.get("max_ttl", 1), int) and spec.get("max_ttl", 1) >= 1
        ):
            raise ValidationError("out_of_range", "max_ttl must be >= 1", f"{path}.max_ttl")
        entry = dict(spec)
        entry["at"] = at
        script.append(entry)

    return Scenario(
        meta=meta,
        configs=configs,
        overrides=overrides,
        nodes=nodes,
        segments=segments,
        interfaces=interfaces,
        static_routes=static_routes,
        rarp=rarp,
        script=script,
    )


# -- scenario -> running lab ---------------------------------------------------------


def build_lab(scn: Scenario, seed: Optional[int] = None) -> Lab:
    configs = LabConfigs(
        arp=ArpConfig(**scn.configs.get("arp", {})),
        rip=RipConfig(**scn.configs.get("rip", {})),
        lapb=LapbConfig(**scn.configs.get("lapb", {})),
        x25=X25Config(**scn.configs.get("x25", {})),
    )
    lab = Lab(seed=scn.seed if seed is None else seed, configs=configs)
    for spec in scn.nodes:
        lab.add_node(spec["kind"], spec["name"])
    for spec in scn.segments:
        lab.add_segment(spec["name"], spec["latency"], spec["noise"])
    for spec in scn.interfaces:
        node = lab.net.node_by_name[spec["node"]]
        seg = lab.net.segment_by_name[spec["segment"]]
        lab.attach(node, seg, spec["ip"], spec["prefix_len"])
    for spec in scn.static_routes:
        node = lab.net.node_by_name[spec["node"]]
        lab.add_static_route(node, spec["prefix"], spec["prefix_len"], spec["next_hop"], spec["metric"])
    for spec in scn.rarp:
        server = lab.net.node_by_name[spec["server"]]
        for ent in spec["entries"]:
            node = lab.net.node_by_name[ent["node"]]
            seg = lab.net.segment_by_name[ent["segment"]]
            iface = lab.net.iface_of(node, seg)
            lab.set_rarp_entry(server, iface.hw, ent["ip"])
    for spec in scn.overrides:
        node = lab.net.node_by_name[spec["node"]]
        for proto, fields in spec.items():
            if proto == "node":
                continue
            for fname, value in fields.items():
                if proto == "arp":
                    setattr(node.arp.config, fname, value)
                elif proto == "rip" and node.rip is not None:
                    setattr(node.rip.config, fname, value)
                elif proto == "lapb":
                    setattr(node.lapb_config, fname, value)
                elif proto == "x25":
                    setattr(node.x25_config, fname, value)
    lab.start()
    lab.load_script(scn.script)
    return lab


def run_scenario(
    scn: Scenario,
    seed: Optional[int] = None,
    until: Optional[int] = None,
    addendum: Optional[list] = None,
    steps: Optional[int] = None,
) -> Lab:
    """Headless run to `until` (default: the scenario duration).

    An addendum (exported from an interactive session) is replayed by
    injecting each recorded action at its recorded dispatch boundary, which
    reproduces the interactive trace exactly. When `steps` is given the run
    is bounded by dispatch count instead of time, matching a session that
    was driven by step commands.
    """
    lab = build_lab(scn, seed=seed)
    stop = scn.duration if until is None else until
    pending = sorted(addendum or [], key=lambda e: e["after_steps"])
    idx = 0
    while True:
        while idx < len(pending) and lab.engine.dispatch_count >= pending[idx]["after_steps"]:
            lab.inject(pending[idx]["action"], record=False)
            idx += 1
        if steps is not None:
            if lab.engine.dispatch_count >= steps:
                break
            if lab.engine.step() is None:
                break
        else:
            nxt = lab.engine.peek_time()
            if nxt is None or nxt > stop:
                break
            lab.engine.step()
    if steps is None:
        lab.engine.run_until(stop)
    elif lab.engine.now < stop:
        lab.engine.now = stop  # park the clock where the session left it
    return lab


def run_replay_bundle(scn: Scenario, bundle: dict) -> Lab:
    """Re-run scenario + exported addendum bundle headlessly."""
    return run_scenario(
        scn,
        seed=bundle.get("seed"),
        until=bundle.get("until"),
        addendum=bundle.get("addendum", []),
        steps=bundle.get("steps"),
    )


# -- trace format ------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    at: int
    seq: int
    kind: str
    detail: dict

    def as_dict(self) -> dict:
        return {"at": self.at, "seq": self.seq, "kind": self.kind, **self.detail}


def record_of(obs: Observation) -> TraceRecord:
    return TraceRecord(at=obs.at, seq=obs.seq, kind=obs.kind, detail=dict(obs.detail))


def dump_record(rec: TraceRecord) -> str:
    return json.dumps(rec.as_dict(), sort_keys=True, separators=(",", ":"))


def write_trace(observations) -> str:
    lines = []
    for obs in observations:
        rec = obs if isinstance(obs, TraceRecord) else record_of(obs)
        lines.append(dump_record(rec))
    return "\n".join(lines) + ("\n" if lines else "")


def read_trace(text: str) -> list[TraceRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioSyntaxError(f"trace line {lineno}: {exc}") from exc
        try:
            at, seq, kind = doc.pop("at"), doc.pop("seq"), doc.pop("kind")
        except KeyError as exc:
            raise ScenarioSyntaxError(f"trace line {lineno}: missing {exc}") from exc
        records.append(TraceRecord(at=at, seq=seq, kind=kind, detail=doc))
    return records


def diff_traces(a: list[TraceRecord], b: list[TraceRecord]):
    """First divergence as (index, left, right), or None when equal."""
    for i in range(min(len(a), len(b))):
        if a[i] != b[i]:
            return i, a[i], b[i]
    if len(a) != len(b):
        i = min(len(a), len(b))
        return i, a[i] if i < len(a) else None, b[i] if i < len(b) else None
    return None


# -- bundled catalog -----------------------------------------------------------------------


def catalog_names() -> list[str]:
    return list(CATALOG)


def load_catalog_text(name: str) -> str:
    if name not in CATALOG:
        raise ValidationError("unknown_ref", f"no bundled scenario {name!r}", "$")
    return resources.files("netlab.catalog").joinpath(name + SCENARIO_SUFFIX).read_text()


def load_catalog_scenario(name: str) -> Scenario:
    return parse_scenario(load_catalog_text(name))

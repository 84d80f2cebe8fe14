import pytest

from netlab.engine import MS, SECOND
from netlab.lab import Lab
from netlab.routing import parse_ip


def build_chain(lab: Lab, n_routers: int, latency="2ms"):
    """H - R1 - ... - Rn - S with static routes both ways.

    Returns (hosts, routers, segments): hosts = (H, S). `latency` is one
    value for every segment or a per-segment list (n_routers + 1 entries).
    Subnets: 10.0.k.0/24 for segment k (0-based).
    """
    h = lab.add_node("host", "H")
    s = lab.add_node("host", "S")
    routers = [lab.add_node("router", f"R{i+1}") for i in range(n_routers)]
    chain = [h] + routers + [s]
    latencies = latency if isinstance(latency, (list, tuple)) else [latency] * (len(chain) - 1)
    segments = []
    for k in range(len(chain) - 1):
        seg = lab.add_segment(f"S{k+1}", latencies[k])
        segments.append(seg)
        lab.attach(chain[k], seg, f"10.0.{k}.1", 24)
        lab.attach(chain[k + 1], seg, f"10.0.{k}.2", 24)
    last = len(segments) - 1
    # forward routes toward S, reverse routes toward H
    for k, node in enumerate(chain[:-1]):
        for target in range(k + 1, len(segments)):
            lab.add_static_route(node, f"10.0.{target}.0", 24, f"10.0.{k}.2")
    for k, node in enumerate(chain[1:], start=1):
        for target in range(0, k - 1):
            lab.add_static_route(node, f"10.0.{target}.0", 24, f"10.0.{k-1}.1")
    return (h, s), routers, segments


def observations_of(obs, kind):
    return [o for o in obs if o.kind == kind]


def ip(text):
    return parse_ip(text)

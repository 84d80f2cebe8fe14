import random
from collections import deque

import pytest

from netlab import rip
from netlab.engine import SECOND
from netlab.lab import Lab
from netlab.rip import INFINITY_METRIC, RipUpdate
from netlab.routing import format_ip, parse_ip


def rip_line(n=3, seed=0):
    """R1 - R2 - ... - Rn with a stub network on each end router."""
    lab = Lab(seed=seed)
    routers = [lab.add_node("router", f"R{i+1}") for i in range(n)]
    transits = []
    for k in range(n - 1):
        seg = lab.add_segment(f"T{k+1}", "2ms")
        transits.append(seg)
        lab.attach(routers[k], seg, f"10.1.{k+1}.1", 24)
        lab.attach(routers[k + 1], seg, f"10.1.{k+1}.2", 24)
    stub_a = lab.add_segment("NA", "2ms")
    lab.attach(routers[0], stub_a, "10.2.1.1", 24)
    stub_b = lab.add_segment("NB", "2ms")
    lab.attach(routers[-1], stub_b, f"10.2.{n}.1", 24)
    lab.start()
    for r in routers:
        rip.enable(lab.net, r)
    return lab, routers, transits, (stub_a, stub_b)


def best_metric(node, prefix_str, plen=24):
    prefix = parse_ip(prefix_str)
    candidates = [r.metric for r in node.routes.entries
                  if r.prefix == prefix and r.prefix_len == plen]
    return min(candidates) if candidates else None


# -- independent oracle: BFS over the router adjacency graph --------------------------


def bfs_network_distances(adjacency, attachments, routers):
    """distance from each router to each network: hops to the nearest
    attachment router (0 if attached)."""
    dist = {}
    for r in routers:
        d = {r: 0}
        q = deque([r])
        while q:
            u = q.popleft()
            for v in adjacency.get(u, ()):
                if v not in d:
                    d[v] = d[u] + 1
                    q.append(v)
        for net_name, attached in attachments.items():
            reachable = [d[a] for a in attached if a in d]
            dist[(r, net_name)] = min(reachable) if reachable else None
    return dist


def test_line_converges_to_hop_count_plus_one():
    lab, routers, transits, (na, nb) = rip_line(3)
    lab.run_until(90 * SECOND)
    r1, r2, r3 = routers
    assert best_metric(r1, "10.2.3.0") == 3  # stub behind two hops
    assert best_metric(r2, "10.2.3.0") == 2
    assert best_metric(r3, "10.2.3.0") == 1  # connected
    assert best_metric(r3, "10.2.1.0") == 3
    assert best_metric(r1, "10.1.2.0") == 2


def test_worse_metric_from_current_next_hop_is_adopted():
    lab, routers, transits, _ = rip_line(2)
    lab.run_until(60 * SECOND)
    r1, r2 = routers
    route = r1.routes.get(parse_ip("10.2.2.0"), 24, "rip")
    assert route is not None and route.metric == 2
    # same sender re-advertises with metric 5 -> route updates to 6
    in_iface = lab.net.interfaces[route.learned_if]
    rip.process(
        lab.net, r1,
        RipUpdate(sender_ip=route.next_hop, entries=[(parse_ip("10.2.2.0"), 24, 5)]),
        in_iface,
    )
    assert r1.routes.get(parse_ip("10.2.2.0"), 24, "rip").metric == 6


def test_metric_15_entry_becomes_16_and_is_not_adopted_as_new():
    lab, routers, transits, _ = rip_line(2)
    lab.run_until(60 * SECOND)
    r1 = routers[0]
    iface = lab.net.interfaces[r1.interfaces[0]]
    assert r1.routes.get(parse_ip("172.16.0.0"), 16, "rip") is None
    rip.process(
        lab.net, r1,
        RipUpdate(sender_ip=parse_ip("10.1.1.2"), entries=[(parse_ip("172.16.0.0"), 16, 15)]),
        iface,
    )
    assert r1.routes.get(parse_ip("172.16.0.0"), 16, "rip") is None


def test_poisoned_reverse_advertises_16_on_learning_interface():
    lab, routers, transits, _ = rip_line(2)
    lab.run_until(95 * SECOND)
    # R1 learned 10.2.2.0/24 via T1; its advert on T1 must carry metric 16
    adverts = [
        o for o in lab.engine.history
        if o.kind == "frame_sent" and o.detail.get("rip_sender") == "10.1.1.1"
    ]
    assert adverts
    entry_sets = [dict(((p, l), m) for p, l, m in
                       [(e[0], e[1], e[2]) for e in o.detail["rip_entries"]])
                  for o in adverts[-2:]]
    for entries in entry_sets:
        assert entries.get(("10.2.2.0", 24)) == 16


def test_simple_split_horizon_omits_route():
    lab = Lab(seed=0)
    lab.configs.rip.split_horizon = "simple"
    routers = [lab.add_node("router", f"R{i+1}") for i in range(2)]
    seg = lab.add_segment("T1", "2ms")
    lab.attach(routers[0], seg, "10.1.1.1", 24)
    lab.attach(routers[1], seg, "10.1.1.2", 24)
    stub = lab.add_segment("NB", "2ms")
    lab.attach(routers[1], stub, "10.2.2.1", 24)
    lab.start()
    for r in routers:
        rip.enable(lab.net, r)
    lab.run_until(95 * SECOND)
    adverts = [
        o for o in lab.engine.history
        if o.kind == "frame_sent" and o.detail.get("rip_sender") == "10.1.1.1"
    ]
    for o in adverts:
        prefixes = [e[0] for e in o.detail["rip_entries"]]
        assert "10.2.2.0" not in prefixes


def test_route_timeout_poisons_then_gc_deletes():
    lab, routers, transits, _ = rip_line(2)
    lab.run_until(60 * SECOND)
    r1 = routers[0]
    assert best_metric(r1, "10.2.2.0") == 2
    # silence the neighbor: break the transit at t=60s
    lab.net.break_link(transits[0].id)
    # poisoned once 180s pass without refresh (last heard ~60s)
    lab.run_until(245 * SECOND)
    route = r1.routes.get(parse_ip("10.2.2.0"), 24, "rip")
    assert route is not None and route.metric == 16
    poison_time = next(
        o.at for o in lab.engine.history
        if o.kind == "route_changed" and o.detail["node"] == "R1"
        and o.detail["prefix"] == "10.2.2.0" and o.detail["metric"] == 16
    )
    # deleted once the gc deadline passes
    lab.run_until(poison_time + 121 * SECOND)
    assert r1.routes.get(parse_ip("10.2.2.0"), 24, "rip") is None
    deletes = [
        o for o in lab.engine.history
        if o.kind == "route_changed" and o.detail["node"] == "R1"
        and o.detail["prefix"] == "10.2.2.0" and o.detail["change"] == "delete"
    ]
    assert deletes and deletes[0].at - poison_time == 120 * SECOND


def test_refreshed_route_survives():
    lab, routers, transits, _ = rip_line(2)
    lab.run_until(300 * SECOND)  # periodic updates keep refreshing
    assert best_metric(routers[0], "10.2.2.0") == 2


def test_two_node_count_to_infinity_suppressed_by_poisoned_reverse():
    lab, routers, transits, _ = rip_line(3)
    lab.run_until(90 * SECOND)
    lab.net.break_link(transits[1].id)  # R2-R3 transit dies
    lab.run_until(500 * SECOND)
    # the stub behind R3 must go straight to 16 at R1/R2: the alternating
    # climb (metrics 4..15) never appears in the trace
    climbs = [
        o for o in lab.engine.history
        if o.kind == "route_changed"
        and o.detail["prefix"] == "10.2.3.0"
        and o.detail["node"] in ("R1", "R2")
        and 4 <= o.detail["metric"] <= 15
    ]
    assert climbs == []
    assert best_metric(routers[0], "10.2.3.0") in (None, 16)


def test_count_to_infinity_bounded_without_split_horizon():
    lab = Lab(seed=0)
    lab.configs.rip.split_horizon = "off"
    routers = [lab.add_node("router", f"R{i+1}") for i in range(3)]
    for k in range(2):
        seg = lab.add_segment(f"T{k+1}", "2ms")
        lab.attach(routers[k], seg, f"10.1.{k+1}.1", 24)
        lab.attach(routers[k + 1], seg, f"10.1.{k+1}.2", 24)
    stub = lab.add_segment("NB", "2ms")
    lab.attach(routers[2], stub, "10.2.3.1", 24)
    lab.start()
    for r in routers:
        rip.enable(lab.net, r)
    lab.run_until(90 * SECOND)
    break_at = lab.engine.now
    lab.net.set_power(routers[2].id, "off")
    deadline = break_at + 180 * SECOND + 3 * 30 * SECOND
    lab.run_until(600 * SECOND)
    # no metric ever exceeds 16
    for o in lab.engine.history:
        if o.kind == "route_changed":
            assert o.detail["metric"] <= 16
    # by the bound, every route for the lost stub is 16 or gone
    for r in routers[:2]:
        changes = [
            o for o in lab.engine.history
            if o.kind == "route_changed" and o.detail["node"] == r.name
            and o.detail["prefix"] == "10.2.3.0" and o.at <= deadline
        ]
        assert changes, f"{r.name} never updated the lost route"
        assert changes[-1].detail["metric"] == 16 or changes[-1].detail["change"] == "delete"


def test_convergence_oracle_on_random_topologies():
    rng = random.Random(1234)
    for case in range(6):
        n_routers = rng.randint(2, 8)
        lab = Lab(seed=case)
        routers = [lab.add_node("router", f"R{i}") for i in range(n_routers)]
        adjacency = {r.name: set() for r in routers}
        attachments = {}
        seg_no = 0
        # random spanning tree of transit segments, then a few extras
        edges = [(rng.randrange(i), i) for i in range(1, n_routers)]
        for _ in range(rng.randint(0, 2)):
            a, b = rng.sample(range(n_routers), 2) if n_routers >= 2 else (0, 0)
            if a != b and (a, b) not in edges and (b, a) not in edges:
                edges.append((a, b))
        for a, b in edges:
            seg_no += 1
            seg = lab.add_segment(f"T{seg_no}", "2ms")
            lab.attach(routers[a], seg, f"10.1.{seg_no}.1", 24)
            lab.attach(routers[b], seg, f"10.1.{seg_no}.2", 24)
            adjacency[routers[a].name].add(routers[b].name)
            adjacency[routers[b].name].add(routers[a].name)
            attachments[f"10.1.{seg_no}.0"] = [routers[a].name, routers[b].name]
        # stub networks, up to the 12-network budget
        for i in range(min(rng.randint(0, 4), 12 - len(attachments))):
            seg_no += 1
            owner = rng.randrange(n_routers)
            seg = lab.add_segment(f"N{seg_no}", "2ms")
            lab.attach(routers[owner], seg, f"10.2.{seg_no}.1", 24)
            attachments[f"10.2.{seg_no}.0"] = [routers[owner].name]
        lab.start()
        for r in routers:
            rip.enable(lab.net, r)
        lab.run_until(3 * 30 * SECOND)
        oracle = bfs_network_distances(adjacency, attachments, [r.name for r in routers])
        name_to_node = {r.name: r for r in routers}
        for (rname, net_name), d in oracle.items():
            got = best_metric(name_to_node[rname], f"{net_name}")
            assert got == 1 + d, (
                f"case {case}: {rname} -> {net_name}: metric {got}, oracle {1 + d}"
            )
        # next hops lie on a shortest path
        for r in routers:
            for route in r.routes.rip_routes():
                net_name = format_ip(route.prefix)
                if net_name not in attachments:
                    continue
                nh_iface = None
                for iface in lab.net.interfaces.values():
                    if iface.ip == route.next_hop:
                        nh_iface = iface
                nh_router = lab.net.nodes[nh_iface.owner].name
                assert oracle[(nh_router, net_name)] == oracle[(r.name, net_name)] - 1


def test_route_changed_sequence_deterministic():
    def run():
        lab, routers, transits, _ = rip_line(3, seed=77)
        lab.run_until(120 * SECOND)
        return [
            (o.at, o.seq, tuple(sorted(o.detail.items())))
            for o in lab.engine.history
            if o.kind == "route_changed"
        ]

    assert run() == run()


def test_hosts_ignore_rip_updates():
    lab = Lab(seed=0)
    r1 = lab.add_node("router", "R1")
    h1 = lab.add_node("host", "H1")
    seg = lab.add_segment("T1", "2ms")
    lab.attach(r1, seg, "10.1.1.1", 24)
    lab.attach(h1, seg, "10.1.1.2", 24)
    stub = lab.add_segment("NB", "2ms")
    lab.attach(r1, stub, "10.2.1.1", 24)
    lab.start()
    rip.enable(lab.net, r1)
    lab.run_until(95 * SECOND)
    assert h1.routes.rip_routes() == []


def test_rip_enable_on_host_rejected():
    lab = Lab(seed=0)
    h1 = lab.add_node("host", "H1")
    from netlab.errors import OutOfRange

    with pytest.raises(OutOfRange):
        rip.enable(lab.net, h1)

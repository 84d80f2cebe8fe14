#!/usr/bin/env python3
"""Measure distance-vector convergence time on random router topologies.

For each random connected topology, the convergence time is the timestamp of
the last route_changed record when the run is long enough that the tables
have gone quiet. Reported against the graph diameter.
"""

import argparse
import random
from collections import deque

from netlab import rip
from netlab.engine import SECOND
from netlab.lab import Lab


def random_router_graph(rng, n):
    lab = Lab(seed=rng.randrange(2**31))
    routers = [lab.add_node("router", f"R{i}") for i in range(n)]
    adjacency = {i: set() for i in range(n)}
    edges = [(rng.randrange(i), i) for i in range(1, n)]
    for _ in range(rng.randint(0, n // 2)):
        a, b = rng.sample(range(n), 2)
        if (a, b) not in edges and (b, a) not in edges:
            edges.append((a, b))
    for k, (a, b) in enumerate(edges, start=1):
        seg = lab.add_segment(f"T{k}", "2ms")
        lab.attach(routers[a], seg, f"10.1.{k}.1", 24)
        lab.attach(routers[b], seg, f"10.1.{k}.2", 24)
        adjacency[a].add(b)
        adjacency[b].add(a)
    lab.start()
    for r in routers:
        rip.enable(lab.net, r)
    return lab, adjacency


def diameter(adjacency):
    best = 0
    for s in adjacency:
        dist = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        best = max(best, max(dist.values()))
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cases", type=int, default=40)
    parser.add_argument("--max-routers", type=int, default=8)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    rng = random.Random(args.seed)
    print(f"{'case':>4} {'routers':>7} {'diameter':>8} {'converged_at':>12}")
    by_diameter = {}
    for case in range(args.cases):
        n = rng.randint(2, args.max_routers)
        lab, adjacency = random_router_graph(rng, n)
        lab.run_until(120 * SECOND)
        changes = [o.at for o in lab.engine.history if o.kind == "route_changed"]
        converged = max(changes) if changes else 0
        d = diameter(adjacency)
        by_diameter.setdefault(d, []).append(converged)
        print(f"{case:>4} {n:>7} {d:>8} {converged / 1e6:>11.3f}s")
    print("\nmean convergence time by diameter:")
    for d in sorted(by_diameter):
        times = by_diameter[d]
        print(f"  diameter {d}: {sum(times) / len(times) / 1e6:.3f}s over {len(times)} runs")


if __name__ == "__main__":
    main()

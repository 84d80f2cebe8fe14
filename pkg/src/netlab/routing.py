"""Per-node forwarding table with longest-prefix-match lookup.

Route preference at equal prefix length is lowest metric, then source order
connected < static < rip.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Optional

SOURCE_ORDER = {"connected": 0, "static": 1, "rip": 2}


def parse_ip(text: str) -> int:
    return int(ipaddress.IPv4Address(text))


def format_ip(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


def prefix_mask(prefix_len: int) -> int:
    if prefix_len == 0:
        return 0
    return (0xFFFFFFFF << (32 - prefix_len)) & 0xFFFFFFFF


def in_subnet(ip: int, prefix: int, prefix_len: int) -> bool:
    return (ip & prefix_mask(prefix_len)) == prefix


@dataclass
class Route:
    prefix: int
    prefix_len: int
    next_hop: Optional[int]  # None = directly connected delivery
    out_iface: int
    metric: int
    source: str  # connected | static | rip
    installed_at: int = 0
    # distance-vector bookkeeping, unused for connected/static routes
    learned_if: Optional[int] = None
    last_heard: int = 0
    gc_deadline: Optional[int] = None

    def key(self) -> tuple[int, int, str]:
        return (self.prefix, self.prefix_len, self.source)


class RoutingTable:
    """At most one entry per (prefix, prefix_len, source)."""

    def __init__(self):
        self.entries: list[Route] = []

    def install(self, route: Route) -> None:
        self.remove(route.prefix, route.prefix_len, route.source)
        self.entries.append(route)

    def remove(self, prefix: int, prefix_len: int, source: str) -> Optional[Route]:
        for i, r in enumerate(self.entries):
            if r.key() == (prefix, prefix_len, source):
                return self.entries.pop(i)
        return None

    def get(self, prefix: int, prefix_len: int, source: str) -> Optional[Route]:
        for r in self.entries:
            if r.key() == (prefix, prefix_len, source):
                return r
        return None

    def lookup(self, dst_ip: int) -> Optional[Route]:
        best: Optional[Route] = None
        for r in self.entries:
            if not in_subnet(dst_ip, r.prefix, r.prefix_len):
                continue
            if best is None or _pref(r) < _pref(best):
                best = r
        return best

    def best_per_prefix(self) -> list[Route]:
        """The preferred route for each distinct prefix, sorted for stable adverts."""
        chosen: dict[tuple[int, int], Route] = {}
        for r in self.entries:
            key = (r.prefix, r.prefix_len)
            cur = chosen.get(key)
            if cur is None or (r.metric, SOURCE_ORDER[r.source]) < (cur.metric, SOURCE_ORDER[cur.source]):
                chosen[key] = r
        return [chosen[k] for k in sorted(chosen)]

    def rip_routes(self) -> list[Route]:
        return [r for r in self.entries if r.source == "rip"]


def _pref(r: Route) -> tuple[int, int, int]:
    return (-r.prefix_len, r.metric, SOURCE_ORDER[r.source])

"""netlab: a deterministic discrete-event lab for network protocols.

Simulates ARP/RARP, IP with ICMP (ping, traceroute), RIP distance-vector
routing and a simplified X.25 stack over user-built topologies, with live
fault injection, plus step-traced classic data-structure algorithms.
"""

__version__ = "0.1.0"

"""Deterministic discrete-event core: virtual clock, ordered queue, seeded RNG.

Time is counted in integer ticks, 1 tick = 1 microsecond of virtual time.
Events dispatch in (fire_at, seq) order where seq is insertion order, so a
run is a pure function of the scenario and the seed.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import OutOfRange, PastTime, ZeroBound

US = 1
MS = 1_000
SECOND = 1_000_000

_TIME_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(us|ms|s|m)?\s*$")
_TIME_UNITS = {None: US, "us": US, "ms": MS, "s": SECOND, "m": 60 * SECOND}

OBS_KINDS = frozenset(
    {
        "frame_sent",
        "frame_delivered",
        "frame_corrupted",
        "frame_dropped",
        "route_changed",
        "cache_changed",
        "icmp_emitted",
        "state_transition",
        "algo_step",
        "fault_applied",
    }
)


def parse_ticks(value) -> int:
    """Parse a tick count from an int or a suffixed string like '120s', '5ms'.

    Bare numbers are ticks (microseconds).
    """
    if isinstance(value, bool):
        raise OutOfRange(f"not a time value: {value!r}")
    if isinstance(value, int):
        if value < 0:
            raise OutOfRange(f"negative time: {value}")
        return value
    if isinstance(value, str):
        m = _TIME_RE.match(value)
        if not m:
            raise OutOfRange(f"unparseable time: {value!r}")
        qty, unit = m.group(1), m.group(2)
        ticks = float(qty) * _TIME_UNITS[unit]
        if ticks != int(ticks):
            raise OutOfRange(f"sub-tick time: {value!r}")
        return int(ticks)
    raise OutOfRange(f"not a time value: {value!r}")


def format_ticks(ticks: int) -> str:
    if ticks % SECOND == 0:
        return f"{ticks // SECOND}s"
    if ticks % MS == 0:
        return f"{ticks // MS}ms"
    return f"{ticks}us"


_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Xorshift64Star:
    """xorshift64* generator, fully specified so any port reproduces it.

    State update (64-bit wrapping):
        x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
    Output: (x * 0x2545F4914F6CDD1D) mod 2^64.
    The initial state is splitmix64(seed), substituting the splitmix64
    increment constant when that comes out zero (xorshift state must be
    nonzero).
    """

    def __init__(self, seed: int = 0):
        self.seed = seed & _MASK64
        self.state = _splitmix64(self.seed) or 0x9E3779B97F4A7C15

    def next64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def draw(self, bound: int) -> int:
        """Uniform integer in [0, bound), by rejection to avoid modulo bias."""
        if bound < 1:
            raise ZeroBound(f"bound must be >= 1, got {bound}")
        limit = (1 << 64) - ((1 << 64) % bound)
        v = self.next64()
        while v >= limit:
            v = self.next64()
        return v % bound


@dataclass(frozen=True)
class Event:
    fire_at: int
    seq: int
    target: str
    payload: object


@dataclass(frozen=True)
class Observation:
    at: int
    seq: int
    kind: str
    detail: dict


class Engine:
    """One independent simulation instance; all calls serialized by the owner."""

    def __init__(self, seed: int = 0):
        self.now = 0
        self.rng = Xorshift64Star(seed)
        self.dispatch_count = 0
        self.history: list[Observation] = []
        self._history_base = 0  # seq of history[0] after trimming
        self._queue: list[tuple[int, int, Event]] = []
        self._event_seq = 0
        self._obs_seq = 0
        self._handlers: dict[str, Callable[[Event], None]] = {}

    # -- wiring ------------------------------------------------------------

    def register(self, target: str, handler: Callable[[Event], None]) -> None:
        self._handlers[target] = handler

    def unregister(self, target: str) -> None:
        self._handlers.pop(target, None)

    # -- scheduling --------------------------------------------------------

    def schedule(self, at: int, target: str, payload: object) -> int:
        if at < self.now:
            raise PastTime(f"fire_at {at} < now {self.now}")
        ev = Event(fire_at=at, seq=self._event_seq, target=target, payload=payload)
        self._event_seq += 1
        heapq.heappush(self._queue, (ev.fire_at, ev.seq, ev))
        return ev.seq

    def schedule_in(self, delay: int, target: str, payload: object) -> int:
        return self.schedule(self.now + delay, target, payload)

    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    # -- observation sink ----------------------------------------------------

    def observe(self, kind: str, **detail) -> Observation:
        if kind not in OBS_KINDS:
            raise OutOfRange(f"unknown observation kind: {kind}")
        obs = Observation(at=self.now, seq=self._obs_seq, kind=kind, detail=detail)
        self._obs_seq += 1
        self.history.append(obs)
        return obs

    def obs_since(self, seq: int) -> list[Observation]:
        """Observations with seq >= seq still held in history."""
        if seq < self._history_base:
            seq = self._history_base
        return self.history[seq - self._history_base :]

    def oldest_obs_seq(self) -> int:
        return self._history_base

    def trim_history(self, keep_last: int) -> None:
        excess = len(self.history) - keep_last
        if excess > 0:
            del self.history[:excess]
            self._history_base += excess

    # -- execution -----------------------------------------------------------

    def step(self) -> Optional[tuple[int, list[Observation]]]:
        """Dispatch the earliest event; None when the queue is exhausted."""
        if not self._queue:
            return None
        _, _, ev = heapq.heappop(self._queue)
        self.now = ev.fire_at
        self.dispatch_count += 1
        mark = len(self.history)
        handler = self._handlers.get(ev.target)
        if handler is None:
            self.observe("frame_dropped", reason="unknown_target", target=ev.target)
        else:
            handler(ev)
        return self.now, self.history[mark:]

    def run_until(self, t: int) -> list[Observation]:
        """Dispatch every event with fire_at <= t, then park the clock at t."""
        if t < self.now:
            raise PastTime(f"run_until {t} < now {self.now}")
        mark = len(self.history)
        while self._queue and self._queue[0][0] <= t:
            self.step()
        self.now = t
        return self.history[mark:]

    def run_to_exhaustion(self, max_events: int = 10_000_000) -> list[Observation]:
        mark = len(self.history)
        for _ in range(max_events):
            if self.step() is None:
                return self.history[mark:]
        raise OutOfRange(f"exceeded {max_events} events without exhausting the queue")

    def rng_draw(self, bound: int) -> int:
        return self.rng.draw(bound)

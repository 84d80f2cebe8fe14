#!/usr/bin/env python3
"""Transfer time and retransmission overhead of the LAPB link vs noise level.

Sends a fixed payload burst over a point-to-point segment at increasing
corruption probabilities and reports virtual completion time plus how many
I-frames the wire actually carried per delivered payload.
"""

import argparse

from netlab import x25
from netlab.engine import SECOND
from netlab.lab import Lab


def transfer(noise: float, seed: int, count: int):
    lab = Lab(seed=seed)
    lab.configs.lapb.n2 = 30
    a = lab.add_node("host", "A")
    b = lab.add_node("host", "B")
    seg = lab.add_segment("L", "5ms")
    ia = lab.attach(a, seg, "10.0.0.1", 24)
    lab.attach(b, seg, "10.0.0.2", 24)
    lab.start()
    x25.connect(lab.net, a, ia)
    lab.run_until(SECOND)
    lab.net.set_noise(seg.id, noise)
    for i in range(count):
        x25.send_payload(lab.net, a, ia, i)
    ep = a.lapb[ia.id]
    while lab.engine.step() is not None:
        if ep.state != "connected":
            return None, None
        if not ep.buffer and not ep.send_queue:
            break
    i_frames = sum(
        1 for o in lab.engine.history
        if o.kind == "frame_sent" and o.detail.get("lapb_kind") == "I"
        and o.detail["node"] == "A"
    )
    return lab.engine.now / 1e6, i_frames / count


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--seeds", type=int, default=3)
    args = parser.parse_args()
    print(f"{'noise':>6} {'seed':>4} {'done_at':>9} {'I-frames/payload':>17}")
    for noise in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
        for seed in range(1, args.seeds + 1):
            done, overhead = transfer(noise, seed, args.count)
            if done is None:
                print(f"{noise:>6.1f} {seed:>4} {'reset':>9}")
            else:
                print(f"{noise:>6.1f} {seed:>4} {done:>8.1f}s {overhead:>17.2f}")


if __name__ == "__main__":
    main()

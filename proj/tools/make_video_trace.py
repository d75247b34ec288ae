#!/usr/bin/env python3
"""Writes a synthetic MPEG-4-like frame trace: `interval_ms payload_bytes` per line.

GOP of 12 frames (I B B P B B P B B P B B) with lognormal size noise, scaled
so the mean payload and the mean bit rate hit the requested values exactly.
"""
import argparse
import random


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=3000)
    ap.add_argument("--rate-kbps", type=float, default=174.0)
    ap.add_argument("--mean-bytes", type=int, default=821)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("out")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    weights = {"I": 5.0, "P": 1.6, "B": 0.6}
    gop = "IBBPBBPBBPBB"
    raw = [weights[gop[i % len(gop)]] * rng.lognormvariate(0.0, 0.35) for i in range(args.frames)]
    scale = args.mean_bytes * args.frames / sum(raw)
    sizes = [max(40, round(x * scale)) for x in raw]
    # Absorb rounding so the total is exact.
    diff = args.mean_bytes * args.frames - sum(sizes)
    i = 0
    while diff != 0:
        step = 1 if diff > 0 else -1
        if sizes[i] + step >= 40:
            sizes[i] += step
            diff -= step
        i = (i + 1) % len(sizes)

    interval_ms = args.mean_bytes * 8.0 / args.rate_kbps
    with open(args.out, "w") as f:
        f.write(f"# synthetic video, {args.rate_kbps:g} kb/s, {args.mean_bytes} B mean payload\n")
        for s in sizes:
            f.write(f"{interval_ms:.6f} {s}\n")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Train a short-reach and a long-reach model on the context task and report blob accuracy.

    python scripts/context_separation.py --steps 5000
"""
import argparse
import time

from pdn.experiments import ContextRun, ContextTask, binomial_band, run_context
from pdn.network import NetworkConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--lr", type=float, default=2e-2)
    ap.add_argument("--channels", type=int, default=8)
    ap.add_argument("--variant", default="standard", choices=["paper", "standard"])
    ap.add_argument("--distance", type=int, default=6)
    args = ap.parse_args()

    task = ContextTask(distance=args.distance)
    D = args.channels
    runs = {
        "short": ContextRun(NetworkConfig(17, 17, 3, D, 1, 2, args.variant, [(D, 3)]),
                            args.steps, args.lr, args.lr),
        "long": ContextRun(NetworkConfig(17, 17, 3, D, 2, 3, args.variant, [(D, 3)]),
                           args.steps, args.lr, args.lr),
    }
    lo, hi = binomial_band(task.n_test, 0.5)
    print(f"chance band (99%, n={task.n_test}): [{lo:.2f}, {hi:.2f}]")
    for name, run in runs.items():
        t0 = time.perf_counter()
        res = run_context(run, task)
        tail = sum(res.losses[-200:]) / min(200, len(res.losses))
        print(f"{name}: radius={res.radius} blob_accuracy={res.accuracy:.3f} "
              f"final_loss={tail:.4f} seconds={time.perf_counter() - t0:.0f}")


if __name__ == "__main__":
    main()

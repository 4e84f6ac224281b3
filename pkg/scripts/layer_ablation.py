#!/usr/bin/env python3
"""Per-layer and merged accuracy of networks with different numbers of diffusion layers on the local task."""
import argparse

from pdn.cli import evaluate_dataset
from pdn.network import NetworkConfig
from pdn.synthetic import generate
from pdn.trainer import OptimState, init_params, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--max-layers", type=int, default=4)
    ap.add_argument("--size", type=int, default=12)
    args = ap.parse_args()

    train_set = generate("local", 100, 0, args.size, 3)
    test_set = generate("local", 20, 10_000, args.size, 3)
    for T in range(1, args.max_layers + 1):
        cfg = NetworkConfig(args.size, args.size, 3, 8, 2, T, "standard", [(8, 3)])
        params = init_params(cfg)
        train(params, OptimState(lr=2e-2, lr_backbone=2e-2), train_set, args.steps, variant=cfg.variant)
        merged, layers = evaluate_dataset(cfg, params, test_set)
        print(f"T={T}")
        for t, rep in enumerate(layers, start=1):
            print("  " + rep.format(f"layer={t} "))
        print("  " + merged.format("merged "))


if __name__ == "__main__":
    main()

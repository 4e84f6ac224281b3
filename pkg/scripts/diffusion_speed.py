#!/usr/bin/env python3
"""Measured influence radius per layer for several ring counts E, with the 8-neighbour scheme as E=1."""
import argparse

from pdn.analyzer import compare_schemes, layers_to_reach, theoretical_radius
from pdn.network import NetworkConfig
from pdn.trainer import init_params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=21)
    ap.add_argument("--layers", type=int, default=4)
    ap.add_argument("--target", type=int, default=4, help="radius whose first layer is reported")
    args = ap.parse_args()

    entries = []
    for E in (0, 1, 2, 3):
        cfg = NetworkConfig(args.size, args.size, 3, 2, E, args.layers, backbone=[(2, 3)], seed=E)
        label = "lg_lstm_8" if E == 1 else f"pdn(E={E})"
        entries.append((label, cfg, init_params(cfg)))
    reports = compare_schemes(entries, args.layers)
    for r in reports:
        print(r.format())
    print()
    for label, _, _ in entries:
        print(f"{label}: layers to radius {args.target} = {layers_to_reach(reports, label, args.target)}")
    print(f"diagonal_bilstm (theory): radius after t layers = t, e.g. "
          f"{theoretical_radius('diagonal_bilstm', args.layers)} at t={args.layers}")


if __name__ == "__main__":
    main()

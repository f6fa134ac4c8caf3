"""BEV coverage of the reference target window as past/future frames are added.

Prints the mean valid-cell fraction over seeded scenes for every
(past, future) combination, the synthetic stand-in for how much more of the
road a multi-frame model gets to see.
"""

import argparse

import numpy as np

from lanegraphkit.bev_warp import BevGrid
from lanegraphkit.pipeline import coverage_counts
from lanegraphkit.synthetic import generate_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--max-past", type=int, default=3)
    ap.add_argument("--max-future", type=int, default=3)
    ap.add_argument("--dt", type=float, default=2.0, help="seconds between frames")
    args = ap.parse_args()

    grid = BevGrid()
    cells = grid.target_shape[0] * grid.target_shape[1]
    frames = args.max_past + args.max_future + 1
    ref = args.max_past
    table = np.zeros((args.max_past + 1, args.max_future + 1))
    for seed in range(args.seeds):
        scene = generate_scene(seed, frames=frames, dt=args.dt)
        for p in range(args.max_past + 1):
            for f in range(args.max_future + 1):
                _, union = coverage_counts(scene, range(ref - p, ref + f + 1), ref, grid)
                table[p, f] += union / cells
    table /= args.seeds

    print(f"mean covered fraction of the {grid.target_shape[0]}x{grid.target_shape[1]} target, {args.seeds} scenes, dt={args.dt}s")
    print("past\\future " + " ".join(f"{f:>7d}" for f in range(args.max_future + 1)))
    for p in range(args.max_past + 1):
        print(f"{p:>11d} " + " ".join(f"{table[p, f]:7.3f}" for f in range(args.max_future + 1)))


if __name__ == "__main__":
    main()

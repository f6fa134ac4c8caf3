"""Single-frame versus 3-frame merged lane graphs under increasing noise.

For each control-point sigma, reports the fraction of seeds where merging
does at least as well as the reference frame alone, and mean scores.
"""

import argparse

import numpy as np

from lanegraphkit.pipeline import merge_trial
from lanegraphkit.synthetic import Layout, NoiseParams, generate_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--layout", default="straight", choices=[l.value for l in Layout])
    ap.add_argument("--lanes", type=int, default=2)
    ap.add_argument("--sigmas", default="0,0.1,0.25,0.5,1.0", help="comma separated control point sigmas, m")
    ap.add_argument("--fragment", type=float, default=0.0, help="fragmentation probability")
    ap.add_argument("--fp-rate", type=float, default=0.0, help="false positives per frame")
    args = ap.parse_args()

    print(f"{'sigma':>6} {'merge>=single':>14} {'single mean_f':>14} {'merged mean_f':>14} {'merged detect_f':>16} {'merged connect_f':>17}")
    for sigma in [float(s) for s in args.sigmas.split(",")]:
        noise = NoiseParams(control_point_sigma=sigma, fragment_probability=args.fragment, false_positive_rate=args.fp_rate)
        single, merged, det, con, wins = [], [], [], [], 0
        for seed in range(args.seeds):
            scene = generate_scene(seed, args.layout, args.lanes, frames=3)
            t = merge_trial(scene, [0, 1, 2], 1, noise, seed=seed)
            single.append(t.single_report.mean_f)
            merged.append(t.merged_report.mean_f)
            det.append(t.merged_report.detect_f)
            con.append(t.merged_report.connect_f)
            wins += t.merged_report.mean_f >= t.single_report.mean_f
        print(
            f"{sigma:6.2f} {wins:>9d}/{args.seeds:<4d} {np.mean(single):14.3f} {np.mean(merged):14.3f}"
            f" {np.mean(det):16.3f} {np.mean(con):17.3f}"
        )


if __name__ == "__main__":
    main()

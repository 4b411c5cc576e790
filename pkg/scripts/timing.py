"""Time full filter runs with and without pruning as the sensor count grows.

Usage: python3 scripts/timing.py [--horizon N]
"""
import argparse
import time

import numpy as np

from minplus_filter import PruneConfig, scenario_from_dict, new_filter, run, simulate


def scenario(M, horizon):
    rng = np.random.default_rng(M)
    return scenario_from_dict({
        "system": {"A_f": 0.7, "B_f": 0.4, "B_wf": -0.7, "disturbance_sigma": 0.2},
        "sensors": [{"C": float(c), "noise_sigma": 0.02} for c in rng.uniform(0.5, 3.0, M)],
        "weights": {"L": 5.0, "H": 3.0},
        "horizon": horizon,
        "x0_true": [1.0],
        "u": np.where(np.arange(horizon) % 2 == 0, 3.0, -3.0)[:, None].tolist(),
    })


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=int, default=5)
    args = parser.parse_args()
    print(f"{'M':>3} {'mode':>6} {'seconds':>9} {'final terms':>12}")
    for M in (1, 2, 3, 5):
        sc = scenario(M, args.horizon)
        trace = simulate(sc)
        for mode in ("exact", "off"):
            if mode == "off" and M ** args.horizon > 20000:
                continue
            t0 = time.perf_counter()
            reports = run(new_filter(sc.system, sc.sensors, sc.L, sc.x0_assumed, PruneConfig(mode)), trace)
            print(f"{M:>3} {mode:>6} {time.perf_counter() - t0:>9.3f} {reports[-1].term_count_post_prune:>12}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Re-derive the calibrated scenario intercepts and print them as a Python
dict, ready to paste into the frozen registry if the generator ever changes.
"""
import argparse
import sys

from ipwvar import (
    DEFAULT_DERIVATION_SEED,
    SCENARIO_GAMMAS,
    SCENARIO_LABELS,
    ScenarioSpec,
    calibrate_gamma0,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=DEFAULT_DERIVATION_SEED)
    parser.add_argument("--target-rate", type=float, default=0.6)
    args = parser.parse_args()

    print("_CALIBRATED_GAMMA0 = {")
    for label in SCENARIO_LABELS:
        gx, gy = SCENARIO_GAMMAS[label]
        spec = ScenarioSpec(label=label, gamma_x=gx, gamma_y=gy)
        g0 = calibrate_gamma0(spec, target_rate=args.target_rate, seed=args.seed)
        print(f'    "{label}": {g0!r},')
    print("}")
    print(f"# derivation seed {args.seed}, target rate {args.target_rate}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

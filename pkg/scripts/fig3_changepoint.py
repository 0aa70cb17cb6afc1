"""FFWE on an AR(2) stream whose phi1 flips sign at t=10000.

Prints the mean phi1 at t=12000 per forgetting factor and the size of the
phi2 excursion just after the change.
"""

import numpy as np

from run_variants import parser, run

CHANGE = 10000


def main():
    args = parser(__doc__, "results/fig3").parse_args()
    runs = run("fig3.json", args.R, args.seed, args.out_dir)
    print(f"{'variant':<10}{'phi1@12000':>12}{'max phi2 (10000,10400)':>26}")
    for label, s in runs.items():
        win = (s.times > CHANGE) & (s.times < CHANGE + 400)
        print(f"{label:<10}{s.at('phi1', 12000):12.3f}{np.max(s.mean('phi2')[win]):26.3f}")


if __name__ == "__main__":
    main()

"""Adaptive forgetting factor around the AR(2) change-point, for three r_lambda."""

from run_variants import parser, run

CHANGE = 10000


def main():
    args = parser(__doc__, "results/fig5").parse_args()
    runs = run("fig5.json", args.R, args.seed, args.out_dir)
    print(f"{'variant':<11}{'[9800,10000)':>14}{'[10000,10200)':>15}{'[15000,20000]':>15}")
    for label, s in runs.items():
        pre = s.window_mean("lambda", CHANGE - 200, CHANGE)
        post = s.window_mean("lambda", CHANGE, CHANGE + 200)
        late = s.window_mean("lambda", 15000, 20001)
        print(f"{label:<11}{pre:14.4f}{post:15.4f}{late:15.4f}")


if __name__ == "__main__":
    main()

"""Ocean-model FFWE on a simulated drifter: a complex AR(1) whose inertial
frequency follows the Coriolis parameter as latitude drifts from 15 to 35 deg.

Reports the mean absolute omega error over the second half of the stream.
"""

from run_variants import parser, run


def main():
    args = parser(__doc__, "results/drifter").parse_args()
    runs = run("drifter.json", args.R, args.seed, args.out_dir)
    for label, s in runs.items():
        mae = s.scalar_table()["mae"]
        print(f"{label:<10} omega MAE {mae['mean']:.5f} +- {mae['std']:.5f} (n={mae['n']})")


if __name__ == "__main__":
    main()

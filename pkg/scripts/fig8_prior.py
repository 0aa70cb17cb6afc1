"""Long-run adaptive factor with and without a Beta(alpha, 1) prior."""

from run_variants import parser, run


def main():
    args = parser(__doc__, "results/fig8").parse_args()
    runs = run("fig8.json", args.R, args.seed, args.out_dir)
    for label, s in runs.items():
        print(f"{label:<10} mean lambda over [15000, 20000]: {s.window_mean('lambda', 15000, 20001):.5f}")


if __name__ == "__main__":
    main()

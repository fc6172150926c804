"""Training- and projection-time sweeps on seeded mock Poisson data.

Writes one CSV and one SVG per sweep. Fit sweeps vary dimensionality at
5000 samples and sample count at D=1000; projection sweeps do the same for
500 test points in batches of 5 and in one go.

    python scripts/run_benchmarks.py [--out results] [--repetitions 10] [--quick]
"""

import argparse
from pathlib import Path

from aumap.bench import BenchCondition, bench_fit, bench_project

SWEEPS = {
    "dimensionality": (100, 500, 1000, 5000),
    "sample_count": (100, 500, 1000, 5000),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--repetitions", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quick", action="store_true", help="small values for a smoke run")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    test_samples = 50 if args.quick else 500
    runs = [("fit", bench_fit, 5), ("project_batch", bench_project, 5),
            ("project_one_go", bench_project, test_samples)]
    for vary, values in SWEEPS.items():
        fixed = None
        if args.quick:
            values, fixed = (10, 50), 200
        for label, runner, batch in runs:
            cond = BenchCondition(vary, values, fixed_value=fixed, test_samples=test_samples,
                                  batch_size=batch, repetitions=args.repetitions, seed=args.seed)
            report = runner(cond)
            stem = args.out / f"{label}_{vary}"
            stem.with_suffix(".csv").write_text(report.to_csv())
            stem.with_suffix(".svg").write_text(report.to_svg())
            for r in report.rows:
                print(f"{label:15s} {vary}={r.value:<5d} {r.mean_s * 1e3:9.2f} ms +/- {r.std_s * 1e3:.2f}")


if __name__ == "__main__":
    main()

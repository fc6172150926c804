"""Accuracy table and comparison plots from the committed fixtures.

For each fixture, fit the projector on the training embedding, project the
test inputs and compare with UMAP's own test projections.

    python scripts/reproduce_accuracy.py [--fixtures fixtures] [--out results]
"""

import argparse
from pathlib import Path

from aumap import ProjectorConfig, fit
from aumap.accuracy import emit_scatter_svg, normalized_mean_distance
from aumap.dataio import load_fixture

REPORTED = {"iris": 0.256, "digits": 0.083, "breast_cancer": 0.126}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--fixtures", type=Path, default=Path("fixtures"))
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--k", type=int, help="override the k stored in each manifest")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = ["dataset,k,n_test,mean_distance,variance,reported_mean"]
    for name, reported in REPORTED.items():
        fx = load_fixture(args.fixtures / name)
        k = args.k or fx.manifest.knn_k
        approx = fit(fx.train, ProjectorConfig(k=k)).project_batch(fx.test.samples)
        r = normalized_mean_distance(approx, fx.test_oracle)
        rows.append(f"{name},{k},{r.n_points},{r.mean_distance:.4f},{r.variance:.4f},{reported}")
        print(f"{name:14s} k={k:<3d} mean={r.mean_distance:.3f} var={r.variance:.4f} (reported {reported})")
        emit_scatter_svg(fx.train, fx.test_oracle, approx, args.out / f"{name}.svg",
                         test_labels=fx.test.labels, title=name)
    (args.out / "accuracy.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()

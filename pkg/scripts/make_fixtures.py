"""Regenerate the committed accuracy fixtures under fixtures/.

Requires the ``fixtures`` extra (umap-learn, scikit-learn). For each dataset
the script writes the full labeled dataset, an 80/20 stratified split, the
UMAP embedding of the training part and UMAP's own transform of the test
part (the oracle), plus a manifest recording every parameter.

    python scripts/make_fixtures.py [--out fixtures]
"""

import argparse
import warnings
from pathlib import Path

import numpy as np
import sklearn
import umap
from sklearn import datasets
from sklearn.model_selection import train_test_split

from aumap.dataio import (
    FIXTURE_FILES,
    FixtureManifest,
    LabeledDataset,
    ReferenceEmbedding,
    save_dataset,
    save_embedding,
    save_projections,
)

SPLIT_SEED = 42
UMAP_SEED = 0
TEST_FRACTION = 0.2

# Non-default UMAP settings per dataset. umap-learn rejects min_dist > spread,
# so the Iris run raises spread along with min_dist.
DATASETS = {
    "iris": (datasets.load_iris, {"min_dist": 5.0, "spread": 5.0}),
    "digits": (datasets.load_digits, {"min_dist": 1.0}),
    "breast_cancer": (datasets.load_breast_cancer, {"n_neighbors": 200, "min_dist": 1.0}),
}


def make(name, loader, overrides, out: Path, k: int):
    X, y = loader(return_X_y=True)
    X = X.astype(np.float64)
    X_tr, X_te, y_tr, y_te = train_test_split(
        X, y, test_size=TEST_FRACTION, stratify=y, random_state=SPLIT_SEED
    )
    params = {"n_neighbors": 15, "min_dist": 0.1, "n_components": 2, "metric": "euclidean"}
    params.update(overrides)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = umap.UMAP(random_state=UMAP_SEED, **params).fit(X_tr)
        oracle = model.transform(X_te)

    out.mkdir(parents=True, exist_ok=True)
    save_dataset(LabeledDataset(X, y), out / "full.csv")
    save_embedding(
        ReferenceEmbedding(X_tr, np.asarray(model.embedding_, dtype=np.float64), y_tr),
        out / FIXTURE_FILES["train_inputs"],
        out / FIXTURE_FILES["train_projections"],
    )
    save_dataset(LabeledDataset(X_te, y_te), out / FIXTURE_FILES["test_inputs"])
    save_projections(np.asarray(oracle, dtype=np.float64), out / FIXTURE_FILES["test_projections"])
    FixtureManifest(
        dataset=name,
        n_total=int(X.shape[0]),
        n_train=int(X_tr.shape[0]),
        n_test=int(X_te.shape[0]),
        dim=int(X.shape[1]),
        out_dim=2,
        class_count=int(np.unique(y).size),
        split_seed=SPLIT_SEED,
        test_fraction=TEST_FRACTION,
        umap_params={**params, "random_state": UMAP_SEED},
        knn_k=k,
        tool_versions={
            "umap-learn": umap.__version__,
            "scikit-learn": sklearn.__version__,
            "numpy": np.__version__,
        },
    ).write(out / "manifest.json")
    print(f"{name}: {X_tr.shape[0]} train / {X_te.shape[0]} test, D={X.shape[1]}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "fixtures")
    parser.add_argument("--k", type=int, default=15, help="neighbors used when projecting (recorded only)")
    parser.add_argument("--only", choices=sorted(DATASETS), action="append")
    args = parser.parse_args()
    for name in args.only or DATASETS:
        loader, overrides = DATASETS[name]
        make(name, loader, overrides, args.out / name, args.k)


if __name__ == "__main__":
    main()

import json
from pathlib import Path

import numpy as np
import pytest

from nodefuse import build_graph

DATA_ROOT = Path(__file__).resolve().parent.parent / "data"


def random_graph(rng, n=20, f=12, p_edge=0.2, n_classes=3, labeled=True):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p_edge]
    feats = rng.normal(size=(n, f))
    labels = rng.integers(0, n_classes, size=n) if labeled else None
    return build_graph(n, edges, feats, labels, n_classes=n_classes)


def write_dataset(d: Path, n_nodes, edges, features, labels=None,
                  n_classes=0, name="toy"):
    d.mkdir(parents=True, exist_ok=True)
    features = np.asarray(features)
    meta = {"name": name, "n_nodes": n_nodes,
            "n_features": features.shape[1], "n_classes": n_classes}
    (d / "meta.json").write_text(json.dumps(meta))
    (d / "edges.tsv").write_text("".join(f"{i}\t{j}\n" for i, j in edges))
    (d / "features.csv").write_text(
        "".join(",".join(str(v) for v in row) + "\n" for row in features))
    if labels is not None:
        (d / "labels.txt").write_text("".join(f"{int(y)}\n" for y in labels))
    return d


def dataset_dir(name: str) -> Path | None:
    """Benchmark dataset in canonical layout, or None if not provided."""
    d = DATA_ROOT / name
    return d if (d / "meta.json").is_file() else None


def require_dataset(name: str) -> Path:
    d = dataset_dir(name)
    if d is None:
        pytest.skip(f"benchmark dataset {name!r} not present under {DATA_ROOT} "
                    "(see README for the canonical on-disk format)")
    return d

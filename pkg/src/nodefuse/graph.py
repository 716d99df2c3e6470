"""Graph container, dataset directory I/O, normalization, splits, analysis.

Canonical dataset directory layout:
    meta.json     {"name": str, "n_nodes": int, "n_features": int, "n_classes": int}
    edges.tsv     one undirected edge per line, two 0-based indices
    features.csv  n_nodes lines of comma-separated reals
    labels.txt    optional, n_nodes lines of 0-based class ids
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, FormatError, LoadError, SplitError
from .tensor import Tensor


@dataclass(frozen=True)
class Graph:
    """Immutable node/edge/feature/label container.

    Edges are stored once per undirected pair with i < j and no self-loops.
    """

    n_nodes: int
    edges: np.ndarray            # (m, 2) int, i < j
    features: np.ndarray         # (n_nodes, F) float
    labels: np.ndarray | None    # (n_nodes,) int, or None
    degree: np.ndarray           # (n_nodes,) int
    n_classes: int | None = None
    name: str = ""
    n_dropped_lines: int = 0     # duplicate / reversed / self-loop lines at load

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int


def build_graph(n_nodes: int, edge_list, features, labels=None,
                n_classes=None, name: str = "") -> Graph:
    """Canonicalize raw edges (dedup, drop self-loops) and validate ranges."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != n_nodes:
        raise FormatError(
            f"features must be {n_nodes} rows, got shape {features.shape}"
        )
    dropped = 0
    seen: set[tuple[int, int]] = set()
    canon = []
    for i, j in edge_list:
        i, j = int(i), int(j)
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise FormatError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
        if i == j:
            dropped += 1
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
        canon.append(key)
    edges = np.array(sorted(canon), dtype=np.int64).reshape(-1, 2)
    degree = np.zeros(n_nodes, dtype=np.int64)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n_nodes,):
            raise FormatError(f"labels must have length {n_nodes}, got {labels.shape}")
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if n_nodes else 0
        if labels.min(initial=0) < 0 or (n_nodes and labels.max() >= n_classes):
            raise FormatError("labels outside [0, n_classes)")
    return Graph(n_nodes=n_nodes, edges=edges, features=features, labels=labels,
                 degree=degree, n_classes=n_classes, name=name,
                 n_dropped_lines=dropped)


def load_graph(dataset_dir) -> Graph:
    d = Path(dataset_dir)
    meta_path = d / "meta.json"
    edges_path = d / "edges.tsv"
    feat_path = d / "features.csv"
    for p in (meta_path, edges_path, feat_path):
        if not p.is_file():
            raise LoadError(f"missing required file: {p}")
    meta = json.loads(meta_path.read_text())
    n = int(meta["n_nodes"])

    edge_list = []
    with edges_path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"bad edge line in {edges_path}: {line!r}")
            edge_list.append((int(parts[0]), int(parts[1])))

    features = np.loadtxt(feat_path, delimiter=",", dtype=np.float64, ndmin=2)
    if features.shape[0] != n:
        raise FormatError(
            f"features.csv has {features.shape[0]} rows, expected {n}"
        )
    if features.shape[1] != int(meta["n_features"]):
        raise FormatError(
            f"features.csv has {features.shape[1]} columns, "
            f"meta.json says {meta['n_features']}"
        )

    labels = None
    labels_path = d / "labels.txt"
    if labels_path.is_file():
        labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        if labels.shape[0] != n:
            raise FormatError(f"labels.txt has {labels.shape[0]} lines, expected {n}")

    return build_graph(n, edge_list, features, labels=labels,
                       n_classes=int(meta["n_classes"]),
                       name=str(meta.get("name", d.name)))


def write_graph(g: Graph, dataset_dir):
    d = Path(dataset_dir)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"name": g.name, "n_nodes": g.n_nodes,
            "n_features": g.n_features, "n_classes": g.n_classes or 0}
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    with (d / "edges.tsv").open("w") as fh:
        for i, j in g.edges:
            fh.write(f"{i}\t{j}\n")
    with (d / "features.csv").open("w") as fh:
        for row in g.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if g.labels is not None:
        with (d / "labels.txt").open("w") as fh:
            for y in g.labels:
                fh.write(f"{int(y)}\n")


def adjacency_sparse(g: Graph) -> sp.csr_matrix:
    """Symmetric binary adjacency (no self-loops)."""
    if g.n_edges == 0:
        return sp.csr_matrix((g.n_nodes, g.n_nodes), dtype=np.float64)
    rows = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    cols = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    vals = np.ones(len(rows), dtype=np.float64)
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.n_nodes, g.n_nodes))


def normalized_adjacency_sparse(g: Graph, add_self_loops: bool = True) -> sp.csr_matrix:
    """D^{-1/2} (A [+ I]) D^{-1/2} with degrees taken after the self-loops."""
    a = adjacency_sparse(g)
    if add_self_loops:
        a = a + sp.identity(g.n_nodes, dtype=np.float64, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    d_inv = sp.diags(inv_sqrt)
    return (d_inv @ a @ d_inv).tocsr()


def normalized_adjacency(g: Graph, add_self_loops: bool = True) -> Tensor:
    return Tensor(normalized_adjacency_sparse(g, add_self_loops).toarray())


def _largest_remainder_sizes(n: int, ratio) -> list[int]:
    raw = [r * n for r in ratio]
    sizes = [int(np.floor(x)) for x in raw]
    short = n - sum(sizes)
    order = np.argsort([-(x - np.floor(x)) for x in raw], kind="stable")
    for k in range(short):
        sizes[order[k]] += 1
    return sizes


def make_splits(g: Graph, ratio, n_splits: int, seed: int) -> list[Split]:
    """Independent shuffled splits; every class must appear in train."""
    if g.labels is None:
        raise ContractError("make_splits requires a labeled graph")
    if any(r < 0 for r in ratio) or abs(sum(ratio) - 1.0) > 1e-9:
        raise ContractError(f"split ratio must be nonnegative and sum to 1, got {ratio}")
    n = g.n_nodes
    n_train, n_val, n_test = _largest_remainder_sizes(n, ratio)
    classes = np.unique(g.labels)
    splits = []
    rng = np.random.default_rng(seed)
    for _ in range(n_splits):
        for _attempt in range(100):
            perm = rng.permutation(n)
            train = perm[:n_train]
            if len(np.unique(g.labels[train])) == len(classes):
                break
        else:
            raise SplitError(
                f"could not cover all {len(classes)} classes in a train set "
                f"of size {n_train} after 100 attempts"
            )
        splits.append(Split(train=np.sort(train),
                            val=np.sort(perm[n_train:n_train + n_val]),
                            test=np.sort(perm[n_train + n_val:]),
                            seed=seed))
    return splits


def neighborhood_similarity(g: Graph):
    """Cosine similarity of each node's features to its neighborhood mean.

    Returns (similarity, isolated) where isolated nodes get similarity 0.
    """
    n = g.n_nodes
    sims = np.zeros(n, dtype=np.float64)
    isolated = g.degree == 0
    if g.n_edges:
        a = adjacency_sparse(g)
        sums = a @ g.features
        for i in range(n):
            if isolated[i]:
                continue
            mean = sums[i] / g.degree[i]
            nx = np.linalg.norm(g.features[i])
            nm = np.linalg.norm(mean)
            if nx < 1e-12 or nm < 1e-12:
                sims[i] = 0.0
            else:
                sims[i] = float(g.features[i] @ mean / (nx * nm))
    return sims, isolated

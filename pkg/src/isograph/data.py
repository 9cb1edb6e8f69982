"""Dataset ingestion, splitting, balancing, synthetic generation, metrics.

Graphs are undirected, unweighted and unlabeled beyond a binary class:
each instance is a symmetric, binary, zero-diagonal adjacency matrix plus
a label in {+1, -1}.  Two on-disk formats are supported: the public
benchmark text layout (edge list + graph indicator + graph labels) and a
line-delimited JSON format for locally generated data.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .linalg import permute_conjugate


@dataclass
class GraphInstance:
    """One graph: adjacency matrix and binary label.

    Construction validates the adjacency invariants (square, symmetric,
    entries in {0, 1}, zero diagonal) so every downstream consumer can rely
    on them.
    """

    adjacency: np.ndarray
    label: int

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if not np.all((a == 0.0) | (a == 1.0)):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0.0):
            raise ValueError("adjacency diagonal must be zero")
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")
        self.adjacency = a

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]


@dataclass
class Dataset:
    graphs: list[GraphInstance]
    padded_size: int | None = None  # uniform adjacency size once padded

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    @property
    def max_nodes(self) -> int:
        return max(g.node_count for g in self.graphs) if self.graphs else 0

    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=int)


@dataclass
class FoldSplit:
    assignments: np.ndarray  # fold id per graph
    n_folds: int = 3

    def rounds(self):
        """Yield (train_indices, test_indices) with each fold tested once."""
        for fold in range(self.n_folds):
            test = np.flatnonzero(self.assignments == fold)
            train = np.flatnonzero(self.assignments != fold)
            yield train, test


def _map_labels(raw_labels: list[int]) -> list[int]:
    distinct = set(raw_labels)
    if distinct <= {1, -1}:
        return [int(v) for v in raw_labels]
    if distinct <= {0, 1}:
        return [1 if v == 1 else -1 for v in raw_labels]
    raise DataFormatError(f"graph labels must come from {{1,-1}} or {{1,0}}, found {sorted(distinct)}")


def load_tu_dataset(directory) -> Dataset:
    """Load a benchmark-collection dataset directory (DS_A.txt and friends).

    The prefix is discovered from the ``*_A.txt`` file.  Edge endpoints are
    1-indexed global node ids; each graph gets local 0-based ids in global
    order and its edges symmetrized.
    """
    directory = Path(directory)
    candidates = sorted(directory.glob("*_A.txt"))
    if not candidates:
        raise FileNotFoundError(f"no *_A.txt edge file found in {directory}")
    prefix = candidates[0].name[: -len("_A.txt")]
    edge_path = directory / f"{prefix}_A.txt"
    indicator_path = directory / f"{prefix}_graph_indicator.txt"
    labels_path = directory / f"{prefix}_graph_labels.txt"
    for p in (indicator_path, labels_path):
        if not p.exists():
            raise FileNotFoundError(f"missing dataset file: {p}")

    indicator = []
    with indicator_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                indicator.append(int(line))
            except ValueError:
                raise DataFormatError(f"{indicator_path.name}:{lineno}: not an integer: {line!r}")
    if not indicator:
        raise DataFormatError(f"{indicator_path.name}: no node records")

    raw_labels = []
    with labels_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw_labels.append(int(float(line)))
            except ValueError:
                raise DataFormatError(f"{labels_path.name}:{lineno}: not a number: {line!r}")
    labels = _map_labels(raw_labels)

    n_graphs = len(labels)
    if max(indicator) > n_graphs or min(indicator) < 1:
        raise DataFormatError(
            f"{indicator_path.name}: graph ids span {min(indicator)}..{max(indicator)}, "
            f"but {labels_path.name} lists {n_graphs} graphs"
        )
    # Local index of each global node within its graph.
    sizes = np.zeros(n_graphs, dtype=int)
    local = np.empty(len(indicator), dtype=int)
    graph_of = np.empty(len(indicator), dtype=int)
    for node, gid in enumerate(indicator):
        graph_of[node] = gid - 1
        local[node] = sizes[gid - 1]
        sizes[gid - 1] += 1
    if np.any(sizes == 0):
        empty = int(np.flatnonzero(sizes == 0)[0]) + 1
        raise DataFormatError(f"{indicator_path.name}: graph {empty} has no nodes")

    mats = [np.zeros((int(s), int(s))) for s in sizes]
    n_nodes = len(indicator)
    with edge_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError(f"{edge_path.name}:{lineno}: expected 'i, j', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataFormatError(f"{edge_path.name}:{lineno}: non-integer endpoint: {line!r}")
            if not (1 <= i <= n_nodes and 1 <= j <= n_nodes):
                raise DataFormatError(
                    f"{edge_path.name}:{lineno}: node id out of range 1..{n_nodes}: {line!r}"
                )
            if i == j:
                raise DataFormatError(f"{edge_path.name}:{lineno}: self-loop on node {i}")
            gi, gj = graph_of[i - 1], graph_of[j - 1]
            if gi != gj:
                raise DataFormatError(
                    f"{edge_path.name}:{lineno}: edge joins graphs {gi + 1} and {gj + 1}"
                )
            mats[gi][local[i - 1], local[j - 1]] = 1.0
            mats[gi][local[j - 1], local[i - 1]] = 1.0

    graphs = [GraphInstance(m, lab) for m, lab in zip(mats, labels)]
    return Dataset(graphs)


def pad_to_max(dataset: Dataset) -> Dataset:
    """Zero-pad every adjacency bottom/right to the dataset's largest size."""
    size = dataset.max_nodes
    padded = []
    for g in dataset.graphs:
        n = g.node_count
        if n == size:
            padded.append(GraphInstance(g.adjacency.copy(), g.label))
            continue
        a = np.zeros((size, size))
        a[:n, :n] = g.adjacency
        padded.append(GraphInstance(a, g.label))
    return Dataset(padded, padded_size=size)


def load_native(path) -> Dataset:
    """Line-delimited JSON records: {"label": +-1, "adj": [[...], ...]}."""
    path = Path(path)
    graphs = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})")
            if not isinstance(rec, dict) or "label" not in rec or "adj" not in rec:
                raise DataFormatError(f"{path.name}:{lineno}: record needs 'label' and 'adj'")
            try:
                graphs.append(GraphInstance(np.asarray(rec["adj"], dtype=float), rec["label"]))
            except (ValueError, TypeError) as exc:
                raise DataFormatError(f"{path.name}:{lineno}: {exc}")
    return Dataset(graphs)


def save_native(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for g in dataset.graphs:
            rec = {"label": int(g.label), "adj": g.adjacency.astype(int).tolist()}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def make_folds(dataset: Dataset, seed: int, n_folds: int = 3) -> FoldSplit:
    """Label-stratified fold assignment; fold sizes differ by at most one."""
    if len(dataset) < n_folds:
        raise ValueError(f"dataset of {len(dataset)} graphs cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(dataset), dtype=int)
    cursor = 0
    for label in (1, -1):
        idx = [i for i, g in enumerate(dataset.graphs) if g.label == label]
        rng.shuffle(idx)
        for i in idx:
            assignments[i] = cursor % n_folds
            cursor += 1
    return FoldSplit(assignments, n_folds)


def balance(dataset: Dataset, strategy: str = "undersample", seed: int = 0) -> Dataset:
    """Equalize class counts by undersampling the majority (default) or
    oversampling the minority with replacement."""
    if strategy not in ("undersample", "oversample"):
        raise ValueError(f"strategy must be 'undersample' or 'oversample', got {strategy!r}")
    pos = [i for i, g in enumerate(dataset.graphs) if g.label == 1]
    neg = [i for i, g in enumerate(dataset.graphs) if g.label == -1]
    if not pos or not neg:
        raise ValueError("balance requires both classes to be present")
    rng = np.random.default_rng(seed)
    major, minor = (pos, neg) if len(pos) >= len(neg) else (neg, pos)
    if strategy == "undersample":
        keep = sorted(minor + list(rng.choice(major, size=len(minor), replace=False)))
        graphs = [dataset.graphs[i] for i in keep]
    else:
        extra = list(rng.choice(minor, size=len(major) - len(minor), replace=True))
        graphs = [dataset.graphs[i] for i in sorted(major + minor + extra)]
    return Dataset(graphs, padded_size=dataset.padded_size)


_MOTIF_RE = re.compile(r"^(clique|cycle|path)(\d+)$")


def motif_matrix(name: str) -> np.ndarray:
    """Named motif adjacency: clique<k>, cycle<k>, or path<k>."""
    m = _MOTIF_RE.match(name)
    if not m:
        raise ValueError(f"unknown motif {name!r}; expected clique<k>, cycle<k> or path<k>")
    kind, k = m.group(1), int(m.group(2))
    if k < 2:
        raise ValueError(f"motif needs at least 2 nodes, got {k}")
    a = np.zeros((k, k))
    if kind == "clique":
        a = np.ones((k, k)) - np.eye(k)
    elif kind == "cycle":
        for i in range(k):
            a[i, (i + 1) % k] = a[(i + 1) % k, i] = 1.0
    else:
        for i in range(k - 1):
            a[i, i + 1] = a[i + 1, i] = 1.0
    return a


def gen_synthetic(
    num_graphs: int,
    n: int,
    motif: np.ndarray,
    seed: int = 0,
    edge_prob: float = 0.1,
) -> Dataset:
    """Planted-motif dataset: labels are honest by construction.

    Every graph is a sparse random background; positive graphs additionally
    carry the motif, node-relabeled, written over a random principal block,
    so the motif occupies one contiguous window exactly.
    """
    motif = np.asarray(motif, dtype=float)
    k = motif.shape[0]
    if motif.ndim != 2 or motif.shape[0] != motif.shape[1]:
        raise ValueError(f"motif must be square, got {motif.shape}")
    if k > n:
        raise ValueError(f"motif of size {k} does not fit in graphs of size {n}")
    if not np.array_equal(motif, motif.T) or not np.all((motif == 0) | (motif == 1)):
        raise ValueError("motif must be a binary symmetric matrix")
    if np.any(np.diag(motif) != 0):
        raise ValueError("motif diagonal must be zero")
    rng = np.random.default_rng(seed)
    graphs = []
    for idx in range(num_graphs):
        label = 1 if idx % 2 == 0 else -1
        upper = rng.random((n, n)) < edge_prob
        a = np.triu(upper, 1).astype(float)
        a = a + a.T
        if label == 1:
            start = int(rng.integers(0, n - k + 1))
            relabel = tuple(rng.permutation(k))
            a[start : start + k, start : start + k] = permute_conjugate(relabel, motif)
        graphs.append(GraphInstance(a, label))
    return Dataset(graphs)


def metrics(predictions, labels) -> tuple[float, float]:
    """Accuracy and F1 of the positive class (F1 is 0 when undefined)."""
    predictions = np.asarray(predictions, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if predictions.size == 0 or predictions.shape != labels.shape:
        raise ValueError(
            f"predictions and labels must be equal-length and nonempty, "
            f"got {predictions.shape} and {labels.shape}"
        )
    accuracy = float((predictions == labels).mean())
    tp = int(((predictions == 1) & (labels == 1)).sum())
    fp = int(((predictions == 1) & (labels == -1)).sum())
    fn = int(((predictions == -1) & (labels == 1)).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, float(f1)

"""Undirected graphs in compressed sparse row form, plus label bookkeeping.

A `Graph` stores the adjacency structure of a simple undirected graph as
two int64 arrays (`indptr`, `indices`), the layout used by every kernel in
the package. Node labels travel separately in a `LabelSet`, which records
positive, negative, and unlabeled nodes explicitly so that estimators can
never silently read a label they were not given.
"""

import numpy as np

from ._backend import spmv

POSITIVE = 1
NEGATIVE = 0
UNLABELED = -1


class GraphError(ValueError):
    """Raised for structurally invalid graphs or label assignments."""


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge within its iteration budget.

    Carries the last estimate and iterate so callers can inspect how far
    the run got.
    """

    def __init__(self, message, estimate, iterate, iterations):
        super().__init__(message)
        self.estimate = estimate
        self.iterate = iterate
        self.iterations = iterations


class Graph:
    """Immutable undirected graph over nodes ``0 .. node_count - 1``.

    `indices[indptr[v]:indptr[v + 1]]` lists the neighbors of node ``v`` in
    ascending order. Construction validates that the structure is a genuine
    symmetric CSR matrix; use `build_graph` to get here from an edge list.
    """

    __slots__ = ("node_count", "indptr", "indices", "edge_count")

    def __init__(self, node_count, indptr, indices):
        node_count = int(node_count)
        if node_count <= 0:
            raise GraphError("node_count must be positive")
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        if indptr.ndim != 1 or indptr.shape[0] != node_count + 1:
            raise GraphError("indptr must have node_count + 1 entries")
        if indptr[0] != 0 or indptr[-1] != indices.shape[0]:
            raise GraphError("indptr does not span the index array")
        if np.any(np.diff(indptr) < 0):
            raise GraphError("indptr must be non-decreasing")
        if indices.size and (indices.min() < 0 or indices.max() >= node_count):
            raise GraphError("neighbor index out of range")

        rows = np.repeat(np.arange(node_count, dtype=np.int64), np.diff(indptr))
        if indices.size:
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (np.diff(indices) <= 0)):
                raise GraphError("neighbor lists must be strictly increasing")
            forward = rows * node_count + indices
            backward = indices * node_count + rows
            if not np.array_equal(np.sort(forward), np.sort(backward)):
                raise GraphError("adjacency is not symmetric")

        loops = int(np.count_nonzero(rows == indices))
        self.node_count = node_count
        self.indptr = indptr
        self.indices = indices
        self.edge_count = (indices.shape[0] - loops) // 2 + loops
        indptr.setflags(write=False)
        indices.setflags(write=False)

    def degrees(self):
        return np.diff(self.indptr)

    def degree(self, v):
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u, v):
        row = self.neighbors(u)
        pos = np.searchsorted(row, v)
        return pos < row.shape[0] and row[pos] == v

    def __repr__(self):
        return "Graph(nodes=%d, edges=%d)" % (self.node_count, self.edge_count)


def build_graph(edges, node_count, symmetrize=True):
    """Build a `Graph` from an iterable of ``(u, v)`` pairs.

    Duplicate edges collapse to one. With ``symmetrize=True`` (the default)
    each pair is mirrored; otherwise the input must already contain both
    directions of every edge.
    """
    node_count = int(node_count)
    if node_count <= 0:
        raise GraphError("node_count must be positive")
    pairs = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64)
    pairs = pairs.reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= node_count):
        bad = pairs[(pairs < 0).any(axis=1) | (pairs >= node_count).any(axis=1)][0]
        raise GraphError(
            "edge (%d, %d) references a node outside 0..%d"
            % (bad[0], bad[1], node_count - 1)
        )
    if symmetrize and pairs.size:
        pairs = np.vstack([pairs, pairs[:, ::-1]])
    pairs = np.unique(pairs, axis=0) if pairs.size else pairs
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    if pairs.size:
        counts = np.bincount(pairs[:, 0], minlength=node_count)
        indptr[1:] = np.cumsum(counts)
    return Graph(node_count, indptr, pairs[:, 1].copy() if pairs.size else
                 np.empty(0, dtype=np.int64))


def spectral_radius(g, tolerance=1e-10, max_iterations=10000):
    """Largest eigenvalue modulus of the adjacency matrix.

    Uses power iteration started from the all-ones vector. The adjacency
    matrix of an undirected graph is symmetric and non-negative, so the
    dominant eigenvalue is real and the norm-ratio estimate converges
    monotonically; iteration stops once the relative change stays below
    `tolerance` on two consecutive steps. A graph with no edges has radius
    zero by convention.
    """
    if g.indices.shape[0] == 0:
        return 0.0
    x = np.full(g.node_count, 1.0 / np.sqrt(g.node_count))
    previous = None
    stable = 0
    for iteration in range(1, max_iterations + 1):
        y = spmv(g.indptr, g.indices, x)
        estimate = float(np.linalg.norm(y))
        if estimate == 0.0:
            return 0.0
        x = y / estimate
        # Normalization roundoff can push an entry a hair past 1, which the
        # fixed-point kernel rejects.
        np.clip(x, -1.0, 1.0, out=x)
        if previous is not None and abs(estimate - previous) <= tolerance * estimate:
            stable += 1
            if stable >= 2:
                return estimate
        else:
            stable = 0
        previous = estimate
    raise PowerIterationError(
        "power iteration did not converge in %d iterations "
        "(last estimate %.17g)" % (max_iterations, estimate),
        estimate=estimate,
        iterate=x,
        iterations=max_iterations,
    )


def adjusted_homophily(g, labels):
    """Edge homophily rescaled so that 0 means chance-level label agreement.

    Only edges with both endpoints labeled contribute. The raw agreement
    fraction is shifted by the collision probability of the labeled class
    distribution and renormalized, giving a value in (-inf, 1] where
    positive means homophilous, negative heterophilous. Self loops are
    ignored.
    """
    values = labels.values
    rows = np.repeat(np.arange(g.node_count, dtype=np.int64), g.degrees())
    upper = rows < g.indices
    lu = values[rows[upper]]
    lv = values[g.indices[upper]]
    both = (lu != UNLABELED) & (lv != UNLABELED)
    if not np.any(both):
        raise GraphError("no edge has both endpoints labeled")
    agreement = float(np.mean(lu[both] == lv[both]))
    labeled = values[values != UNLABELED]
    p = float(np.mean(labeled == POSITIVE))
    collision = p * p + (1.0 - p) * (1.0 - p)
    if collision == 1.0:
        raise GraphError("adjusted homophily is undefined for single-class labels")
    return (agreement - collision) / (1.0 - collision)


def check_features(features, node_count):
    """Validate a node-feature matrix and return it as C-contiguous float64."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise GraphError("features must be a 2-D matrix")
    if x.shape[0] != int(node_count):
        raise GraphError(
            "feature matrix has %d rows for %d nodes" % (x.shape[0], node_count)
        )
    if not np.all(np.isfinite(x)):
        raise GraphError("features must be finite")
    return x


class LabelSet:
    """Node labels with explicit missingness.

    `values` is an int8 array over all nodes: 1 positive, 0 negative,
    -1 unlabeled. The array is read-only; derive modified views through
    `masked`.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values)
        if arr.ndim != 1:
            raise GraphError("labels must be a 1-D array")
        if arr.size == 0:
            raise GraphError("labels must cover at least one node")
        if not np.all(np.isin(arr, (POSITIVE, NEGATIVE, UNLABELED))):
            raise GraphError("labels must be 1 (positive), 0 (negative), or -1 (unlabeled)")
        out = arr.astype(np.int8)
        out.setflags(write=False)
        self.values = out

    @classmethod
    def from_binary(cls, y):
        """Wrap a fully observed 0/1 label vector."""
        arr = np.asarray(y)
        if arr.size and not np.all(np.isin(arr, (0, 1))):
            raise GraphError("binary labels must be 0 or 1")
        return cls(arr)

    def __len__(self):
        return self.values.shape[0]

    @property
    def labeled_indices(self):
        return np.flatnonzero(self.values != UNLABELED)

    @property
    def unlabeled_indices(self):
        return np.flatnonzero(self.values == UNLABELED)

    def labeled_count(self):
        return int(np.count_nonzero(self.values != UNLABELED))

    def prevalence(self):
        """Fraction of labeled nodes that are positive."""
        labeled = self.values[self.values != UNLABELED]
        if labeled.size == 0:
            raise GraphError("prevalence is undefined without labeled nodes")
        return float(np.mean(labeled == POSITIVE))

    def masked(self, keep_indices):
        """Labels restricted to `keep_indices`; everything else unlabeled."""
        keep = np.asarray(keep_indices, dtype=np.int64)
        if keep.size and (keep.min() < 0 or keep.max() >= len(self)):
            raise GraphError("keep_indices out of range")
        out = np.full(len(self), UNLABELED, dtype=np.int8)
        out[keep] = self.values[keep]
        return LabelSet(out)

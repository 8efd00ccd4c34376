"""Randomized reservoir embeddings for attributed graphs.

Nodes are embedded by iterating a fixed random state map: each step feeds
every node its input projection plus the transformed sum of its neighbors'
states through tanh. No training happens here; the recurrent matrix is
drawn once and rescaled to a configured spectral radius, and the readout
layer downstream does all the learning.

State updates run through `neighbor_sum`, which accumulates neighbor rows
on an int64 fixed-point grid. That makes embeddings exactly invariant to
node relabeling: permuting the graph and permuting the embedding rows are
the same operation, bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import neighbor_sum
from .graph import check_features
from .graph import PowerIterationError
from .seeding import derive_rng

# Largest double strictly below 1. States are clipped here so they stay
# inside the open interval (-1, 1) that the fixed-point grid assumes.
TANH_CEILING = float(np.nextafter(1.0, 0.0))


class ReservoirError(ValueError):
    """Raised for invalid reservoir configurations or inputs."""


@dataclass(frozen=True)
class ReservoirConfig:
    """Hyperparameters of the embedding map.

    `target_radius` is the spectral radius the recurrent matrix is scaled
    to. With `relative_radius=True` it is interpreted as a multiple of the
    reciprocal adjacency spectral radius, so a value below 1 guarantees the
    combined update is contractive and values above 1 deliberately push the
    map into the non-contractive regime.
    """

    embedding_dim: int
    target_radius: float
    input_scale: float = 1.0
    bias_scale: float = 0.0
    iterations: int = 10
    seed: int = 0
    relative_radius: bool = False

    def __post_init__(self):
        if int(self.embedding_dim) < 1:
            raise ReservoirError("embedding_dim must be at least 1")
        if not (self.target_radius > 0 and np.isfinite(self.target_radius)):
            raise ReservoirError("target_radius must be positive and finite")
        if not (self.input_scale > 0):
            raise ReservoirError("input_scale must be positive")
        if self.bias_scale < 0:
            raise ReservoirError("bias_scale must be non-negative")
        if int(self.iterations) < 1:
            raise ReservoirError("iterations must be at least 1")
        if int(self.seed) < 0:
            raise ReservoirError("seed must be non-negative")


@dataclass(frozen=True)
class ReservoirWeights:
    input_weights: np.ndarray
    recurrent_weights: np.ndarray
    bias: np.ndarray
    spectral_radius: float


@dataclass(frozen=True)
class NodeEmbeddings:
    matrix: np.ndarray
    iterations: int


def dense_spectral_radius(matrix, tolerance=1e-12, max_iterations=20000,
                          block_size=6):
    """Largest eigenvalue modulus of a square dense matrix.

    The recurrent matrix is not symmetric, so its dominant eigenvalues can
    be a complex conjugate pair and plain power iteration would stall.
    Block subspace iteration with a Rayleigh-Ritz estimate handles that:
    iterate a `block_size`-dimensional subspace, project the matrix onto
    it, and read the radius off the small projected problem.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ReservoirError("matrix must be square")
    if a.shape[0] == 0:
        raise ReservoirError("matrix must be non-empty")
    if not np.all(np.isfinite(a)):
        raise ReservoirError("matrix must be finite")
    if not a.any():
        return 0.0
    n = a.shape[0]
    block = min(block_size, n)
    # Deterministic full-rank start; QR makes it orthonormal.
    start = np.sin(np.arange(1, n * block + 1, dtype=np.float64)).reshape(n, block)
    q, _ = np.linalg.qr(start)
    previous = None
    stable = 0
    for iteration in range(1, max_iterations + 1):
        z = a @ q
        q, _ = np.linalg.qr(z)
        projected = q.T @ (a @ q)
        radius = float(np.max(np.abs(np.linalg.eigvals(projected))))
        if previous is not None and abs(radius - previous) <= tolerance * max(radius, 1e-300):
            stable += 1
            if stable >= 3:
                return radius
        else:
            stable = 0
        previous = radius
    raise PowerIterationError(
        "subspace iteration did not converge in %d iterations "
        "(last estimate %.17g)" % (max_iterations, radius),
        estimate=radius,
        iterate=q,
        iterations=max_iterations,
    )


def init_reservoir(config, input_dim, adjacency_radius=None, max_redraws=5):
    """Draw reservoir weights for `input_dim`-dimensional node features.

    Input weights and bias are uniform in `[-scale, scale]`. The recurrent
    matrix is uniform in [-1, 1] and rescaled so its spectral radius hits
    the configured target; a draw whose radius cannot be measured or is
    numerically zero is redrawn, up to `max_redraws` times.
    """
    input_dim = int(input_dim)
    if input_dim < 1:
        raise ReservoirError("input_dim must be at least 1")
    target = float(config.target_radius)
    if config.relative_radius:
        if adjacency_radius is None:
            raise ReservoirError(
                "relative_radius scaling requires the adjacency spectral radius"
            )
        if not (adjacency_radius > 0):
            raise ReservoirError(
                "adjacency spectral radius must be positive for relative scaling"
            )
        target = float(config.target_radius) / float(adjacency_radius)

    dim = int(config.embedding_dim)
    rng_input = derive_rng(config.seed, "reservoir", "input")
    rng_recurrent = derive_rng(config.seed, "reservoir", "recurrent")
    rng_bias = derive_rng(config.seed, "reservoir", "bias")
    input_weights = rng_input.uniform(-config.input_scale, config.input_scale,
                                      (dim, input_dim))
    bias = rng_bias.uniform(-config.bias_scale, config.bias_scale, dim)

    raw = None
    measured = 0.0
    for _ in range(max_redraws):
        candidate = rng_recurrent.uniform(-1.0, 1.0, (dim, dim))
        try:
            radius = dense_spectral_radius(candidate)
        except PowerIterationError:
            continue
        if radius > 1e-9:
            raw = candidate
            measured = radius
            break
    if raw is None:
        raise ReservoirError(
            "could not draw a recurrent matrix with measurable positive radius"
        )
    recurrent = raw * (target / measured)

    for array in (input_weights, recurrent, bias):
        array.setflags(write=False)
    return ReservoirWeights(
        input_weights=input_weights,
        recurrent_weights=recurrent,
        bias=bias,
        spectral_radius=target,
    )


def embed_nodes(g, features, weights, iterations):
    """Run the state map for `iterations` steps from the zero state.

    Returns embeddings for every node. Entries are strictly inside
    (-1, 1). The first step reduces to tanh of the input projection since
    the initial state is zero.
    """
    iterations = int(iterations)
    if iterations < 1:
        raise ReservoirError("iterations must be at least 1")
    x = check_features(features, g.node_count)
    if x.shape[1] != weights.input_weights.shape[1]:
        raise ReservoirError(
            "features have %d columns but the reservoir expects %d"
            % (x.shape[1], weights.input_weights.shape[1])
        )
    drive = x @ weights.input_weights.T
    drive += weights.bias
    state = np.zeros((g.node_count, weights.recurrent_weights.shape[0]))
    for _ in range(iterations):
        pooled = neighbor_sum(g.indptr, g.indices, state)
        z = pooled @ weights.recurrent_weights.T
        z += drive
        state = np.tanh(z, out=z)
        np.clip(state, -TANH_CEILING, TANH_CEILING, out=state)
    state.setflags(write=False)
    return NodeEmbeddings(matrix=state, iterations=iterations)


def embedding_drift(previous, current):
    """Largest per-node Euclidean change between two embedding matrices."""
    a = np.asarray(previous, dtype=np.float64)
    b = np.asarray(current, dtype=np.float64)
    if a.shape != b.shape:
        raise ReservoirError("embedding matrices must have the same shape")
    return float(np.sqrt(np.max(np.sum((b - a) ** 2, axis=1))))


def _bfs_depths(g, source):
    depth = np.full(g.node_count, -1, dtype=np.int64)
    depth[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        reached = np.concatenate(
            [g.indices[g.indptr[v]:g.indptr[v + 1]] for v in frontier]
        ) if frontier.size else np.empty(0, dtype=np.int64)
        reached = np.unique(reached)
        fresh = reached[depth[reached] < 0]
        depth[fresh] = level
        frontier = fresh
    return depth


def estimate_diameter(g):
    """Double-sweep lower bound on the diameter, maximized over components."""
    remaining = np.ones(g.node_count, dtype=bool)
    best = 0
    while remaining.any():
        source = int(np.flatnonzero(remaining)[0])
        depth = _bfs_depths(g, source)
        component = np.flatnonzero(depth >= 0)
        remaining[component] = False
        farthest = int(component[np.argmax(depth[component])])
        second = _bfs_depths(g, farthest)
        best = max(best, int(second[second >= 0].max()))
    return best


def default_iteration_count(g, configured_maximum):
    """Iterations needed to saturate message reach, capped by the config.

    State from one node influences another only after as many steps as the
    distance between them, so diameter plus a little slack saturates the
    map; running longer only matters for non-contractive dynamics.
    """
    configured_maximum = int(configured_maximum)
    if configured_maximum < 1:
        raise ReservoirError("configured_maximum must be at least 1")
    return min(configured_maximum, estimate_diameter(g) + 2)

"""Synthetic attributed graphs with planted class structure.

A two-block stochastic block model ties class labels to connectivity:
`p_in` controls within-class edges and `p_out` cross-class edges, so
`p_in > p_out` plants homophily and `p_in < p_out` heterophily. Node
features are isotropic Gaussians whose class means sit a configurable
distance apart, which bounds how well any feature-only classifier can do.
"""

import numpy as np

from .graph import build_graph
from .seeding import derive_rng


class SynthError(ValueError):
    pass


def block_sizes(node_count, positive_fraction):
    """Split `node_count` into negative and positive block sizes."""
    node_count = int(node_count)
    if node_count < 2:
        raise SynthError("node_count must be at least 2")
    if not (0.0 < positive_fraction < 1.0):
        raise SynthError("positive_fraction must lie strictly in (0, 1)")
    positive = min(node_count - 1, max(1, round(node_count * positive_fraction)))
    return node_count - positive, positive


def generate_sbm(negative_count, positive_count, p_in, p_out, feature_dim=8,
                 separation=2.0, noise=1.0, seed=0):
    """Draw a two-block model with Gaussian class-conditional features.

    Returns ``(graph, features, labels)`` where labels mark the planted
    blocks, negative first. Class means are `separation` apart in
    Euclidean distance and the per-coordinate noise is `noise`.
    """
    negative_count = int(negative_count)
    positive_count = int(positive_count)
    if negative_count < 1 or positive_count < 1:
        raise SynthError("both blocks need at least one node")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not (0.0 <= p <= 1.0):
            raise SynthError("%s must lie in [0, 1]" % name)
    feature_dim = int(feature_dim)
    if feature_dim < 1:
        raise SynthError("feature_dim must be at least 1")
    if not (noise > 0):
        raise SynthError("noise must be positive")
    if separation < 0:
        raise SynthError("separation must be non-negative")

    n = negative_count + positive_count
    labels = np.zeros(n, dtype=np.int8)
    labels[negative_count:] = 1

    rng_edges = derive_rng(seed, "sbm", "edges")
    rng_features = derive_rng(seed, "sbm", "features")

    upper_i, upper_j = np.triu_indices(n, k=1)
    same_block = labels[upper_i] == labels[upper_j]
    edge_probability = np.where(same_block, p_in, p_out)
    keep = rng_edges.random(upper_i.shape[0]) < edge_probability
    edges = np.stack([upper_i[keep], upper_j[keep]], axis=1)
    g = build_graph(edges, n)

    offset = separation / (2.0 * np.sqrt(feature_dim))
    means = np.where(labels[:, None] == 1, offset, -offset)
    features = means + noise * rng_features.standard_normal((n, feature_dim))
    return g, features, labels

"""Structural baselines: label the graph first, count afterwards.

These methods assign a hard label to every unlabeled node using only graph
structure and the labeled nodes, without features or a trained model. The
resulting label vector feeds the counting quantifiers downstream.

Ties and nodes with no labeled context fall back to the training label
distribution: ties go to the majority training class (negative when the
classes are balanced), uncovered nodes draw a label from the training
prevalence.
"""

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .graph import UNLABELED
from .seeding import derive_rng


class BaselineError(ValueError):
    """Raised for invalid baseline configurations or inputs."""


def _majority_label(training_prevalence):
    return 1 if training_prevalence > 0.5 else 0


def _vote(positive, negative, current, training_prevalence):
    # `current` is the node's present assignment, -1 when it has none.
    if positive > negative:
        return 1
    if negative > positive:
        return 0
    if current >= 0:
        return int(current)
    return _majority_label(training_prevalence)


def _segment_sum(g, per_entry):
    totals = np.zeros(g.node_count)
    if g.indices.size == 0:
        return totals
    starts = np.minimum(g.indptr[:-1], g.indices.size - 1)
    summed = np.add.reduceat(per_entry, starts)
    summed[g.indptr[1:] == g.indptr[:-1]] = 0.0
    return summed


@dataclass(frozen=True)
class WvrnConfig:
    """Settings for weighted-vote relational propagation.

    `base_init` controls what unlabeled nodes claim before the first round:
    "prior-draw" samples from the training prevalence, "none" leaves them
    silent until neighbor votes reach them, or pass an explicit array of
    initial assignments (-1 for none).
    """

    edge_weights: object = None
    max_rounds: int = 50
    base_init: object = "prior-draw"

    def __post_init__(self):
        if int(self.max_rounds) < 1:
            raise BaselineError("max_rounds must be at least 1")


def wvrn_propagate(g, labels, config=None, seed=0):
    """Propagate labels by repeated weighted neighbor votes.

    Labeled nodes are clamped. Each synchronous round every unlabeled node
    adopts the label with the larger weighted count among its currently
    assigned neighbors; an exact tie keeps the node's current assignment,
    and a node that has none yet takes the majority training class.
    Rounds stop at a fixed point or after `max_rounds`. Nodes still
    unassigned at the end (no labeled node in their component) draw from
    the training prevalence. Returns hard labels for all nodes.
    """
    cfg = config if config is not None else WvrnConfig()
    values = labels.values
    training_prevalence = labels.prevalence()

    state = np.full(g.node_count, -1, dtype=np.int64)
    labeled = values != UNLABELED
    state[labeled] = values[labeled]

    if isinstance(cfg.base_init, str):
        if cfg.base_init == "prior-draw":
            rng = derive_rng(seed, "wvrn", "init")
            for v in np.flatnonzero(~labeled):
                state[v] = 1 if rng.random() < training_prevalence else 0
        elif cfg.base_init != "none":
            raise BaselineError("base_init must be 'prior-draw', 'none', or an array")
    else:
        init = np.asarray(cfg.base_init)
        if init.shape != (g.node_count,) or not np.all(np.isin(init, (-1, 0, 1))):
            raise BaselineError("base_init array must hold -1, 0, or 1 per node")
        state[~labeled] = init[~labeled]

    if cfg.edge_weights is None:
        weights = np.ones(g.indices.shape[0])
    else:
        weights = np.asarray(cfg.edge_weights, dtype=np.float64)
        if weights.shape != g.indices.shape:
            raise BaselineError("edge_weights must align with the adjacency entries")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise BaselineError("edge_weights must be positive and finite")

    free = ~labeled
    for _ in range(int(cfg.max_rounds)):
        votes_pos = _segment_sum(g, weights * (state[g.indices] == 1))
        votes_neg = _segment_sum(g, weights * (state[g.indices] == 0))
        updated = state.copy()
        gain = free & (votes_pos > votes_neg)
        lose = free & (votes_neg > votes_pos)
        updated[gain] = 1
        updated[lose] = 0
        # Exact nonzero tie for a node with no assignment yet: majority class.
        fresh_tie = free & (state < 0) & (votes_pos == votes_neg) & (votes_pos > 0)
        updated[fresh_tie] = _majority_label(training_prevalence)
        if np.array_equal(updated, state):
            break
        state = updated

    leftovers = np.flatnonzero(state < 0)
    if leftovers.size:
        rng = derive_rng(seed, "wvrn", "fill")
        for v in leftovers:
            state[v] = 1 if rng.random() < training_prevalence else 0
    return state.astype(np.int8)


@dataclass(frozen=True)
class CommunityAssignment:
    """A community cover of the graph.

    `members` lists the nodes of each community, `memberships` the
    community ids of each node (more than one in overlapping covers), and
    `densities` the internal edge density of each community.
    """

    members: tuple
    memberships: tuple
    densities: np.ndarray

    @classmethod
    def from_members(cls, g, members):
        members = tuple(np.asarray(sorted(c), dtype=np.int64) for c in members)
        memberships = [[] for _ in range(g.node_count)]
        for ci, community in enumerate(members):
            for v in community:
                memberships[int(v)].append(ci)
        uncovered = [v for v, owned in enumerate(memberships) if not owned]
        if uncovered:
            raise BaselineError("node %d belongs to no community" % uncovered[0])
        densities = np.array([_internal_density(g, c) for c in members])
        return cls(members=members,
                   memberships=tuple(tuple(m) for m in memberships),
                   densities=densities)

    def community_count(self):
        return len(self.members)


def _internal_density(g, community):
    size = community.shape[0]
    if size < 2:
        return 0.0
    inside = np.zeros(g.node_count, dtype=bool)
    inside[community] = True
    internal = 0
    for v in community:
        row = g.neighbors(v)
        internal += int(np.count_nonzero(inside[row] & (row != v)))
    return (internal / 2) / (size * (size - 1) / 2)


def _to_networkx(g):
    nxg = nx.Graph()
    nxg.add_nodes_from(range(g.node_count))
    rows = np.repeat(np.arange(g.node_count, dtype=np.int64), g.degrees())
    upper = rows < g.indices
    nxg.add_edges_from(zip(rows[upper].tolist(), g.indices[upper].tolist()))
    return nxg


def discover_communities(g, overlapping=False, clique_size=3):
    """Community cover by greedy modularity, or clique percolation.

    The default returns a partition. With ``overlapping=True`` communities
    are unions of adjacent `clique_size`-cliques and may share nodes;
    nodes in no clique become singletons. Output order is canonical
    (sorted by smallest member), so the result is deterministic.
    """
    nxg = _to_networkx(g)
    if overlapping:
        if int(clique_size) < 2:
            raise BaselineError("clique_size must be at least 2")
        found = [sorted(c) for c in nx.community.k_clique_communities(nxg, int(clique_size))]
        covered = set()
        for community in found:
            covered.update(community)
        found.extend([v] for v in range(g.node_count) if v not in covered)
    else:
        found = [sorted(c) for c in nx.community.greedy_modularity_communities(nxg)]
    found.sort(key=lambda c: c[0])
    return CommunityAssignment.from_members(g, found)


def cdq_label(g, labels, communities=None, strategy="frequency", seed=0):
    """Label unlabeled nodes from the communities they belong to.

    "frequency" averages the positive fraction of labeled nodes across the
    node's communities that contain any labeled node; "density" consults
    only the densest such community and takes its labeled majority. Nodes
    whose communities hold no labeled node draw from the training
    prevalence. Returns hard labels for all nodes.
    """
    if strategy not in ("frequency", "density"):
        raise BaselineError("strategy must be 'frequency' or 'density'")
    if communities is None:
        communities = discover_communities(g)
    values = labels.values
    training_prevalence = labels.prevalence()

    count = communities.community_count()
    labeled_in = np.zeros(count, dtype=np.int64)
    positive_in = np.zeros(count, dtype=np.int64)
    for ci, community in enumerate(communities.members):
        community_labels = values[community]
        labeled_in[ci] = int(np.count_nonzero(community_labels != UNLABELED))
        positive_in[ci] = int(np.count_nonzero(community_labels == 1))

    rng = derive_rng(seed, "cdq", "draws")
    out = values.astype(np.int64)
    for v in labels.unlabeled_indices:
        eligible = [ci for ci in communities.memberships[v] if labeled_in[ci] > 0]
        if not eligible:
            out[v] = 1 if rng.random() < training_prevalence else 0
            continue
        if strategy == "frequency":
            positive_rate = float(np.mean(
                [positive_in[ci] / labeled_in[ci] for ci in eligible]
            ))
            out[v] = _vote(positive_rate, 1.0 - positive_rate, -1,
                           training_prevalence)
        else:
            best = max(eligible,
                       key=lambda ci: (communities.densities[ci], -ci))
            positives = int(positive_in[best])
            negatives = int(labeled_in[best] - positive_in[best])
            out[v] = _vote(positives, negatives, -1, training_prevalence)
    return out.astype(np.int8)


def _ball(g, source, radius):
    seen = {int(source)}
    frontier = [int(source)]
    for _ in range(radius):
        reached = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w not in seen:
                    seen.add(w)
                    reached.append(w)
        if not reached:
            break
        frontier = reached
    seen.discard(int(source))
    return np.fromiter(seen, dtype=np.int64, count=len(seen))


def enq_label(g, labels, radius=1, seed=0):
    """Label each unlabeled node by majority over its radius-r neighborhood.

    The neighborhood is every node within `radius` hops, the node itself
    excluded. Neighborhoods without labeled nodes draw from the training
    prevalence; exact ties take the majority training class. Returns hard
    labels for all nodes.
    """
    radius = int(radius)
    if radius < 1:
        raise BaselineError("radius must be at least 1")
    values = labels.values
    training_prevalence = labels.prevalence()
    rng = derive_rng(seed, "enq", "draws")
    out = values.astype(np.int64)
    for v in labels.unlabeled_indices:
        neighborhood = _ball(g, v, radius)
        nearby = values[neighborhood] if neighborhood.size else np.empty(0, np.int8)
        positives = int(np.count_nonzero(nearby == 1))
        negatives = int(np.count_nonzero(nearby == 0))
        if positives == 0 and negatives == 0:
            out[v] = 1 if rng.random() < training_prevalence else 0
        else:
            out[v] = _vote(positives, negatives, -1, training_prevalence)
    return out.astype(np.int8)

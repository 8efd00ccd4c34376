"""Method assembly: from a descriptor to prevalence estimates.

A `MethodDescriptor` names everything a method needs: either an embedding
plus classifier path feeding an aggregative quantifier, or a structural
baseline feeding a counting quantifier. `fit` freezes all trained state
for one labeled split, and the resulting `FittedMethod` turns node subsets
into prevalence estimates without ever touching their labels.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .baselines import (WvrnConfig, cdq_label, discover_communities,
                        enq_label, wvrn_propagate)
from .graph import check_features, spectral_radius
from .quantify import (PosteriorSample, ScoreDistributionPair, acc, cc,
                       distribution_match, estimate_rates, harden, pacc, pcc,
                       rates_from_predictions, sld)
from .readout import (CalibratedClassifier, fit_calibration, predict_raw,
                      train_readout)
from .reservoir import (ReservoirConfig, default_iteration_count, embed_nodes,
                        init_reservoir)
from .seeding import derive_rng, derive_seed

AGGREGATIVE_QUANTIFIERS = ("cc", "acc", "pcc", "pacc", "sld", "hdy", "dys")
BASELINE_KINDS = ("wvrn", "cdq", "enq")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    regularization: float = 1e-2
    rate_folds: int = 10

    def __post_init__(self):
        if self.regularization < 0:
            raise PipelineError("regularization must be non-negative")
        if int(self.rate_folds) < 2:
            raise PipelineError("rate_folds must be at least 2")


@dataclass(frozen=True)
class BaselineSpec:
    """Which structural labeler to run, and its knobs."""

    kind: str
    wvrn_max_rounds: int = 50
    cdq_strategy: str = "frequency"
    enq_radius: int = 1
    overlapping_communities: bool = False
    rate_folds: int = 5

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise PipelineError("baseline kind must be one of %s"
                                % (BASELINE_KINDS,))
        if int(self.wvrn_max_rounds) < 1:
            raise PipelineError("wvrn_max_rounds must be at least 1")
        if self.cdq_strategy not in ("frequency", "density"):
            raise PipelineError("cdq_strategy must be frequency or density")
        if int(self.enq_radius) < 1:
            raise PipelineError("enq_radius must be at least 1")
        if int(self.rate_folds) < 2:
            raise PipelineError("rate_folds must be at least 2")


@dataclass(frozen=True)
class MethodDescriptor:
    """Complete recipe for one quantification method.

    Exactly one of the two paths must be configured: `embedder` (a
    `ReservoirConfig`, or "passthrough" to feed raw features to the
    readout) for the aggregative quantifiers, or `baseline` for the
    structural ones. Baselines only support the counting quantifiers
    because they produce hard labels, not posteriors.
    """

    quantifier: str
    embedder: object = None
    classifier: ClassifierConfig = None
    baseline: BaselineSpec = None
    sld_tolerance: float = 1e-6
    sld_max_iterations: int = 1000
    bin_count: int = 10
    bin_counts: tuple = None
    alpha_step: float = 0.01

    def __post_init__(self):
        if self.quantifier not in AGGREGATIVE_QUANTIFIERS:
            raise PipelineError("unknown quantifier %r" % (self.quantifier,))
        has_embedder = self.embedder is not None
        has_baseline = self.baseline is not None
        if has_embedder == has_baseline:
            raise PipelineError(
                "configure exactly one of embedder or baseline"
            )
        if has_baseline:
            if self.quantifier not in ("cc", "acc"):
                raise PipelineError(
                    "baselines produce hard labels and support only the "
                    "counting quantifiers cc and acc"
                )
            if self.classifier is not None:
                raise PipelineError("baselines take no classifier config")
        else:
            if self.embedder != "passthrough" and not isinstance(
                    self.embedder, ReservoirConfig):
                raise PipelineError(
                    "embedder must be a ReservoirConfig or 'passthrough'"
                )
            if self.classifier is None:
                object.__setattr__(self, "classifier", ClassifierConfig())
        if self.bin_counts is not None:
            object.__setattr__(self, "bin_counts",
                               tuple(int(b) for b in self.bin_counts))


class FittedMethod:
    """Frozen state of one method on one labeled split."""

    def __init__(self, descriptor, train_indices, training_prevalence,
                 classifier=None, embeddings=None, rates=None,
                 score_pair=None, hard_labels=None):
        self.descriptor = descriptor
        train = np.sort(np.asarray(train_indices, dtype=np.int64))
        train.setflags(write=False)
        self.train_indices = train
        self.training_prevalence = float(training_prevalence)
        self.classifier = classifier
        self.embeddings = embeddings
        self.rates = rates
        self.score_pair = score_pair
        self.hard_labels = hard_labels

    def quantify(self, subset):
        """Prevalence estimate for an unlabeled node subset.

        The subset must be disjoint from the training labels; estimating
        on nodes the method trained on would leak labels into the answer.
        """
        subset = np.asarray(subset, dtype=np.int64)
        if subset.ndim != 1 or subset.size == 0:
            raise PipelineError("subset must be a non-empty 1-D index array")
        if np.intersect1d(subset, self.train_indices).size:
            raise PipelineError("subset overlaps the training labels")
        name = self.descriptor.quantifier
        if self.hard_labels is not None:
            decisions = self.hard_labels[subset]
            if name == "cc":
                return cc(decisions)
            return acc(cc(decisions).value, self.rates)

        posteriors = self.classifier.posteriors(self.embeddings[subset])
        if name == "cc":
            return cc(harden(posteriors))
        if name == "acc":
            return acc(cc(harden(posteriors)).value, self.rates)
        sample = PosteriorSample(posteriors, self.training_prevalence)
        if name == "pcc":
            return pcc(sample)
        if name == "pacc":
            return pacc(pcc(sample).value, self.rates)
        if name == "sld":
            return sld(sample, tolerance=self.descriptor.sld_tolerance,
                       max_iterations=self.descriptor.sld_max_iterations)
        metric = "hellinger" if name == "hdy" else "topsoe"
        return distribution_match(posteriors, self.score_pair, metric=metric,
                                  alpha_step=self.descriptor.alpha_step,
                                  bin_counts=self.descriptor.bin_counts)

    def fingerprint(self):
        """Stable digest of all fitted state, for reproducibility checks."""
        digest = hashlib.sha256()
        digest.update(repr(self.descriptor).encode("utf-8"))
        digest.update(self.train_indices.tobytes())
        digest.update(np.float64(self.training_prevalence).tobytes())
        if self.hard_labels is not None:
            digest.update(self.hard_labels.tobytes())
        if self.classifier is not None:
            digest.update(self.classifier.readout.weights.tobytes())
            digest.update(np.float64(self.classifier.readout.bias).tobytes())
            digest.update(np.float64(self.classifier.calibration.a).tobytes())
            digest.update(np.float64(self.classifier.calibration.b).tobytes())
        if self.embeddings is not None:
            digest.update(self.embeddings.tobytes())
        if self.rates is not None:
            digest.update(np.float64(self.rates.tpr).tobytes())
            digest.update(np.float64(self.rates.fpr).tobytes())
        if self.score_pair is not None:
            digest.update(self.score_pair.positive_scores.tobytes())
            digest.update(self.score_pair.negative_scores.tobytes())
        return digest.hexdigest()


def _embeddings_for(embedder, g, features, cache):
    if embedder == "passthrough":
        return check_features(features, g.node_count)
    key = ("reservoir", embedder)
    if key in cache:
        return cache[key]
    adjacency_radius = None
    if embedder.relative_radius:
        if "adjacency-radius" in cache:
            adjacency_radius = cache["adjacency-radius"]
        else:
            adjacency_radius = spectral_radius(g)
            cache["adjacency-radius"] = adjacency_radius
    features = check_features(features, g.node_count)
    weights = init_reservoir(embedder, features.shape[1],
                             adjacency_radius=adjacency_radius)
    steps = default_iteration_count(g, embedder.iterations)
    matrix = embed_nodes(g, features, weights, steps).matrix
    cache[key] = matrix
    return matrix


def _run_baseline(spec, g, visible_labels, run_seed):
    if spec.kind == "wvrn":
        config = WvrnConfig(max_rounds=spec.wvrn_max_rounds)
        return wvrn_propagate(g, visible_labels, config, seed=run_seed)
    if spec.kind == "cdq":
        communities = discover_communities(
            g, overlapping=spec.overlapping_communities
        )
        return cdq_label(g, visible_labels, communities,
                         strategy=spec.cdq_strategy, seed=run_seed)
    return enq_label(g, visible_labels, radius=spec.enq_radius, seed=run_seed)


def _cached_baseline(spec, g, visible_labels, run_seed, cache):
    if spec.kind != "cdq" or cache is None:
        return _run_baseline(spec, g, visible_labels, run_seed)
    # Community discovery depends only on the graph; keep it per-run.
    key = ("communities", spec.overlapping_communities)
    if key not in cache:
        cache[key] = discover_communities(
            g, overlapping=spec.overlapping_communities
        )
    return cdq_label(g, visible_labels, cache[key],
                     strategy=spec.cdq_strategy, seed=run_seed)


def _baseline_rates(spec, g, labels, train, y, seed, stream, cache):
    """Cross-fitted hard rates for a structural labeler.

    Hides one stratified fold of the training labels at a time, reruns the
    labeler, and scores its predictions on the hidden fold.
    """
    train_labels = y[train]
    positives = train[train_labels == 1]
    negatives = train[train_labels == 0]
    k = int(min(spec.rate_folds, positives.size, negatives.size))
    if k < 2:
        raise PipelineError(
            "rate estimation needs at least two training nodes per class"
        )
    rng = derive_rng(seed, *stream, "baseline-rate-folds")
    fold_of = {}
    for class_members in (positives, negatives):
        perm = rng.permutation(class_members)
        for position, node in enumerate(perm):
            fold_of[int(node)] = position % k
    pooled = np.empty(train.size)
    position_of = {int(node): i for i, node in enumerate(train)}
    for f in range(k):
        hidden = np.array([node for node in train if fold_of[int(node)] == f],
                          dtype=np.int64)
        visible = np.setdiff1d(train, hidden)
        view = labels.masked(visible)
        predicted = _cached_baseline(
            spec, g, view, derive_seed(seed, *stream, "baseline-rates", f),
            cache
        )
        for node in hidden:
            pooled[position_of[int(node)]] = predicted[node]
    return rates_from_predictions(pooled, train_labels, soft=False)


def fit(descriptor, g, features, labels, calibration_indices, seed=0,
        stream=(), cache=None):
    """Fit one method on the labeled nodes.

    `labels` carries every label the method may see. The calibration
    indices must be a labeled subset; they are held out of readout
    training and used to fit the calibration map and the score
    distributions. `stream` namespaces the internal random streams, which
    matters when the same seed fits many splits. `cache` (a plain dict)
    reuses embeddings and community covers across fits on the same graph
    and features.
    """
    cache = {} if cache is None else cache
    calibration = np.sort(np.asarray(calibration_indices, dtype=np.int64))
    labeled = labels.labeled_indices
    if calibration.size and np.setdiff1d(calibration, labeled).size:
        raise PipelineError("calibration indices must be labeled")
    train = np.setdiff1d(labeled, calibration)
    if train.size == 0:
        raise PipelineError(
            "no training labels remain outside the calibration split"
        )
    y = labels.values
    training_prevalence = float(np.mean(y[train] == 1))

    if descriptor.baseline is not None:
        spec = descriptor.baseline
        visible = labels.masked(train)
        hard = _cached_baseline(spec, g, visible,
                                derive_seed(seed, *stream, "baseline"), cache)
        rates = None
        if descriptor.quantifier == "acc":
            rates = _baseline_rates(spec, g, labels, train, y, seed, stream,
                                    cache)
        return FittedMethod(descriptor, train, training_prevalence,
                            hard_labels=hard, rates=rates)

    if calibration.size == 0:
        raise PipelineError("the aggregative path needs a calibration split")
    matrix = _embeddings_for(descriptor.embedder, g, features, cache)
    config = descriptor.classifier
    readout = train_readout(matrix[train], y[train], config.regularization)
    calibration_map = fit_calibration(
        predict_raw(readout, matrix[calibration]), y[calibration]
    )
    classifier = CalibratedClassifier(readout=readout,
                                      calibration=calibration_map)

    rates = None
    if descriptor.quantifier in ("acc", "pacc"):
        rates = estimate_rates(
            classifier, matrix[train], y[train], folds=config.rate_folds,
            soft=descriptor.quantifier == "pacc",
            seed=derive_seed(seed, *stream, "rates"),
        )

    score_pair = None
    if descriptor.quantifier in ("hdy", "dys"):
        calibration_posteriors = classifier.posteriors(matrix[calibration])
        calibration_labels = y[calibration]
        score_pair = ScoreDistributionPair(
            positive_scores=calibration_posteriors[calibration_labels == 1],
            negative_scores=calibration_posteriors[calibration_labels == 0],
            bin_count=descriptor.bin_count,
        )

    return FittedMethod(descriptor, train, training_prevalence,
                        classifier=classifier, embeddings=matrix, rates=rates,
                        score_pair=score_pair)


def quantify(fitted, subset):
    """Prevalence estimate for `subset` from an already fitted method."""
    return fitted.quantify(subset)

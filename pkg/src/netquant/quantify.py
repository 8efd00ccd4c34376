"""Aggregative quantifiers.

Quantification estimates the fraction of positive nodes in an unlabeled
subset. Counting positive classifier decisions is biased whenever test
prevalence differs from training prevalence, so everything here either
corrects those counts with held-out error rates, matches score
distributions, or re-weights posteriors by expectation maximization.

All estimators take classifier outputs, never the classifier itself, so
they work with any scoring model.
"""

from dataclasses import dataclass

import numpy as np

from .readout import calibrate, predict_raw, train_readout
from .seeding import derive_rng

POSTERIOR_EPS = 1e-6
DENOMINATOR_FLOOR = 1e-3


class QuantifierError(ValueError):
    """Raised for invalid quantifier inputs."""


class UninformativeClassifierError(QuantifierError):
    """Rate correction is impossible because tpr and fpr coincide.

    A classifier with tpr equal to fpr says nothing about prevalence, and
    the adjusted-count formula would divide by zero.
    """


def _check_unit_interval(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise QuantifierError("%s must be a non-empty 1-D array" % name)
    if not np.all(np.isfinite(arr)):
        raise QuantifierError("%s must be finite" % name)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise QuantifierError("%s must lie in [0, 1]" % name)
    return arr


@dataclass(frozen=True)
class PosteriorSample:
    """Calibrated posteriors for an unlabeled subset, plus the training prior."""

    posteriors: np.ndarray
    training_prevalence: float

    def __post_init__(self):
        arr = _check_unit_interval(self.posteriors, "posteriors").copy()
        arr.setflags(write=False)
        object.__setattr__(self, "posteriors", arr)
        p = float(self.training_prevalence)
        if not (0.0 < p < 1.0):
            raise QuantifierError("training_prevalence must lie strictly in (0, 1)")
        object.__setattr__(self, "training_prevalence", p)


@dataclass(frozen=True)
class ClassifierRates:
    """True and false positive rates, estimated on held-out data.

    `soft` marks rates computed from posterior masses rather than hard
    decisions; the soft variant belongs to the probabilistic corrections.
    """

    tpr: float
    fpr: float
    soft: bool = False

    def __post_init__(self):
        for name, v in (("tpr", self.tpr), ("fpr", self.fpr)):
            if not (np.isfinite(v) and 0.0 <= v <= 1.0):
                raise QuantifierError("%s must lie in [0, 1]" % name)


@dataclass(frozen=True)
class PrevalenceEstimate:
    value: float
    method: str
    iterations: int = 0
    clipped: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.value) and 0.0 <= self.value <= 1.0):
            raise QuantifierError("estimate must lie in [0, 1]")


@dataclass(frozen=True)
class ScoreDistributionPair:
    """Per-class score samples backing the distribution-matching methods."""

    positive_scores: np.ndarray
    negative_scores: np.ndarray
    bin_count: int = 10

    def __post_init__(self):
        pos = _check_unit_interval(self.positive_scores, "positive_scores").copy()
        neg = _check_unit_interval(self.negative_scores, "negative_scores").copy()
        pos.setflags(write=False)
        neg.setflags(write=False)
        object.__setattr__(self, "positive_scores", pos)
        object.__setattr__(self, "negative_scores", neg)
        if int(self.bin_count) < 2:
            raise QuantifierError("bin_count must be at least 2")


def harden(posteriors, threshold=0.5):
    """Posterior scores to hard 0/1 decisions."""
    arr = _check_unit_interval(posteriors, "posteriors")
    return (arr >= threshold).astype(np.int8)


def cc(hard_predictions):
    """Classify and count: the fraction of positive decisions."""
    arr = np.asarray(hard_predictions)
    if arr.ndim != 1 or arr.size == 0:
        raise QuantifierError("hard_predictions must be a non-empty 1-D array")
    if not np.all(np.isin(arr, (0, 1))):
        raise QuantifierError("hard_predictions must be 0 or 1")
    return PrevalenceEstimate(value=float(np.mean(arr)), method="cc")


def acc(cc_value, rates, denominator_floor=DENOMINATOR_FLOOR):
    """Adjusted count: invert the expected decision rate.

    Under prior shift the positive-decision rate is
    ``fpr + prevalence * (tpr - fpr)``; solving for prevalence and clipping
    to [0, 1] gives the estimate.
    """
    if rates.soft:
        raise QuantifierError("acc needs hard-decision rates, got soft rates")
    return _rate_correct(cc_value, rates, denominator_floor, "acc")


def pcc(sample):
    """Probabilistic classify and count: the mean posterior."""
    return PrevalenceEstimate(value=float(np.mean(sample.posteriors)), method="pcc")


def pacc(pcc_value, rates, denominator_floor=DENOMINATOR_FLOOR):
    """Probabilistic adjusted count: rate correction on posterior masses."""
    if not rates.soft:
        raise QuantifierError("pacc needs soft rates, got hard-decision rates")
    return _rate_correct(pcc_value, rates, denominator_floor, "pacc")


def _rate_correct(observed, rates, denominator_floor, method):
    observed = float(observed)
    if not (0.0 <= observed <= 1.0):
        raise QuantifierError("observed rate must lie in [0, 1]")
    denominator = rates.tpr - rates.fpr
    if abs(denominator) < denominator_floor:
        raise UninformativeClassifierError(
            "tpr (%.6g) and fpr (%.6g) differ by less than %g; the rate "
            "correction is undefined" % (rates.tpr, rates.fpr, denominator_floor)
        )
    raw = (observed - rates.fpr) / denominator
    value = min(1.0, max(0.0, raw))
    return PrevalenceEstimate(value=value, method=method, clipped=value != raw)


def rates_from_predictions(predictions, labels, soft=False):
    """Empirical tpr and fpr of scores against known labels.

    In hard mode scores are thresholded at 0.5 first; in soft mode the
    rates are mean posterior masses per class.
    """
    scores = _check_unit_interval(predictions, "predictions")
    y = np.asarray(labels)
    if y.shape != scores.shape:
        raise QuantifierError("labels must match predictions")
    if not np.all(np.isin(y, (0, 1))):
        raise QuantifierError("labels must be 0 or 1")
    pos = y == 1
    neg = ~pos
    if not pos.any() or not neg.any():
        raise QuantifierError("rates need examples of both classes")
    if not soft:
        scores = (scores >= 0.5).astype(np.float64)
    return ClassifierRates(
        tpr=float(np.mean(scores[pos])),
        fpr=float(np.mean(scores[neg])),
        soft=bool(soft),
    )


def estimate_rates(classifier, embeddings, labels, folds=10, soft=False, seed=0):
    """Cross-fitted tpr and fpr for a calibrated classifier.

    Rates measured on the data the readout was trained on are optimistic,
    so the readout is refit on k-1 folds and scored on the held-out fold,
    reusing the classifier's regularization and calibration map. Fold
    assignment is stratified and `folds` shrinks to the smaller class
    count when needed.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise QuantifierError("embeddings and labels must align")
    positives = np.flatnonzero(y == 1)
    negatives = np.flatnonzero(y == 0)
    k = int(min(int(folds), positives.size, negatives.size))
    if k < 2:
        raise QuantifierError(
            "held-out rate estimation needs at least two nodes per class"
        )
    rng = derive_rng(seed, "rate-folds")
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    for class_indices in (positives, negatives):
        perm = rng.permutation(class_indices)
        fold_of[perm] = np.arange(perm.size) % k
    pooled = np.empty(y.shape[0])
    for f in range(k):
        held = fold_of == f
        refit = train_readout(x[~held], y[~held],
                              classifier.readout.regularization)
        pooled[held] = calibrate(classifier.calibration,
                                 predict_raw(refit, x[held]))
    return rates_from_predictions(pooled, y, soft=soft)


def sld(sample, tolerance=1e-6, max_iterations=1000):
    """Expectation-maximization prevalence estimate.

    Starting from the training prevalence, each round re-weights the
    posteriors by the ratio of the current prior to the training prior,
    renormalizes, and averages. Stops when consecutive estimates differ by
    at most `tolerance`. Posteriors are nudged away from exact 0 and 1 so
    the re-weighting can always move them.
    """
    if not (tolerance > 0):
        raise QuantifierError("tolerance must be positive")
    if int(max_iterations) < 1:
        raise QuantifierError("max_iterations must be at least 1")
    q0 = np.clip(sample.posteriors, POSTERIOR_EPS, 1.0 - POSTERIOR_EPS)
    clipped = bool(np.any(q0 != sample.posteriors))
    p0 = sample.training_prevalence
    p = p0
    iterations = int(max_iterations)
    for step in range(1, int(max_iterations) + 1):
        scaled_pos = (p / p0) * q0
        scaled_neg = ((1.0 - p) / (1.0 - p0)) * (1.0 - q0)
        posterior = scaled_pos / (scaled_pos + scaled_neg)
        updated = float(np.mean(posterior))
        done = abs(updated - p) <= tolerance
        p = updated
        if done:
            iterations = step
            break
    return PrevalenceEstimate(value=p, method="sld", iterations=iterations,
                              clipped=clipped)


def score_histogram(scores, bin_count):
    """Normalized histogram of scores over `bin_count` equal bins on [0, 1]."""
    arr = _check_unit_interval(scores, "scores")
    counts, _ = np.histogram(arr, bins=int(bin_count), range=(0.0, 1.0))
    return counts / arr.shape[0]


def histogram_divergence(p, q, metric="hellinger"):
    """Divergence between two normalized histograms.

    "hellinger" is the unnormalized Hellinger distance with maximum
    sqrt(2) on disjoint supports; "topsoe" is the symmetrized
    Kullback-Leibler form with the 0 log 0 terms defined as zero.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1 or p.size == 0:
        raise QuantifierError("histograms must be non-empty and equally binned")
    for name, h in (("p", p), ("q", q)):
        if h.min() < 0.0:
            raise QuantifierError("histogram %s has negative mass" % name)
        if abs(h.sum() - 1.0) > 1e-8:
            raise QuantifierError("histogram %s is not normalized" % name)
    if metric == "hellinger":
        return float(np.sqrt(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)))
    if metric == "topsoe":
        mix = p + q
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(p > 0.0, p * np.log(2.0 * p / mix), 0.0)
            right = np.where(q > 0.0, q * np.log(2.0 * q / mix), 0.0)
        return float(np.sum(left) + np.sum(right))
    raise QuantifierError("unknown metric %r" % (metric,))


_METHOD_BY_METRIC = {"hellinger": "hdy", "topsoe": "dys"}


def distribution_match(unlabeled_scores, pair, metric="hellinger",
                       alpha_step=0.01, bin_counts=None):
    """Mixture-fraction search against per-class score histograms.

    Scans prevalence candidates on a regular grid and returns the one whose
    mixture of the per-class histograms is closest to the unlabeled score
    histogram. Ties resolve to the smallest candidate. With several
    `bin_counts` the per-count winners are combined by their median.
    """
    if metric not in _METHOD_BY_METRIC:
        raise QuantifierError("unknown metric %r" % (metric,))
    if not (0.0 < alpha_step <= 1.0):
        raise QuantifierError("alpha_step must lie in (0, 1]")
    steps = round(1.0 / alpha_step)
    if abs(steps * alpha_step - 1.0) > 1e-9:
        raise QuantifierError("alpha_step must divide 1 evenly")
    scores = _check_unit_interval(unlabeled_scores, "unlabeled_scores")
    alphas = np.linspace(0.0, 1.0, steps + 1)
    counts = [pair.bin_count] if bin_counts is None else [int(b) for b in bin_counts]
    if not counts:
        raise QuantifierError("bin_counts must not be empty")
    winners = []
    for bins in counts:
        hist_pos = score_histogram(pair.positive_scores, bins)
        hist_neg = score_histogram(pair.negative_scores, bins)
        hist_unl = score_histogram(scores, bins)
        divergences = np.array([
            histogram_divergence(a * hist_pos + (1.0 - a) * hist_neg,
                                 hist_unl, metric)
            for a in alphas
        ])
        winners.append(float(alphas[int(np.argmin(divergences))]))
    return PrevalenceEstimate(value=float(np.median(winners)),
                              method=_METHOD_BY_METRIC[metric])

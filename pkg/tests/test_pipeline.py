import numpy as np
import pytest

from netquant.graph import LabelSet
from netquant.pipeline import (
    AGGREGATIVE_QUANTIFIERS,
    BaselineSpec,
    ClassifierConfig,
    MethodDescriptor,
    PipelineError,
    fit,
    quantify,
)
from netquant.reservoir import ReservoirConfig
from netquant.synth import generate_sbm


@pytest.fixture(scope="module")
def problem():
    g, features, labels = generate_sbm(80, 60, 0.12, 0.02, feature_dim=4,
                                       separation=3.0, noise=1.0, seed=9)
    rng = np.random.default_rng(0)
    labeled = np.sort(rng.choice(g.node_count, 70, replace=False))
    values = np.full(g.node_count, -1, dtype=np.int8)
    values[labeled] = labels[labeled]
    observed = LabelSet(values)
    calibration = labeled[::5]
    holdout = np.setdiff1d(np.arange(g.node_count), labeled)
    return g, features, labels, observed, calibration, holdout


def reservoir_descriptor(quantifier="sld"):
    return MethodDescriptor(
        quantifier=quantifier,
        embedder=ReservoirConfig(embedding_dim=12, target_radius=0.9, seed=1),
    )


# ----------------------------------------------------------- descriptors


def test_descriptor_requires_exactly_one_path():
    with pytest.raises(PipelineError):
        MethodDescriptor(quantifier="cc")
    with pytest.raises(PipelineError):
        MethodDescriptor(quantifier="cc", embedder="passthrough",
                         baseline=BaselineSpec(kind="wvrn"))


def test_descriptor_baseline_supports_counting_only():
    MethodDescriptor(quantifier="acc", baseline=BaselineSpec(kind="wvrn"))
    with pytest.raises(PipelineError):
        MethodDescriptor(quantifier="sld", baseline=BaselineSpec(kind="wvrn"))


def test_descriptor_unknown_quantifier():
    with pytest.raises(PipelineError):
        MethodDescriptor(quantifier="magic", embedder="passthrough")
    with pytest.raises(PipelineError):
        MethodDescriptor(quantifier="cc", embedder="mystery-string")


def test_descriptor_defaults_classifier():
    descriptor = MethodDescriptor(quantifier="cc", embedder="passthrough")
    assert isinstance(descriptor.classifier, ClassifierConfig)


def test_baseline_spec_validation():
    with pytest.raises(PipelineError):
        BaselineSpec(kind="mystery")
    with pytest.raises(PipelineError):
        BaselineSpec(kind="cdq", cdq_strategy="vibes")
    with pytest.raises(PipelineError):
        BaselineSpec(kind="enq", enq_radius=0)


# ------------------------------------------------------------- fitting


def test_fit_and_quantify_recovers_prevalence(problem):
    g, features, labels, observed, calibration, holdout = problem
    fitted = fit(reservoir_descriptor("sld"), g, features, observed,
                 calibration, seed=0)
    estimate = quantify(fitted, holdout)
    truth = float(np.mean(labels[holdout]))
    assert estimate.value == pytest.approx(truth, abs=0.15)


@pytest.mark.parametrize("quantifier", AGGREGATIVE_QUANTIFIERS)
def test_every_quantifier_runs(problem, quantifier):
    g, features, labels, observed, calibration, holdout = problem
    fitted = fit(reservoir_descriptor(quantifier), g, features, observed,
                 calibration, seed=0, cache={})
    estimate = quantify(fitted, holdout)
    assert 0.0 <= estimate.value <= 1.0


@pytest.mark.parametrize("kind", ["wvrn", "cdq", "enq"])
def test_baseline_kinds_run(problem, kind):
    g, features, labels, observed, calibration, holdout = problem
    descriptor = MethodDescriptor(quantifier="cc",
                                  baseline=BaselineSpec(kind=kind))
    fitted = fit(descriptor, g, features, observed, calibration, seed=0)
    estimate = quantify(fitted, holdout)
    assert 0.0 <= estimate.value <= 1.0
    assert fitted.classifier is None
    assert fitted.hard_labels is not None


def test_baseline_acc_computes_rates(problem):
    g, features, labels, observed, calibration, holdout = problem
    descriptor = MethodDescriptor(quantifier="acc",
                                  baseline=BaselineSpec(kind="wvrn",
                                                        rate_folds=3))
    fitted = fit(descriptor, g, features, observed, calibration, seed=0)
    assert fitted.rates is not None
    assert not fitted.rates.soft
    estimate = quantify(fitted, holdout)
    assert 0.0 <= estimate.value <= 1.0


def test_fit_training_prevalence_excludes_calibration(problem):
    g, features, labels, observed, calibration, holdout = problem
    fitted = fit(reservoir_descriptor("cc"), g, features, observed,
                 calibration, seed=0)
    train = np.setdiff1d(observed.labeled_indices, calibration)
    want = float(np.mean(observed.values[train] == 1))
    assert fitted.training_prevalence == want
    assert np.array_equal(fitted.train_indices, train)


def test_fit_requires_calibration_for_aggregative(problem):
    g, features, labels, observed, calibration, holdout = problem
    with pytest.raises(PipelineError, match="calibration"):
        fit(reservoir_descriptor("sld"), g, features, observed,
            np.empty(0, dtype=np.int64), seed=0)


def test_fit_rejects_unlabeled_calibration(problem):
    g, features, labels, observed, calibration, holdout = problem
    bad = np.concatenate([calibration, holdout[:1]])
    with pytest.raises(PipelineError, match="labeled"):
        fit(reservoir_descriptor("sld"), g, features, observed, bad, seed=0)


def test_quantify_rejects_training_overlap(problem):
    g, features, labels, observed, calibration, holdout = problem
    fitted = fit(reservoir_descriptor("cc"), g, features, observed,
                 calibration, seed=0)
    with pytest.raises(PipelineError, match="overlaps"):
        quantify(fitted, fitted.train_indices[:3])
    with pytest.raises(PipelineError):
        quantify(fitted, np.empty(0, dtype=np.int64))


def test_quantify_order_invariant(problem):
    g, features, labels, observed, calibration, holdout = problem
    fitted = fit(reservoir_descriptor("pcc"), g, features, observed,
                 calibration, seed=0)
    forward = quantify(fitted, holdout)
    shuffled = quantify(fitted, np.random.default_rng(1).permutation(holdout))
    assert forward.value == shuffled.value


def test_hdy_score_pair_comes_from_calibration_split(problem):
    g, features, labels, observed, calibration, holdout = problem
    fitted = fit(reservoir_descriptor("hdy"), g, features, observed,
                 calibration, seed=0)
    y = observed.values[calibration]
    assert fitted.score_pair.positive_scores.shape[0] == int((y == 1).sum())
    assert fitted.score_pair.negative_scores.shape[0] == int((y == 0).sum())


def test_fingerprint_deterministic_and_sensitive(problem):
    g, features, labels, observed, calibration, holdout = problem
    a = fit(reservoir_descriptor("sld"), g, features, observed, calibration,
            seed=0)
    b = fit(reservoir_descriptor("sld"), g, features, observed, calibration,
            seed=0)
    assert a.fingerprint() == b.fingerprint()
    c = fit(reservoir_descriptor("pcc"), g, features, observed, calibration,
            seed=0)
    assert a.fingerprint() != c.fingerprint()


def test_cache_shares_embeddings(problem):
    g, features, labels, observed, calibration, holdout = problem
    cache = {}
    a = fit(reservoir_descriptor("cc"), g, features, observed, calibration,
            seed=0, cache=cache)
    before = len(cache)
    b = fit(reservoir_descriptor("sld"), g, features, observed, calibration,
            seed=0, cache=cache)
    assert len(cache) == before  # same embedder, no new entries
    assert a.embeddings is b.embeddings


def test_passthrough_uses_raw_features(problem):
    g, features, labels, observed, calibration, holdout = problem
    descriptor = MethodDescriptor(quantifier="cc", embedder="passthrough")
    fitted = fit(descriptor, g, features, observed, calibration, seed=0)
    assert np.array_equal(fitted.embeddings, features)


def test_stream_changes_rate_folds_not_embeddings():
    # noisy features keep the cross-fitted rates off the 0/1 boundary, so
    # different fold draws give visibly different rate estimates
    g, features, labels = generate_sbm(60, 60, 0.08, 0.04, feature_dim=3,
                                       separation=0.8, noise=1.0, seed=13)
    observed = LabelSet.from_binary(labels)
    calibration = np.arange(0, g.node_count, 6)
    cache = {}
    a = fit(reservoir_descriptor("acc"), g, features, observed, calibration,
            seed=0, stream=("fold", 0), cache=cache)
    b = fit(reservoir_descriptor("acc"), g, features, observed, calibration,
            seed=0, stream=("fold", 1), cache=cache)
    assert a.embeddings is b.embeddings
    assert (a.rates.tpr, a.rates.fpr) != (b.rates.tpr, b.rates.fpr)

import json

import numpy as np
import pytest

from netquant.pipeline import MethodDescriptor
from netquant.protocol import (
    APPConfig,
    EvaluationReport,
    InsufficientPoolError,
    ProtocolError,
    Record,
    SplitPlan,
    app_prevalence_schedule,
    app_sample,
    development_split,
    evaluate_app,
    export_diagonal,
    mae,
    outer_folds,
    run_cross_validation,
    write_diagonal_csv,
    write_report_csv,
    write_summary_json,
)
from netquant.quantify import PrevalenceEstimate
from netquant.seeding import derive_rng
from netquant.synth import generate_sbm


class StubMethod:
    """Returns a constant estimate and logs every subset it sees."""

    def __init__(self, value=0.4):
        self.value = value
        self.subsets = []

    def quantify(self, subset):
        self.subsets.append(np.asarray(subset).copy())
        return PrevalenceEstimate(value=self.value, method="stub")


def test_mae_hand_value():
    assert mae([0.1, 0.5], [0.2, 0.3]) == pytest.approx(0.15)
    with pytest.raises(ProtocolError):
        mae([0.1], [0.1, 0.2])


def test_schedule_round_robin():
    grid = tuple(round(i * 0.05, 2) for i in range(21))
    schedule = app_prevalence_schedule(grid, 100)
    assert len(schedule) == 100
    counts = {p: schedule.count(p) for p in grid}
    assert all(counts[grid[i]] == 5 for i in range(16))
    assert all(counts[grid[i]] == 4 for i in range(16, 21))
    assert schedule[:3] == [0.0, 0.05, 0.1]


def test_schedule_fewer_instances_than_grid():
    assert app_prevalence_schedule((0.0, 0.5, 1.0), 2) == [0.0, 0.5]


# ------------------------------------------------------------- sampling


def make_pool(positives, negatives):
    pool = np.arange(positives + negatives)
    labels = np.concatenate([np.ones(positives, np.int8),
                             np.zeros(negatives, np.int8)])
    return pool, labels


def test_app_sample_exact_counts():
    pool, labels = make_pool(40, 40)
    rng = derive_rng(0, "test")
    subset = app_sample(pool, labels, 0.5, 10, rng)
    assert subset.shape == (10,)
    assert int(labels[subset].sum()) == 5
    assert np.all(np.diff(subset) > 0)  # sorted, no repeats


def test_app_sample_rounds_half_to_even():
    pool, labels = make_pool(40, 40)
    rng = derive_rng(1, "test")
    assert int(labels[app_sample(pool, labels, 0.05, 10, rng)].sum()) == 0
    assert int(labels[app_sample(pool, labels, 0.15, 10, rng)].sum()) == 2
    assert int(labels[app_sample(pool, labels, 0.25, 10, rng)].sum()) == 2
    assert int(labels[app_sample(pool, labels, 0.35, 10, rng)].sum()) == 4


def test_app_sample_pure_targets():
    pool, labels = make_pool(20, 20)
    rng = derive_rng(2, "test")
    assert int(labels[app_sample(pool, labels, 0.0, 8, rng)].sum()) == 0
    assert int(labels[app_sample(pool, labels, 1.0, 8, rng)].sum()) == 8


def test_app_sample_insufficient_pool():
    pool, labels = make_pool(3, 40)
    rng = derive_rng(3, "test")
    with pytest.raises(InsufficientPoolError, match="need 5 positives"):
        app_sample(pool, labels, 0.5, 10, rng)


def test_app_sample_subset_of_pool():
    pool = np.array([5, 9, 14, 20, 33, 41])
    labels = np.array([1, 0, 1, 0, 1, 0], dtype=np.int8)
    rng = derive_rng(4, "test")
    subset = app_sample(pool, labels, 0.5, 4, rng)
    assert np.all(np.isin(subset, pool))


def test_app_sample_deterministic():
    pool, labels = make_pool(30, 30)
    a = app_sample(pool, labels, 0.4, 12, derive_rng(7, "x"))
    b = app_sample(pool, labels, 0.4, 12, derive_rng(7, "x"))
    assert np.array_equal(a, b)


def test_app_sample_validation():
    pool, labels = make_pool(5, 5)
    rng = derive_rng(0, "v")
    with pytest.raises(ProtocolError):
        app_sample(pool, labels, 1.5, 4, rng)
    with pytest.raises(ProtocolError):
        app_sample(pool, labels, 0.5, 0, rng)
    with pytest.raises(ProtocolError):
        app_sample(pool, labels[:-1], 0.5, 4, rng)


# --------------------------------------------------------------- splits


def test_outer_folds_partition():
    folds = outer_folds(103, 5, seed=0)
    sizes = [f.shape[0] for f in folds]
    assert max(sizes) - min(sizes) <= 1
    combined = np.sort(np.concatenate(folds))
    assert np.array_equal(combined, np.arange(103))


def test_outer_folds_deterministic():
    a = outer_folds(50, 5, seed=3)
    b = outer_folds(50, 5, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = outer_folds(50, 5, seed=4)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_development_split_fractions():
    plan = SplitPlan()
    dev = np.arange(160)
    train, calibration, validation = development_split(dev, plan, seed=0, fold=0)
    assert train.shape[0] == 100
    assert calibration.shape[0] == 20
    assert validation.shape[0] == 40
    combined = np.sort(np.concatenate([train, calibration, validation]))
    assert np.array_equal(combined, dev)


def test_development_split_depends_on_fold():
    dev = np.arange(80)
    a = development_split(dev, SplitPlan(), seed=0, fold=0)
    b = development_split(dev, SplitPlan(), seed=0, fold=1)
    assert not np.array_equal(a[0], b[0])


def test_development_split_too_small():
    with pytest.raises(ProtocolError):
        development_split(np.arange(3), SplitPlan(), seed=0, fold=0)


def test_split_plan_validation():
    with pytest.raises(ProtocolError):
        SplitPlan(fold_count=1)
    with pytest.raises(ProtocolError):
        SplitPlan(train_fraction=0.5, calibration_fraction=0.1,
                  validation_fraction=0.3)
    with pytest.raises(ProtocolError):
        SplitPlan(train_fraction=1.0, calibration_fraction=0.0,
                  validation_fraction=0.0)


def test_app_config_validation():
    with pytest.raises(ProtocolError):
        APPConfig(prevalence_grid=())
    with pytest.raises(ProtocolError):
        APPConfig(prevalence_grid=(0.5, 1.2))
    with pytest.raises(ProtocolError):
        APPConfig(instances=0)
    with pytest.raises(ProtocolError):
        APPConfig(sample_size=0)


# ----------------------------------------------------------- evaluation


def test_evaluate_app_realized_prevalence_and_errors():
    pool, labels = make_pool(50, 50)
    app = APPConfig(prevalence_grid=(0.2, 0.6), instances=4, sample_size=10)
    stub = StubMethod(value=0.4)
    pairs, skipped = evaluate_app(stub, pool, labels, app, seed=0,
                                  phase="validation", fold=0)
    assert skipped == 0
    assert [p for p, _ in pairs] == [0.2, 0.6, 0.2, 0.6]
    assert all(e == 0.4 for _, e in pairs)
    assert len(stub.subsets) == 4


def test_evaluate_app_skips_infeasible_targets():
    pool, labels = make_pool(2, 50)  # only two positives
    app = APPConfig(prevalence_grid=(0.0, 1.0), instances=4, sample_size=10)
    stub = StubMethod()
    pairs, skipped = evaluate_app(stub, pool, labels, app, seed=0,
                                  phase="validation", fold=0)
    assert skipped == 2  # both prevalence-1.0 instances
    assert [p for p, _ in pairs] == [0.0, 0.0]


def test_evaluate_app_identical_subsets_across_methods():
    pool, labels = make_pool(40, 40)
    app = APPConfig(prevalence_grid=(0.3, 0.7), instances=6, sample_size=12)
    first = StubMethod(value=0.1)
    second = StubMethod(value=0.9)
    evaluate_app(first, pool, labels, app, seed=5, phase="test", fold=2)
    evaluate_app(second, pool, labels, app, seed=5, phase="test", fold=2)
    assert len(first.subsets) == len(second.subsets) == 6
    for a, b in zip(first.subsets, second.subsets):
        assert np.array_equal(a, b)


def test_evaluate_app_phase_and_fold_change_draws():
    pool, labels = make_pool(40, 40)
    app = APPConfig(prevalence_grid=(0.5,), instances=1, sample_size=20)
    runs = {}
    for phase, fold in (("validation", 0), ("test", 0), ("validation", 1)):
        stub = StubMethod()
        evaluate_app(stub, pool, labels, app, seed=5, phase=phase, fold=fold)
        runs[(phase, fold)] = stub.subsets[0]
    assert not np.array_equal(runs[("validation", 0)], runs[("test", 0)])
    assert not np.array_equal(runs[("validation", 0)], runs[("validation", 1)])


# ------------------------------------------------------- reports and io


def toy_report():
    records = [
        Record(0, "toy", 0.2, 0.25),
        Record(0, "toy", 0.8, 0.7),
        Record(1, "toy", 0.2, 0.15),
    ]
    return EvaluationReport(method="toy", records=records,
                            fold_errors=[0.0, 0.5], skipped=1)


def test_report_statistics():
    report = toy_report()
    assert report.mean_error() == pytest.approx(0.25)
    # population standard deviation over the fold errors
    assert report.error_std() == pytest.approx(0.25)


def test_export_diagonal_groups_by_truth():
    rows = export_diagonal(toy_report())
    assert rows[0][0] == 0.2
    assert rows[0][1] == pytest.approx(0.2)  # mean of 0.25 and 0.15
    assert rows[0][2] == pytest.approx(0.05)
    assert rows[1] == (0.8, pytest.approx(0.7), pytest.approx(0.0))


def test_write_report_csv_round_trips(tmp_path):
    path = tmp_path / "report.csv"
    write_report_csv([toy_report()], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "fold,method,true_prev,est_prev"
    assert len(lines) == 4
    fold, method, true_p, est = lines[1].split(",")
    assert (fold, method) == ("0", "toy")
    assert float(true_p) == 0.2 and float(est) == 0.25


def test_write_summary_json(tmp_path):
    path = tmp_path / "summary.json"
    write_summary_json([toy_report()], path)
    loaded = json.loads(path.read_text())
    entry = loaded["methods"]["toy"]
    assert entry["mae_mean"] == pytest.approx(0.25)
    assert entry["records"] == 3
    assert entry["skipped_instances"] == 1


def test_write_diagonal_csv(tmp_path):
    path = tmp_path / "diagonal.csv"
    write_diagonal_csv(toy_report(), path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "true_prev,mean_est,std_est"
    assert len(lines) == 3


# -------------------------------------------------- cross validation


def small_problem(seed=0):
    g, features, labels = generate_sbm(70, 50, 0.15, 0.02, feature_dim=4,
                                       separation=3.0, noise=1.0, seed=seed)
    return g, features, labels


def fast_app():
    return APPConfig(prevalence_grid=(0.2, 0.5, 0.8), instances=3,
                     sample_size=12)


def test_run_cross_validation_deterministic():
    g, features, labels = small_problem()
    candidates = [MethodDescriptor(quantifier="cc", embedder="passthrough")]
    kwargs = dict(plan=SplitPlan(fold_count=3), app=fast_app(), seed=11)
    a = run_cross_validation(g, features, labels, "probe", candidates, **kwargs)
    b = run_cross_validation(g, features, labels, "probe", candidates, **kwargs)
    assert a.records == b.records
    assert a.fold_errors == b.fold_errors


def test_run_cross_validation_reasonable_error():
    g, features, labels = small_problem()
    candidates = [MethodDescriptor(quantifier="sld", embedder="passthrough")]
    report = run_cross_validation(g, features, labels, "probe", candidates,
                                  plan=SplitPlan(fold_count=3), app=fast_app(),
                                  seed=1)
    assert len(report.fold_errors) == 3
    assert report.mean_error() < 0.25  # separable features, easy problem


@pytest.mark.filterwarnings("ignore::netquant.readout.CalibrationWarning")
def test_run_cross_validation_selects_better_candidate():
    g, features, labels = small_problem(seed=3)
    good = MethodDescriptor(quantifier="cc", embedder="passthrough")
    # tiny input scale drives every embedding to the same near-zero point,
    # so this candidate cannot rank nodes and loses every validation round
    from netquant.reservoir import ReservoirConfig

    bad = MethodDescriptor(
        quantifier="cc",
        embedder=ReservoirConfig(embedding_dim=2, target_radius=0.5,
                                 input_scale=1e-9, seed=0),
    )
    kwargs = dict(plan=SplitPlan(fold_count=3), app=fast_app(), seed=2)
    solo = run_cross_validation(g, features, labels, "m", [good], **kwargs)
    paired = run_cross_validation(g, features, labels, "m", [good, bad],
                                  **kwargs)
    assert solo.records == paired.records


def test_run_cross_validation_label_fraction_changes_training():
    g, features, labels = small_problem(seed=5)
    candidates = [MethodDescriptor(quantifier="pcc", embedder="passthrough")]
    kwargs = dict(plan=SplitPlan(fold_count=3), app=fast_app(), seed=7)
    full = run_cross_validation(g, features, labels, "m", candidates, **kwargs)
    partial = run_cross_validation(g, features, labels, "m", candidates,
                                   label_fraction=0.4, **kwargs)
    assert full.records != partial.records


def test_run_cross_validation_impossible_sample_size():
    g, features, labels = small_problem()
    candidates = [MethodDescriptor(quantifier="cc", embedder="passthrough")]
    app = APPConfig(prevalence_grid=(0.5,), instances=2, sample_size=5000)
    with pytest.raises(ProtocolError):
        run_cross_validation(g, features, labels, "m", candidates,
                             plan=SplitPlan(fold_count=3), app=app, seed=0)


def test_run_cross_validation_validation():
    g, features, labels = small_problem()
    with pytest.raises(ProtocolError):
        run_cross_validation(g, features, labels, "m", [], seed=0)
    bad_labels = labels.astype(np.int64).copy()
    bad_labels[0] = 7
    candidates = [MethodDescriptor(quantifier="cc", embedder="passthrough")]
    with pytest.raises(ProtocolError):
        run_cross_validation(g, features, bad_labels, "m", candidates, seed=0)

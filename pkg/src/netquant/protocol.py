"""Evaluation protocol: cross-validation plus prevalence-controlled sampling.

Quantifiers must be tested across the whole range of prevalences they may
meet, not at the single prevalence the data happens to have. The sampler
here draws fixed-size subsets at target prevalences swept over a grid,
while an outer cross-validation keeps test nodes away from everything a
method saw during fitting. Split and sample indices depend only on the
seed, never on the method, so every method faces identical conditions.
"""

import collections
import csv
import json
import logging

import numpy as np

from .graph import LabelSet
from .pipeline import fit
from .seeding import derive_rng

logger = logging.getLogger(__name__)

DEFAULT_PREVALENCE_GRID = tuple(round(i * 0.05, 2) for i in range(21))


class ProtocolError(ValueError):
    pass


class InsufficientPoolError(ProtocolError):
    """The pool cannot realize the requested prevalence at the requested size."""


class APPConfig:
    """Settings for artificial-prevalence sampling.

    `instances` samples are spread round-robin over `prevalence_grid`.
    `sample_size=None` means each pool uses min(500, pool size).
    """

    __slots__ = ("prevalence_grid", "instances", "sample_size")

    def __init__(self, prevalence_grid=DEFAULT_PREVALENCE_GRID, instances=100,
                 sample_size=None):
        grid = tuple(float(p) for p in prevalence_grid)
        if not grid:
            raise ProtocolError("prevalence_grid must not be empty")
        if any(not (0.0 <= p <= 1.0) for p in grid):
            raise ProtocolError("grid prevalences must lie in [0, 1]")
        if int(instances) < 1:
            raise ProtocolError("instances must be at least 1")
        if sample_size is not None and int(sample_size) < 1:
            raise ProtocolError("sample_size must be at least 1")
        self.prevalence_grid = grid
        self.instances = int(instances)
        self.sample_size = None if sample_size is None else int(sample_size)


class SplitPlan:
    """Outer fold count and the train/calibration/validation fractions."""

    __slots__ = ("fold_count", "train_fraction", "calibration_fraction",
                 "validation_fraction")

    def __init__(self, fold_count=5, train_fraction=0.625,
                 calibration_fraction=0.125, validation_fraction=0.25):
        if int(fold_count) < 2:
            raise ProtocolError("fold_count must be at least 2")
        fractions = (train_fraction, calibration_fraction, validation_fraction)
        if any(not (0.0 < f < 1.0) for f in fractions):
            raise ProtocolError("split fractions must lie strictly in (0, 1)")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ProtocolError("split fractions must sum to 1")
        self.fold_count = int(fold_count)
        self.train_fraction = float(train_fraction)
        self.calibration_fraction = float(calibration_fraction)
        self.validation_fraction = float(validation_fraction)


Record = collections.namedtuple(
    "Record", ["fold", "method", "true_prevalence", "estimated_prevalence"]
)


class EvaluationReport:
    """Per-instance records and per-fold errors for one method."""

    __slots__ = ("method", "records", "fold_errors", "skipped")

    def __init__(self, method, records, fold_errors, skipped):
        self.method = method
        self.records = tuple(records)
        self.fold_errors = tuple(float(e) for e in fold_errors)
        self.skipped = int(skipped)

    def mean_error(self):
        return float(np.mean(self.fold_errors))

    def error_std(self):
        # Population standard deviation over folds.
        return float(np.std(self.fold_errors))


def mae(true_values, estimates):
    """Mean absolute error between prevalence vectors."""
    t = np.asarray(true_values, dtype=np.float64)
    e = np.asarray(estimates, dtype=np.float64)
    if t.shape != e.shape or t.ndim != 1 or t.size == 0:
        raise ProtocolError("mae needs two equal-length non-empty vectors")
    return float(np.mean(np.abs(t - e)))


def app_prevalence_schedule(grid, instances):
    """Round-robin assignment of instances to grid prevalences."""
    grid = tuple(grid)
    if not grid:
        raise ProtocolError("prevalence grid must not be empty")
    return [grid[i % len(grid)] for i in range(int(instances))]


def app_sample(pool, pool_labels, target_prevalence, size, rng):
    """Draw a subset of `pool` with a controlled positive fraction.

    The positive count is `target_prevalence * size` rounded half to even;
    positives and negatives are then drawn without replacement. Raises
    `InsufficientPoolError` when either class runs short of the request.
    """
    pool = np.asarray(pool, dtype=np.int64)
    pool_labels = np.asarray(pool_labels)
    if pool.shape != pool_labels.shape or pool.ndim != 1:
        raise ProtocolError("pool and pool_labels must align")
    size = int(size)
    if size < 1:
        raise ProtocolError("sample size must be at least 1")
    if not (0.0 <= target_prevalence <= 1.0):
        raise ProtocolError("target prevalence must lie in [0, 1]")
    positive_count = round(target_prevalence * size)
    negative_count = size - positive_count
    positive_pool = pool[pool_labels == 1]
    negative_pool = pool[pool_labels == 0]
    if positive_count > positive_pool.size or negative_count > negative_pool.size:
        raise InsufficientPoolError(
            "need %d positives and %d negatives but the pool holds %d and %d"
            % (positive_count, negative_count, positive_pool.size,
               negative_pool.size)
        )
    parts = []
    if positive_count:
        parts.append(rng.choice(positive_pool, positive_count, replace=False))
    if negative_count:
        parts.append(rng.choice(negative_pool, negative_count, replace=False))
    return np.sort(np.concatenate(parts))


def outer_folds(node_count, fold_count, seed):
    """Disjoint folds covering all nodes, sizes differing by at most one."""
    perm = derive_rng(seed, "outer-folds").permutation(int(node_count))
    return [np.sort(perm[f::int(fold_count)]) for f in range(int(fold_count))]


def development_split(dev_indices, plan, seed, fold):
    """Split development nodes into train, calibration, and validation."""
    dev = np.asarray(dev_indices, dtype=np.int64)
    perm = derive_rng(seed, "dev-split", fold).permutation(dev)
    n = dev.shape[0]
    validation_count = int(round(plan.validation_fraction * n))
    calibration_count = int(round(plan.calibration_fraction * n))
    train_count = n - validation_count - calibration_count
    if min(train_count, calibration_count, validation_count) < 1:
        raise ProtocolError(
            "development pool of %d nodes is too small for the split plan" % n
        )
    train = np.sort(perm[:train_count])
    calibration = np.sort(perm[train_count:train_count + calibration_count])
    validation = np.sort(perm[train_count + calibration_count:])
    return train, calibration, validation


def evaluate_app(fitted, pool, true_labels, app, seed, phase, fold):
    """Run every scheduled sampling instance of one phase against `fitted`.

    Returns ``(pairs, skipped)`` where pairs holds
    ``(realized_prevalence, estimate)`` and skipped counts instances whose
    target prevalence the pool could not realize (each is logged).
    """
    pool = np.asarray(pool, dtype=np.int64)
    y = np.asarray(true_labels)
    size = app.sample_size if app.sample_size is not None else min(500, pool.size)
    schedule = app_prevalence_schedule(app.prevalence_grid, app.instances)
    pool_labels = y[pool]
    pairs = []
    skipped = 0
    for index, target in enumerate(schedule):
        rng = derive_rng(seed, "app", phase, fold, index)
        try:
            subset = app_sample(pool, pool_labels, target, size, rng)
        except InsufficientPoolError as exc:
            skipped += 1
            logger.info("fold %d %s instance %d (target %.2f) skipped: %s",
                        fold, phase, index, target, exc)
            continue
        realized = float(np.mean(y[subset]))
        estimate = fitted.quantify(subset)
        pairs.append((realized, float(estimate.value)))
    return pairs, skipped


def _stratified_subsample(indices, y, fraction, rng):
    if not (0.0 < fraction <= 1.0):
        raise ProtocolError("label_fraction must lie in (0, 1]")
    if fraction == 1.0:
        return indices
    kept = []
    for cls in (0, 1):
        members = indices[y[indices] == cls]
        if members.size == 0:
            continue
        count = max(1, int(round(fraction * members.size)))
        kept.append(rng.choice(members, count, replace=False))
    return np.sort(np.concatenate(kept))


def run_cross_validation(g, features, true_labels, method_name, candidates,
                         plan=None, app=None, seed=0, label_fraction=1.0,
                         cache=None):
    """Grid-searched cross-validated evaluation of one method family.

    Each outer fold splits the remaining nodes into train, calibration,
    and validation parts. Every candidate descriptor is fit on the train
    and calibration labels and scored by mean absolute error over the
    validation sampling instances; the best candidate is then evaluated on
    the untouched test fold. All splits and samples derive from `seed`
    alone, so different method families see identical data.
    """
    plan = plan if plan is not None else SplitPlan()
    app = app if app is not None else APPConfig()
    candidates = list(candidates)
    if not candidates:
        raise ProtocolError("need at least one candidate descriptor")
    y = np.asarray(true_labels)
    if y.shape != (g.node_count,) or not np.all(np.isin(y, (0, 1))):
        raise ProtocolError("true_labels must be 0/1 over all nodes")
    cache = {} if cache is None else cache
    all_labels = LabelSet.from_binary(y)

    folds = outer_folds(g.node_count, plan.fold_count, seed)
    records = []
    fold_errors = []
    skipped_total = 0
    for f in range(plan.fold_count):
        test = folds[f]
        development = np.sort(np.concatenate(
            [folds[j] for j in range(plan.fold_count) if j != f]
        ))
        train, calibration, validation = development_split(development, plan,
                                                           seed, f)
        if label_fraction < 1.0:
            train = _stratified_subsample(
                train, y, label_fraction, derive_rng(seed, "label-fraction", f)
            )
        observed = all_labels.masked(np.concatenate([train, calibration]))

        best_fitted = None
        best_score = np.inf
        for descriptor in candidates:
            fitted = fit(descriptor, g, features, observed,
                         calibration_indices=calibration, seed=seed,
                         stream=("fold", f), cache=cache)
            val_pairs, val_skipped = evaluate_app(fitted, validation, y, app,
                                                  seed, "validation", f)
            skipped_total += val_skipped
            if not val_pairs:
                logger.warning("fold %d: no feasible validation instance", f)
                score = np.inf
            else:
                score = mae([p for p, _ in val_pairs], [e for _, e in val_pairs])
            if score < best_score:
                best_score = score
                best_fitted = fitted
        if best_fitted is None:
            raise ProtocolError("no candidate could be scored at fold %d" % f)

        test_pairs, test_skipped = evaluate_app(best_fitted, test, y, app,
                                                seed, "test", f)
        skipped_total += test_skipped
        if not test_pairs:
            raise ProtocolError(
                "every test sampling instance was infeasible at fold %d" % f
            )
        records.extend(
            Record(f, method_name, true_p, est) for true_p, est in test_pairs
        )
        fold_errors.append(mae([p for p, _ in test_pairs],
                               [e for _, e in test_pairs]))
    return EvaluationReport(method=method_name, records=records,
                            fold_errors=fold_errors, skipped=skipped_total)


def export_diagonal(report):
    """Collapse records to (true prevalence, mean estimate, estimate std) rows."""
    groups = {}
    for record in report.records:
        groups.setdefault(record.true_prevalence, []).append(
            record.estimated_prevalence
        )
    rows = []
    for true_p in sorted(groups):
        estimates = np.asarray(groups[true_p])
        rows.append((true_p, float(np.mean(estimates)), float(np.std(estimates))))
    return rows


def write_report_csv(reports, path):
    """One row per sampling instance across all reports."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["fold", "method", "true_prev", "est_prev"])
        for report in reports:
            for record in report.records:
                writer.writerow([
                    record.fold,
                    record.method,
                    repr(float(record.true_prevalence)),
                    repr(float(record.estimated_prevalence)),
                ])


def write_summary_json(reports, path):
    summary = {
        "methods": {
            report.method: {
                "mae_mean": report.mean_error(),
                "mae_std": report.error_std(),
                "fold_mae": list(report.fold_errors),
                "records": len(report.records),
                "skipped_instances": report.skipped,
            }
            for report in reports
        }
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_diagonal_csv(report, path):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["true_prev", "mean_est", "std_est"])
        for true_p, mean_est, std_est in export_diagonal(report):
            writer.writerow([repr(float(true_p)), repr(mean_est), repr(std_est)])

"""Experiment configuration files.

A config is YAML with four sections: `dataset` (file paths), `split` and
`sampling` (protocol settings), and `methods`, a mapping from method name
to its recipe. Inside a recipe, any list-valued knob expands into a
hyperparameter grid; the cross-validation then picks the best combination
per fold by validation error. Example:

    seed: 7
    dataset:
      edges: data/edges.txt
      features: data/features.csv
      labels: data/labels.csv
    methods:
      xnq:
        quantifier: sld
        embedder: {dim: [16, 32], radius: [0.5, 2.0], relative_radius: true}
      wvrn:
        quantifier: cc
        baseline: {kind: wvrn}
"""

import hashlib
import itertools
import os

import yaml

from .pipeline import BaselineSpec, ClassifierConfig, MethodDescriptor
from .protocol import APPConfig, SplitPlan


class ConfigError(ValueError):
    pass


_EMBEDDER_KEYS = {
    "dim": "embedding_dim",
    "radius": "target_radius",
    "input_scale": "input_scale",
    "bias_scale": "bias_scale",
    "iterations": "iterations",
    "seed": "seed",
    "relative_radius": "relative_radius",
}
_CLASSIFIER_KEYS = {"regularization": "regularization", "rate_folds": "rate_folds"}
_BASELINE_KEYS = {
    "kind": "kind",
    "max_rounds": "wvrn_max_rounds",
    "strategy": "cdq_strategy",
    "radius": "enq_radius",
    "overlapping": "overlapping_communities",
    "rate_folds": "rate_folds",
}
_OPTION_KEYS = ("sld_tolerance", "sld_max_iterations", "bin_count",
                "bin_counts", "alpha_step")
# bin_counts is itself list-valued, so it never expands into a grid.
_NO_EXPAND = {"bin_counts"}


class ExperimentConfig:
    __slots__ = ("seed", "dataset", "plan", "app", "methods", "digest")

    def __init__(self, seed, dataset, plan, app, methods, digest):
        self.seed = seed
        self.dataset = dataset
        self.plan = plan
        self.app = app
        self.methods = methods
        self.digest = digest


def _require_mapping(value, context):
    if not isinstance(value, dict):
        raise ConfigError("%s must be a mapping" % context)
    return value


def _check_keys(mapping, allowed, context):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError("%s: unknown keys %s" % (context, ", ".join(unknown)))


def _expand_grid(mapping):
    """All combinations of list-valued entries, in sorted-key order."""
    keys = sorted(mapping)
    pools = []
    for key in keys:
        value = mapping[key]
        if isinstance(value, list) and key not in _NO_EXPAND:
            if not value:
                raise ConfigError("grid for %r is empty" % key)
            pools.append([(key, item) for item in value])
        else:
            pools.append([(key, value)])
    return [dict(combo) for combo in itertools.product(*pools)]


def _build_reservoir(entry, root_seed):
    from .reservoir import ReservoirConfig

    _check_keys(entry, _EMBEDDER_KEYS, "embedder")
    if "dim" not in entry or "radius" not in entry:
        raise ConfigError("embedder needs at least dim and radius")
    kwargs = {_EMBEDDER_KEYS[k]: v for k, v in entry.items()}
    kwargs.setdefault("seed", root_seed)
    return ReservoirConfig(**kwargs)


def _method_candidates(name, body, root_seed):
    body = _require_mapping(body, "method %r" % name)
    allowed = {"quantifier", "embedder", "classifier", "baseline", *_OPTION_KEYS}
    _check_keys(body, allowed, "method %r" % name)
    quantifier = body.get("quantifier")
    if not isinstance(quantifier, str):
        raise ConfigError("method %r needs a quantifier name" % name)

    option_grids = _expand_grid(
        {k: body[k] for k in _OPTION_KEYS if k in body}
    )

    embedder = body.get("embedder")
    baseline = body.get("baseline")
    if (embedder is None) == (baseline is None):
        raise ConfigError(
            "method %r must configure exactly one of embedder or baseline" % name
        )

    candidates = []
    if baseline is not None:
        baseline = _require_mapping(baseline, "method %r baseline" % name)
        _check_keys(baseline, _BASELINE_KEYS, "baseline")
        for combo in _expand_grid(baseline):
            kwargs = {_BASELINE_KEYS[k]: v for k, v in combo.items()}
            for options in option_grids:
                candidates.append(MethodDescriptor(
                    quantifier=quantifier, baseline=BaselineSpec(**kwargs),
                    **options,
                ))
        return candidates

    classifier = body.get("classifier", {})
    classifier = _require_mapping(classifier, "method %r classifier" % name)
    _check_keys(classifier, _CLASSIFIER_KEYS, "classifier")
    classifier_grids = _expand_grid(classifier)

    if embedder == "passthrough":
        embedder_grids = ["passthrough"]
    else:
        embedder = _require_mapping(embedder, "method %r embedder" % name)
        embedder_grids = _expand_grid(embedder)

    for emb_entry in embedder_grids:
        built = emb_entry if emb_entry == "passthrough" else _build_reservoir(
            emb_entry, root_seed
        )
        for clf_entry in classifier_grids:
            clf_kwargs = {_CLASSIFIER_KEYS[k]: v for k, v in clf_entry.items()}
            for options in option_grids:
                candidates.append(MethodDescriptor(
                    quantifier=quantifier, embedder=built,
                    classifier=ClassifierConfig(**clf_kwargs), **options,
                ))
    return candidates


def load_config(path):
    """Parse and validate an experiment config; paths must exist."""
    with open(path, "rb") as handle:
        raw = handle.read()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        document = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError("%s: invalid YAML (%s)" % (path, exc)) from exc
    document = _require_mapping(document, "config")
    _check_keys(document, ("seed", "dataset", "split", "sampling", "methods"),
                "config")

    if "seed" not in document:
        raise ConfigError("config must set a seed")
    seed = int(document["seed"])

    dataset = _require_mapping(document.get("dataset"), "dataset")
    _check_keys(dataset, ("edges", "features", "labels"), "dataset")
    for key in ("edges", "features", "labels"):
        if key not in dataset:
            raise ConfigError("dataset must name an %s file" % key)
        resolved = os.path.join(os.path.dirname(os.path.abspath(path)),
                                str(dataset[key]))
        if not os.path.exists(resolved):
            raise ConfigError("dataset %s file does not exist: %s"
                              % (key, resolved))
        dataset[key] = resolved

    split = _require_mapping(document.get("split", {}), "split")
    _check_keys(split, ("folds", "train", "calibration", "validation"), "split")
    plan = SplitPlan(
        fold_count=split.get("folds", 5),
        train_fraction=split.get("train", 0.625),
        calibration_fraction=split.get("calibration", 0.125),
        validation_fraction=split.get("validation", 0.25),
    )

    sampling = _require_mapping(document.get("sampling", {}), "sampling")
    _check_keys(sampling, ("grid", "grid_step", "instances", "sample_size"),
                "sampling")
    if "grid" in sampling and "grid_step" in sampling:
        raise ConfigError("sampling takes either grid or grid_step, not both")
    if "grid" in sampling:
        grid = tuple(float(p) for p in sampling["grid"])
    elif "grid_step" in sampling:
        step = float(sampling["grid_step"])
        count = round(1.0 / step)
        if not (0.0 < step <= 1.0) or abs(count * step - 1.0) > 1e-9:
            raise ConfigError("grid_step must divide 1 evenly")
        grid = tuple(round(i * step, 10) for i in range(count + 1))
    else:
        grid = None
    app_kwargs = {"instances": sampling.get("instances", 100),
                  "sample_size": sampling.get("sample_size")}
    if grid is not None:
        app_kwargs["prevalence_grid"] = grid
    app = APPConfig(**app_kwargs)

    methods_section = _require_mapping(document.get("methods"), "methods")
    if not methods_section:
        raise ConfigError("config defines no methods")
    methods = []
    for name, body in methods_section.items():
        candidates = _method_candidates(str(name), body, seed)
        if not candidates:
            raise ConfigError("method %r expands to no candidates" % name)
        methods.append((str(name), candidates))

    return ExperimentConfig(seed=seed, dataset=dataset, plan=plan, app=app,
                            methods=methods, digest=digest)

"""Command line entry points.

Four subcommands: `synth` writes a synthetic dataset, `embed` computes and
stores node embeddings, `evaluate` runs the full cross-validated protocol
from a config file, and `ablate` reruns a configured method with one
component swapped out at a time.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, io
from ._backend import backend_name
from .config import ConfigError, load_config
from .graph import GraphError
from .pipeline import (AGGREGATIVE_QUANTIFIERS, MethodDescriptor,
                       PipelineError)
from .protocol import (ProtocolError, run_cross_validation, write_diagonal_csv,
                       write_report_csv, write_summary_json)
from .readout import ReadoutError
from .reservoir import ReservoirConfig, ReservoirError, default_iteration_count, \
    embed_nodes, init_reservoir
from .quantify import QuantifierError
from .synth import SynthError, block_sizes, generate_sbm

logger = logging.getLogger(__name__)

_KNOWN_ERRORS = (ConfigError, GraphError, PipelineError, ProtocolError,
                 QuantifierError, ReadoutError, ReservoirError, SynthError,
                 io.DataFormatError, OSError)


def _add_synth(subparsers):
    p = subparsers.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=300)
    p.add_argument("--positive-fraction", type=float, default=0.3)
    p.add_argument("--p-in", type=float, default=0.05,
                   help="within-class edge probability")
    p.add_argument("--p-out", type=float, default=0.02,
                   help="cross-class edge probability")
    p.add_argument("--feature-dim", type=int, default=8)
    p.add_argument("--separation", type=float, default=2.0,
                   help="distance between class feature means")
    p.add_argument("--noise", type=float, default=1.0)
    p.set_defaults(command=_run_synth)


def _run_synth(args):
    negative, positive = block_sizes(args.nodes, args.positive_fraction)
    g, features, labels = generate_sbm(
        negative, positive, args.p_in, args.p_out,
        feature_dim=args.feature_dim, separation=args.separation,
        noise=args.noise, seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_edges(out / "edges.txt", g)
    io.write_features(out / "features.csv", features)
    from .graph import LabelSet
    io.write_labels(out / "labels.csv", LabelSet.from_binary(labels))
    meta = {
        "nodes": g.node_count,
        "edges": g.edge_count,
        "positive_fraction": float(np.mean(labels)),
        "p_in": args.p_in,
        "p_out": args.p_out,
        "feature_dim": args.feature_dim,
        "separation": args.separation,
        "noise": args.noise,
        "seed": args.seed,
    }
    with open(out / "meta.json", "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print("wrote %d nodes, %d edges, prevalence %.3f to %s"
          % (g.node_count, g.edge_count, meta["positive_fraction"], out))
    return 0


def _add_embed(subparsers):
    p = subparsers.add_parser("embed", help="compute and store node embeddings")
    p.add_argument("--edges", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--relative-radius", action="store_true",
                   help="scale the radius target by the adjacency radius")
    p.add_argument("--input-scale", type=float, default=1.0)
    p.add_argument("--bias-scale", type=float, default=0.0)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(command=_run_embed)


def _run_embed(args):
    from .graph import build_graph, check_features, spectral_radius

    features = io.load_features(args.features)
    edges = io.load_edges(args.edges)
    node_count = features.shape[0]
    if edges.size and edges.max() >= node_count:
        raise io.DataFormatError(
            "edge references node %d but features cover %d nodes"
            % (int(edges.max()), node_count)
        )
    g = build_graph(edges, node_count)
    features = check_features(features, node_count)
    config = ReservoirConfig(
        embedding_dim=args.dim, target_radius=args.radius,
        input_scale=args.input_scale, bias_scale=args.bias_scale,
        iterations=args.iterations, seed=args.seed,
        relative_radius=args.relative_radius,
    )
    adjacency_radius = spectral_radius(g) if args.relative_radius else None
    weights = init_reservoir(config, features.shape[1],
                             adjacency_radius=adjacency_radius)
    steps = default_iteration_count(g, config.iterations)
    embeddings = embed_nodes(g, features, weights, steps)
    io.save_embeddings(args.out, embeddings.matrix)
    print("embedded %d nodes into %d dims in %d iterations (%s backend)"
          % (g.node_count, args.dim, steps, backend_name()))
    return 0


def _add_shared_eval_flags(p):
    p.add_argument("--config", required=True, help="experiment YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--method", action="append", default=None,
                   help="run only this configured method (repeatable)")
    p.add_argument("--threads", type=int, default=1,
                   help="method families evaluated in parallel")
    p.add_argument("--label-fraction", type=float, default=1.0,
                   help="subsample the training labels to this fraction")


def _add_evaluate(subparsers):
    p = subparsers.add_parser("evaluate",
                              help="cross-validated protocol from a config")
    _add_shared_eval_flags(p)
    p.set_defaults(command=_run_evaluate)


def _add_ablate(subparsers):
    p = subparsers.add_parser(
        "ablate",
        help="rerun the first configured method with one component swapped",
    )
    _add_shared_eval_flags(p)
    p.add_argument("--component", required=True,
                   choices=("embedder", "quantifier"),
                   help="which component to swap out")
    p.set_defaults(command=_run_ablate)


def _load_ground_truth(cfg):
    g, features, labels = io.load_dataset(
        cfg.dataset["edges"], cfg.dataset["features"], cfg.dataset["labels"]
    )
    if labels.labeled_count() != g.node_count:
        raise ProtocolError(
            "evaluation needs ground-truth labels for every node; "
            "%d of %d are unlabeled"
            % (g.node_count - labels.labeled_count(), g.node_count)
        )
    return g, features, labels.values.astype(np.int8)


def _execute_methods(cfg, methods, g, features, y, seed, args):
    cache = {}

    def run(item):
        name, candidates = item
        logger.info("evaluating %s (%d candidates)", name, len(candidates))
        return run_cross_validation(
            g, features, y, name, candidates, plan=cfg.plan, app=cfg.app,
            seed=seed, label_fraction=args.label_fraction, cache=cache,
        )

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            reports = list(pool.map(run, methods))
    else:
        reports = [run(item) for item in methods]
    return reports


def _write_outputs(out_dir, cfg, seed, args, reports, extra_manifest=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out / "report.csv")
    write_summary_json(reports, out / "summary.json")
    diagonal_files = []
    for report in reports:
        filename = "diagonal_%s.csv" % report.method.replace("/", "-")
        write_diagonal_csv(report, out / filename)
        diagonal_files.append(filename)
    manifest = {
        "config_sha256": cfg.digest,
        "seed": seed,
        "label_fraction": args.label_fraction,
        "methods": [report.method for report in reports],
        "outputs": ["report.csv", "summary.json"] + diagonal_files,
        "package_version": __version__,
        "backend": backend_name(),
        "numpy_version": np.__version__,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(out / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    for report in reports:
        print("%-30s mae %.4f +- %.4f  (%d records, %d skipped)"
              % (report.method, report.mean_error(), report.error_std(),
                 len(report.records), report.skipped))
    return 0


def _select_methods(cfg, requested):
    if not requested:
        return cfg.methods
    by_name = dict(cfg.methods)
    missing = [name for name in requested if name not in by_name]
    if missing:
        raise ConfigError("unknown method(s): %s" % ", ".join(missing))
    return [(name, by_name[name]) for name in requested]


def _run_evaluate(args):
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    methods = _select_methods(cfg, args.method)
    g, features, y = _load_ground_truth(cfg)
    reports = _execute_methods(cfg, methods, g, features, y, seed, args)
    return _write_outputs(args.out, cfg, seed, args, reports)


def _swap_quantifier(descriptor, quantifier):
    return MethodDescriptor(
        quantifier=quantifier, embedder=descriptor.embedder,
        classifier=descriptor.classifier,
        sld_tolerance=descriptor.sld_tolerance,
        sld_max_iterations=descriptor.sld_max_iterations,
        bin_count=descriptor.bin_count, bin_counts=descriptor.bin_counts,
        alpha_step=descriptor.alpha_step,
    )


def _swap_embedder(descriptor):
    return MethodDescriptor(
        quantifier=descriptor.quantifier, embedder="passthrough",
        classifier=descriptor.classifier,
        sld_tolerance=descriptor.sld_tolerance,
        sld_max_iterations=descriptor.sld_max_iterations,
        bin_count=descriptor.bin_count, bin_counts=descriptor.bin_counts,
        alpha_step=descriptor.alpha_step,
    )


def _run_ablate(args):
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    source = _select_methods(cfg, args.method)
    base_name, base_candidates = next(
        ((name, cands) for name, cands in source
         if cands[0].baseline is None),
        (None, None),
    )
    if base_name is None:
        raise ConfigError("ablation needs a configured embedding-based method")

    if args.component == "embedder":
        swapped = []
        seen = set()
        for d in base_candidates:
            candidate = _swap_embedder(d)
            key = repr(candidate)
            if key not in seen:
                seen.add(key)
                swapped.append(candidate)
        methods = [
            (base_name, base_candidates),
            ("%s[embedder=passthrough]" % base_name, swapped),
        ]
    else:
        methods = [(base_name, base_candidates)]
        for quantifier in AGGREGATIVE_QUANTIFIERS:
            if quantifier == base_candidates[0].quantifier:
                continue
            methods.append((
                "%s[quantifier=%s]" % (base_name, quantifier),
                [_swap_quantifier(d, quantifier) for d in base_candidates],
            ))

    g, features, y = _load_ground_truth(cfg)
    reports = _execute_methods(cfg, methods, g, features, y, seed, args)
    return _write_outputs(args.out, cfg, seed, args, reports,
                          extra_manifest={"ablation": args.component,
                                          "ablated_method": base_name})


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="netquant",
        description="class prevalence estimation for graph node subsets",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="log protocol progress")
    parser.add_argument("--version", action="version",
                        version="netquant %s" % __version__)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    _add_synth(subparsers)
    _add_embed(subparsers)
    _add_evaluate(subparsers)
    _add_ablate(subparsers)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.command(args)
    except _KNOWN_ERRORS as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

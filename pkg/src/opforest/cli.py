"""Command-line surface.

Subcommands: train, classify, cluster, grid-search, benchmark, convert.
Every command is deterministic given ``--seed`` and its inputs; benchmark
timings are the one wall-clock exception and can be dropped with
``--no-timings``. Errors leave a machine-readable JSON object on stderr
and exit with 2 (configuration), 3 (data), or 4 (runtime).
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import evaluation, plots
from .clustering import assignments_csv, find_best_k
from .datasets import (Dataset, SplitSpec, load_csv, load_opf_binary,
                       minmax_scale, save_csv, save_opf_binary,
                       stratified_split)
from .errors import ConfigError, DataError, OpfError
from .fuzzy import (FUZZY_MODEL_MAGIC, load_fuzzy_model, save_fuzzy_model,
                    train_fuzzy)
from .graph import METRICS
from .supervised import (MODEL_MAGIC, classify_batch, load_model, save_model,
                         train)

log = logging.getLogger("opforest")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _fail(kind: str, message: str, code: int):
    sys.stderr.write(json.dumps({"error": {"kind": kind,
                                           "message": message}}) + "\n")
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail("config", str(exc), EXIT_CONFIG)
        except DataError as exc:
            _fail("data", str(exc), EXIT_DATA)
        except OSError as exc:
            _fail("data", str(exc), EXIT_DATA)
        except OpfError as exc:
            _fail("runtime", str(exc), EXIT_RUNTIME)
        except Exception as exc:  # noqa: BLE001
            _fail("runtime", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
    return wrapper


def _load_dataset(path: str, header: bool, scale: bool) -> Dataset:
    if str(path).lower().endswith(".csv"):
        dataset = load_csv(path, has_header=header)
    else:
        dataset = load_opf_binary(path)
    return minmax_scale(dataset) if scale else dataset


def _parse_split(text: str, seed: int) -> SplitSpec:
    parts = [float(p) for p in text.replace(":", "/").split("/")]
    if len(parts) != 3:
        raise ConfigError(f"--split needs three fractions, got {text!r}")
    if sum(parts) > 1.5:  # percentages
        parts = [p / 100.0 for p in parts]
    return SplitSpec(parts[0], parts[1], parts[2], seed)


def _parse_grid(text: str, cast):
    try:
        values = tuple(cast(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"malformed grid {text!r}") from None
    if not values:
        raise ConfigError(f"empty grid {text!r}")
    return values


_metric_option = click.option("--metric", default="euclidean",
                              type=click.Choice(METRICS), show_default=True)
_header_option = click.option("--header", is_flag=True,
                              help="CSV input has a header line.")
_scale_option = click.option("--scale", is_flag=True,
                             help="Min-max scale features to [0, 1] on load.")
_figures_option = click.option("--no-figures", is_flag=True,
                               help="Skip rendering companion figures.")


@click.group()
@click.version_option(package_name="opforest")
def main():
    """Optimum-path forest classifiers and their benchmark harness."""
    level = os.environ.get("OPF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("train")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--sigma", type=float, default=None,
              help="Train the fuzzy variant with this membership lower "
                   "bound (requires --kmax).")
@click.option("--kmax", type=int, default=None,
              help="Neighborhood search budget for the membership densities.")
@click.option("--fast", is_flag=True,
              help="Spanning-tree shortcut training (identical maps when "
                   "all arc weights differ).")
@_metric_option
@_header_option
@_scale_option
@guarded
def train_cmd(input_path, output_path, sigma, kmax, fast, metric, header,
              scale):
    """Train a model and write it to --output."""
    dataset = _load_dataset(input_path, header, scale)
    t0 = time.perf_counter()
    if sigma is not None:
        if kmax is None:
            raise ConfigError("--sigma requires --kmax")
        if fast:
            raise ConfigError("--fast applies to the standard variant only")
        model = train_fuzzy(dataset, sigma, kmax, metric)
        save_fuzzy_model(model, output_path)
        base = model.base
    else:
        base = train(dataset, metric, fast=fast)
        save_model(base, output_path)
    elapsed = time.perf_counter() - t0
    finite = base.cost[np.isfinite(base.cost)]
    click.echo(f"trained {len(base)} samples: prototypes={len(base.prototypes)} "
               f"max_cost={float(finite.max())!r} seconds={elapsed:.3f}")


def _load_any_model(path: str):
    magic = Path(path).read_bytes()[:4]
    if magic == FUZZY_MODEL_MAGIC:
        return load_fuzzy_model(path).base
    if magic == MODEL_MAGIC:
        return load_model(path)
    raise DataError(f"{path}: unrecognized model container {magic!r}")


@main.command("classify")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--no-truth", is_flag=True,
              help="Ignore input labels; skip the metrics artifact.")
@_header_option
@_scale_option
@guarded
def classify_cmd(input_path, model_path, output_path, no_truth, header,
                 scale):
    """Predict labels; writes a CSV (id, predicted, cost) and, when truth
    labels are available, a metrics JSON next to it."""
    model = _load_any_model(model_path)
    dataset = _load_dataset(input_path, header, scale)
    if dataset.n_features != model.training.n_features:
        raise DataError(f"model expects {model.training.n_features} "
                        f"features, input has {dataset.n_features}")
    labels, costs = classify_batch(model, dataset)
    out = Path(output_path)
    with out.open("w", encoding="utf-8") as fh:
        fh.write("id,predicted,cost\n")
        for i in range(len(dataset)):
            fh.write(f"{i},{int(labels[i])},{repr(float(costs[i]))}\n")
    if not no_truth:
        metrics = evaluation.compute_metrics(dataset.labels, labels,
                                             model.training.n_classes)
        metrics_path = out.with_suffix(".metrics.json")
        metrics_path.write_text(json.dumps(metrics.to_dict(), indent=2)
                                + "\n", encoding="utf-8")
        click.echo(f"accuracy={metrics.accuracy!r} -> {metrics_path}")
    click.echo(f"predictions -> {out}")


@main.command("cluster")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--kmax", type=int, default=100, show_default=True)
@_metric_option
@_header_option
@_scale_option
@_figures_option
@guarded
def cluster_cmd(input_path, output_path, kmax, metric, header, scale,
                no_figures):
    """Best-k clustering; writes assignments CSV, a summary JSON, and a
    scatter figure for 2-feature data."""
    dataset = _load_dataset(input_path, header, scale)
    k_star, model = find_best_k(dataset, kmax, metric)
    out = Path(output_path)
    out.write_text(assignments_csv(model), encoding="utf-8")
    summary = {"k_star": k_star, "n_clusters": model.n_clusters,
               "roots": sorted(model.root)}
    out.with_suffix(".summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    if not no_figures:
        plots.save_cluster_scatter(dataset, model, out.with_suffix(".png"))
    click.echo(f"k_star={k_star} clusters={model.n_clusters} -> {out}")


@main.command("grid-search")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--split", default="0.6/0.2/0.2", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--k-grid", default=",".join(map(str, evaluation.DEFAULT_K_GRID)),
              show_default=True)
@click.option("--sigma-grid",
              default=",".join(map(str, evaluation.DEFAULT_SIGMA_GRID)),
              show_default=True)
@_metric_option
@_header_option
@_scale_option
@_figures_option
@guarded
def grid_search_cmd(input_path, output_path, split, seed, k_grid, sigma_grid,
                    metric, header, scale, no_figures):
    """Tune (k_max, sigma) on the evaluation part of a split; writes the
    heatmap CSV, the best-pair JSON, and a heatmap figure."""
    dataset = _load_dataset(input_path, header, scale)
    spec = _parse_split(split, seed)
    train_set, eval_set, _ = stratified_split(dataset, spec)
    report = evaluation.grid_search(train_set, eval_set,
                                    _parse_grid(k_grid, int),
                                    _parse_grid(sigma_grid, float), metric)
    out = Path(output_path)
    out.write_text(report.to_csv(), encoding="utf-8")
    out.with_suffix(".best.json").write_text(
        json.dumps(report.best_to_dict(), indent=2) + "\n", encoding="utf-8")
    if not no_figures:
        plots.save_grid_heatmap(report, out.with_suffix(".png"))
    click.echo(f"best k_max={report.best_k_max} sigma={report.best_sigma:g} "
               f"accuracy={report.best_accuracy!r} -> {out}")


@main.command("benchmark")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--runs", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--split", default="0.6/0.2/0.2", show_default=True)
@click.option("--k-grid", default=",".join(map(str, evaluation.DEFAULT_K_GRID)),
              show_default=True)
@click.option("--sigma-grid",
              default=",".join(map(str, evaluation.DEFAULT_SIGMA_GRID)),
              show_default=True)
@click.option("--classifiers", default=",".join(evaluation.CLASSIFIER_NAMES),
              show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Concurrent cross-validation runs.")
@click.option("--no-timings", is_flag=True,
              help="Omit wall-clock fields for byte-stable reports.")
@_metric_option
@_header_option
@_scale_option
@_figures_option
@guarded
def benchmark_cmd(input_path, output_path, runs, seed, split, k_grid,
                  sigma_grid, classifiers, jobs, no_timings, metric, header,
                  scale, no_figures):
    """Cross-validated comparison; writes the experiment report JSON and a
    per-run accuracy figure."""
    if runs < 1:
        raise ConfigError(f"--runs must be at least 1, got {runs}")
    dataset = _load_dataset(input_path, header, scale)
    spec = _parse_split(split, seed)
    names = tuple(c.strip() for c in classifiers.split(",") if c.strip())
    report = evaluation.run_cv_experiment(
        dataset, runs, spec, classifiers=names,
        k_grid=_parse_grid(k_grid, int),
        sigma_grid=_parse_grid(sigma_grid, float),
        metric=metric, jobs=jobs)
    out = Path(output_path)
    out.write_text(report.to_json(include_timings=not no_timings),
                   encoding="utf-8")
    if not no_figures:
        plots.save_benchmark_boxplot(report, out.with_suffix(".png"))
    for name, agg in report.aggregate().items():
        click.echo(f"{name}: mean_accuracy={agg['mean_accuracy']!r} "
                   f"std={agg['std_accuracy']!r}")
    click.echo(f"report -> {out}")


@main.command("convert")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--format", "target_format", required=True,
              type=click.Choice(["csv", "opf"]))
@_header_option
@guarded
def convert_cmd(input_path, output_path, target_format, header):
    """Translate a dataset between CSV and the LibOPF binary layout."""
    dataset = _load_dataset(input_path, header, scale=False)
    if target_format == "csv":
        save_csv(dataset, output_path)
    else:
        save_opf_binary(dataset, output_path)
    click.echo(f"{len(dataset)} samples, {dataset.n_features} features, "
               f"{dataset.n_classes} classes -> {output_path}")


if __name__ == "__main__":
    main()

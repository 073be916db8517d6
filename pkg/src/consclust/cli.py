"""Command line interface: simulate, cluster, benchmark, score.

Option resolution order: command line flags, then (for --threads) the
CONSCLUST_THREADS environment variable, then the --config YAML file, then
built-in defaults. Exit codes: 0 success, 2 bad input or configuration,
3 numerical failure.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .bench import (
    BENCHMARK_COLUMNS,
    REPEAT_COLUMNS,
    format_table,
    run_benchmark,
    scenario_from_dict,
)
from .calibration import SCORE_KINDS
from .distance import DataMatrix, standardize_columns
from .exceptions import InputError, NumericalError
from .matrixio import (
    build_report,
    read_assignment,
    read_data_matrix,
    read_json,
    write_assignment,
    write_data_matrix,
    write_json,
    write_matrix,
    write_score_grid,
)
from .metrics import adjusted_rand_index, jaccard_index, rand_index
from .pipeline import consensus_run
from .plots import calibration_curve_svg, consensus_heatmap_svg
from .simulate import BlockCorrelation, SimulationSpec, simulate_dataset

_METHOD_ALIASES = {"sparcl": "sparse"}


def _fail_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(2) from None
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(3) from None

    return wrapper


def _load_config(path, allowed: set[str]) -> dict:
    if path is None:
        return {}
    payload = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if payload is None:
        return {}
    if not isinstance(payload, dict):
        raise InputError(f"{path}: config must be a mapping")
    unknown = set(payload) - allowed
    if unknown:
        raise InputError(f"{path}: unknown config key(s): {sorted(unknown)}")
    return payload


def _pick(flag_value, config: dict, key: str, fallback):
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return fallback


def _parse_ints(text, name: str) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(part) for part in str(text).split(",") if part != "")
    except ValueError:
        raise InputError(f"{name} must be comma-separated integers") from None


def _parse_floats(text, name: str) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(part) for part in str(text).split(",") if part != "")
    except ValueError:
        raise InputError(f"{name} must be comma-separated numbers") from None


def _parse_clusters(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    text = str(text)
    if "-" in text and "," not in text:
        lo_txt, _, hi_txt = text.partition("-")
        try:
            lo, hi = int(lo_txt), int(hi_txt)
        except ValueError:
            raise InputError(
                "--clusters must look like '2-20' or '2,3,4'"
            ) from None
        if hi < lo:
            raise InputError(f"--clusters range {text!r} is empty")
        return tuple(range(lo, hi + 1))
    return _parse_ints(text, "--clusters")


@click.group()
def main():
    """Consensus clustering with calibrated attribute weighting."""


_SIMULATE_KEYS = {
    "sizes",
    "attributes",
    "explained",
    "contributing",
    "correlation",
    "block_size_range",
    "edge_weight",
    "extra_edge_prob",
    "diagonal_boost",
    "seed",
    "delimiter",
}


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--sizes", default=None, help="Cluster sizes, e.g. 20,50,30,10,40.")
@click.option("--attributes", type=int, default=None)
@click.option("--explained", type=float, default=None, help="Explained share in [0,1].")
@click.option(
    "--contributing",
    type=int,
    default=None,
    help="Attributes carrying the explained share (default: all).",
)
@click.option(
    "--correlation",
    type=click.Choice(["independent", "blocks"]),
    default=None,
)
@click.option("--block-size-range", default=None, help="e.g. 3,10")
@click.option("--edge-weight", type=float, default=None)
@click.option("--extra-edge-prob", type=float, default=None)
@click.option("--diagonal-boost", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--delimiter", type=click.Choice(["tab", "comma"]), default=None)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@_fail_codes
def simulate(
    out,
    sizes,
    attributes,
    explained,
    contributing,
    correlation,
    block_size_range,
    edge_weight,
    extra_edge_prob,
    diagonal_boost,
    seed,
    delimiter,
    config,
):
    """Draw one clustered dataset and write data, truth, and a manifest."""
    cfg = _load_config(config, _SIMULATE_KEYS)
    sizes = _parse_ints(_pick(sizes, cfg, "sizes", "20,50,30,10,40"), "--sizes")
    attributes = int(_pick(attributes, cfg, "attributes", 10))
    explained = float(_pick(explained, cfg, "explained", 0.6))
    contributing = _pick(contributing, cfg, "contributing", None)
    correlation_name = _pick(correlation, cfg, "correlation", "independent")
    seed = int(_pick(seed, cfg, "seed", 0))
    delimiter = _pick(delimiter, cfg, "delimiter", "tab")
    model = None
    correlation_echo: dict | str = "independent"
    if correlation_name == "blocks":
        size_range = _parse_ints(
            _pick(block_size_range, cfg, "block_size_range", "3,10"),
            "--block-size-range",
        )
        if len(size_range) != 2:
            raise InputError("--block-size-range needs two integers")
        model = BlockCorrelation(
            size_range=(size_range[0], size_range[1]),
            edge_weight=float(_pick(edge_weight, cfg, "edge_weight", 0.5)),
            extra_edge_prob=float(
                _pick(extra_edge_prob, cfg, "extra_edge_prob", 0.1)
            ),
            diagonal_boost=float(_pick(diagonal_boost, cfg, "diagonal_boost", 0.1)),
        )
        correlation_echo = {
            "kind": "blocks",
            "size_range": list(model.size_range),
            "edge_weight": model.edge_weight,
            "extra_edge_prob": model.extra_edge_prob,
            "diagonal_boost": model.diagonal_boost,
        }
    spec = SimulationSpec.uniform(
        cluster_sizes=sizes,
        n_attributes=attributes,
        explained=explained,
        contributing=None if contributing is None else int(contributing),
        correlation=model,
        seed=seed,
    )
    dataset = simulate_dataset(spec)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_data_matrix(out_dir / "data.tsv", dataset.data, delimiter=delimiter)
    write_assignment(
        out_dir / "truth.tsv",
        dataset.data.item_ids,
        dataset.truth.labels,
        delimiter=delimiter,
    )
    manifest = {
        "kind": "simulated",
        "spec": {
            "cluster_sizes": list(sizes),
            "attributes": attributes,
            "explained": explained,
            "contributing": contributing,
            "correlation": correlation_echo,
            "seed": seed,
        },
        "files": {"data": "data.tsv", "truth": "truth.tsv"},
        "delimiter": delimiter,
        "contributing_attributes": list(dataset.contributing),
    }
    write_json(out_dir / "manifest.json", manifest)
    click.echo(
        f"simulated {spec.n_items} items x {attributes} attributes"
        f" ({len(sizes)} clusters) -> {out_dir}"
    )


_CLUSTER_KEYS = {
    "method",
    "metric",
    "algorithm",
    "linkage",
    "subsamples",
    "fraction",
    "seed",
    "clusters",
    "penalties",
    "calibrate_by",
    "pac_bounds",
    "silhouette",
    "standardize",
    "threads",
    "dump_matrices",
    "plots",
    "delimiter",
}


@main.command()
@click.option(
    "--input",
    "input_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option(
    "--method",
    type=click.Choice(["unweighted", "sparse", "sparcl", "cosa"]),
    default=None,
)
@click.option("--metric", type=click.Choice(["squared", "absolute"]), default=None)
@click.option(
    "--algorithm", type=click.Choice(["hierarchical", "pam"]), default=None
)
@click.option(
    "--linkage", type=click.Choice(["single", "complete", "average"]), default=None
)
@click.option("--subsamples", type=int, default=None)
@click.option("--fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--clusters", default=None, help="Range '2-20' or list '2,3,4'.")
@click.option(
    "--penalties", default=None, help="'auto' or comma-separated values."
)
@click.option("--calibrate-by", type=click.Choice(list(SCORE_KINDS)), default=None)
@click.option("--pac-bounds", default=None, help="e.g. 0.1,0.9")
@click.option("--silhouette/--no-silhouette", "silhouette", default=None)
@click.option(
    "--standardize", type=click.Choice(["auto", "on", "off"]), default=None
)
@click.option("--threads", type=int, default=None, envvar="CONSCLUST_THREADS")
@click.option("--dump-matrices/--no-dump-matrices", "dump_matrices", default=None)
@click.option("--plots/--no-plots", "plots", default=None)
@click.option("--delimiter", type=click.Choice(["tab", "comma"]), default=None)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@_fail_codes
def cluster(
    input_path,
    out,
    method,
    metric,
    algorithm,
    linkage,
    subsamples,
    fraction,
    seed,
    clusters,
    penalties,
    calibrate_by,
    pac_bounds,
    silhouette,
    standardize,
    threads,
    dump_matrices,
    plots,
    delimiter,
    config,
):
    """Run the consensus grid on a delimited items-by-attributes matrix."""
    cfg = _load_config(config, _CLUSTER_KEYS)
    method = _METHOD_ALIASES.get(
        _pick(method, cfg, "method", "unweighted"),
        _pick(method, cfg, "method", "unweighted"),
    )
    metric = _pick(metric, cfg, "metric", "squared")
    algorithm = _pick(algorithm, cfg, "algorithm", "hierarchical")
    linkage = _pick(linkage, cfg, "linkage", "complete")
    subsamples = int(_pick(subsamples, cfg, "subsamples", 100))
    fraction = float(_pick(fraction, cfg, "fraction", 0.5))
    seed = int(_pick(seed, cfg, "seed", 0))
    clusters = _pick(clusters, cfg, "clusters", None)
    cluster_counts = None if clusters is None else _parse_clusters(clusters)
    penalties = _pick(penalties, cfg, "penalties", None)
    if penalties is not None and str(penalties) != "auto":
        penalties = _parse_floats(penalties, "--penalties")
    else:
        penalties = None
    calibrate_by = _pick(calibrate_by, cfg, "calibrate_by", "consensus")
    pac_bounds = _pick(pac_bounds, cfg, "pac_bounds", "0.1,0.9")
    pac_pair = _parse_floats(pac_bounds, "--pac-bounds")
    if len(pac_pair) != 2:
        raise InputError("--pac-bounds needs exactly two numbers")
    silhouette = bool(_pick(silhouette, cfg, "silhouette", False))
    standardize = _pick(standardize, cfg, "standardize", "auto")
    threads = int(_pick(threads, cfg, "threads", 1))
    dump_matrices = bool(_pick(dump_matrices, cfg, "dump_matrices", False))
    plots = bool(_pick(plots, cfg, "plots", True))
    delimiter = _pick(delimiter, cfg, "delimiter", "tab")
    if calibrate_by not in SCORE_KINDS:
        raise InputError(
            f"calibrate_by must be one of {SCORE_KINDS}, got {calibrate_by!r}"
        )

    data = read_data_matrix(input_path)
    standardized = _should_standardize(standardize, input_path)
    if standardized:
        data = DataMatrix(
            standardize_columns(data.values), data.item_ids, data.attribute_ids
        )

    run = consensus_run(
        data,
        method=method,
        metric=metric,
        algorithm=algorithm,
        linkage=linkage,
        n_subsamples=subsamples,
        subsample_fraction=fraction,
        master_seed=seed,
        cluster_counts=cluster_counts,
        penalties=penalties,
        pac_bounds=(pac_pair[0], pac_pair[1]),
        compute_silhouette=silhouette,
        n_jobs=threads,
        keep_matrices=True,
    )

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"score_grid": "score_grid.tsv", "report": "report.json"}
    write_score_grid(out_dir / "score_grid.tsv", run.grid, delimiter=delimiter)
    selection = run.calibration(calibrate_by)
    if selection is not None:
        state = run.state(selection.penalty_index, selection.cluster_index)
        write_assignment(
            out_dir / "assignment.tsv",
            data.item_ids,
            state.assignment.labels,
            delimiter=delimiter,
        )
        files["assignment"] = "assignment.tsv"
        write_matrix(
            out_dir / "consensus_matrix.tsv",
            state.consensus,
            data.item_ids,
            data.item_ids,
            corner="item",
            delimiter=delimiter,
        )
        files["consensus_matrix"] = "consensus_matrix.tsv"
        if plots:
            consensus_heatmap_svg(
                out_dir / "consensus_heatmap.svg",
                state.consensus,
                state.assignment.labels,
            )
            files["consensus_heatmap"] = "consensus_heatmap.svg"
    if plots:
        calibration_curve_svg(
            out_dir / "calibration_curve.svg", run.grid, selection
        )
        files["calibration_curve"] = "calibration_curve.svg"
    if dump_matrices:
        dump_dir = out_dir / "matrices"
        dump_dir.mkdir(exist_ok=True)
        write_matrix(
            dump_dir / "cosampling.tsv",
            run.subsamples.co_sampling,
            data.item_ids,
            data.item_ids,
            corner="item",
            delimiter=delimiter,
        )
        for (li, gi), cell in sorted(run.states.items()):
            tag = f"p{run.penalties[li]:g}_g{run.cluster_counts[gi]}"
            write_matrix(
                dump_dir / f"counts_{tag}.tsv",
                cell.counts,
                data.item_ids,
                data.item_ids,
                corner="item",
                delimiter=delimiter,
            )
            write_matrix(
                dump_dir / f"consensus_{tag}.tsv",
                cell.consensus,
                data.item_ids,
                data.item_ids,
                corner="item",
                delimiter=delimiter,
            )
        files["matrices"] = "matrices/"
    report = build_report(run, calibrate_by, standardized=standardized, files=files)
    write_json(out_dir / "report.json", report)
    status = run.status_for(calibrate_by)
    if selection is None:
        click.echo(f"status: {status}")
    else:
        click.echo(
            f"status: {status}; selected {selection.n_clusters} clusters at"
            f" penalty {selection.penalty:g}"
            f" ({calibrate_by} score {selection.value:.4f})"
        )
    click.echo(f"wrote {out_dir}/report.json")


def _should_standardize(mode: str, input_path) -> bool:
    if mode == "on":
        return True
    if mode == "off":
        return False
    if mode != "auto":
        raise InputError(f"standardize must be auto, on, or off, got {mode!r}")
    manifest_path = Path(input_path).parent / "manifest.json"
    if manifest_path.exists():
        try:
            manifest = read_json(manifest_path)
        except InputError:
            return True
        if manifest.get("kind") == "simulated":
            return False
    return True


@main.command()
@click.option(
    "--scenario",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="YAML scenario description.",
)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--threads", type=int, default=None, envvar="CONSCLUST_THREADS")
@_fail_codes
def benchmark(scenario, out, threads):
    """Run a simulate-cluster-score sweep and write aggregate tables."""
    payload = yaml.safe_load(Path(scenario).read_text(encoding="utf-8"))
    bench_scenario = scenario_from_dict(payload)
    threads = 1 if threads is None else int(threads)

    def progress(done: int, total: int) -> None:
        click.echo(f"repeat {done}/{total}", err=True)

    result = run_benchmark(bench_scenario, n_jobs=threads, progress=progress)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "benchmark.tsv").write_text(
        format_table(result.table, BENCHMARK_COLUMNS), encoding="utf-8"
    )
    (out_dir / "repeats.tsv").write_text(
        format_table(result.records, REPEAT_COLUMNS), encoding="utf-8"
    )
    write_json(
        out_dir / "benchmark.json",
        {"scenario": payload, "aggregates": result.table},
    )
    click.echo(format_table(result.table, BENCHMARK_COLUMNS).rstrip("\n"))
    click.echo(f"wrote {out_dir}/benchmark.tsv")


@main.command()
@click.option(
    "--truth", required=True, type=click.Path(exists=True, dir_okay=False)
)
@click.option(
    "--estimate", required=True, type=click.Path(exists=True, dir_okay=False)
)
@click.option("--json", "as_json", is_flag=True, default=False)
@_fail_codes
def score(truth, estimate, as_json):
    """Agreement metrics between two assignment files (matched by item id)."""
    truth_items, truth_labels = read_assignment(truth)
    est_items, est_labels = read_assignment(estimate)
    if set(truth_items) != set(est_items):
        raise InputError("assignment files cover different item sets")
    position = {item: i for i, item in enumerate(est_items)}
    aligned = np.array(
        [est_labels[position[item]] for item in truth_items], dtype=np.int64
    )
    values = {
        "ari": adjusted_rand_index(truth_labels, aligned),
        "rand": rand_index(truth_labels, aligned),
        "jaccard": jaccard_index(truth_labels, aligned),
    }
    if as_json:
        import json as _json

        click.echo(_json.dumps(values, sort_keys=True))
    else:
        for key in ("ari", "rand", "jaccard"):
            click.echo(f"{key}\t{values[key]:.6f}")


if __name__ == "__main__":
    main(prog_name="consclust", args=sys.argv[1:])

"""Repeat-level benchmark harness: simulate, cluster, score, aggregate.

Every repeat draws one dataset and runs every configured method on it with
a shared subsampling seed, so methods are compared on identical inputs.
Per-repeat failures are recorded and excluded from aggregates instead of
aborting the sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_seed
from .calibration import SCORE_KINDS
from .exceptions import InputError, NumericalError
from .metrics import adjusted_rand_index, jaccard_index, rand_index, weighting_f1
from .pipeline import consensus_run
from .seeding import derived_seed
from .simulate import BlockCorrelation, SimulationSpec, simulate_dataset


@dataclass(frozen=True)
class MethodSpec:
    name: str
    method: str = "unweighted"
    metric: str = "squared"
    algorithm: str = "hierarchical"
    linkage: str = "complete"
    penalties: tuple[float, ...] | None = None
    calibrate_by: tuple[str, ...] = ("consensus",)

    def __post_init__(self):
        for kind in self.calibrate_by:
            if kind not in SCORE_KINDS:
                raise InputError(
                    f"calibrate_by entries must be in {SCORE_KINDS}, got {kind!r}"
                )


@dataclass(frozen=True)
class BenchmarkScenario:
    repeats: int
    seed: int
    cluster_sizes: tuple[int, ...]
    n_attributes: int
    explained: float
    methods: tuple[MethodSpec, ...]
    contributing: int | None = None
    correlation: BlockCorrelation | None = None
    n_subsamples: int = 100
    subsample_fraction: float = 0.5
    cluster_counts: tuple[int, ...] | None = None
    pac_bounds: tuple[float, float] = (0.1, 0.9)

    def __post_init__(self):
        check_positive_int(self.repeats, "repeats")
        check_seed(self.seed)
        if not self.methods:
            raise InputError("need at least one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise InputError("method names must be unique")


@dataclass
class BenchmarkResult:
    scenario: BenchmarkScenario
    records: list[dict] = field(default_factory=list)
    table: list[dict] = field(default_factory=list)

    def aggregate(self, method_name: str, kind: str) -> dict:
        for row in self.table:
            if row["method"] == method_name and row["calibrate_by"] == kind:
                return row
        raise InputError(f"no aggregate row for ({method_name!r}, {kind!r})")

    def values(self, method_name: str, kind: str, column: str) -> np.ndarray:
        out = [
            rec[column]
            for rec in self.records
            if rec["method"] == method_name
            and rec["calibrate_by"] == kind
            and rec["status"] == "ok"
            and rec[column] is not None
        ]
        return np.asarray(out, dtype=np.float64)


def _simulation_spec(scenario: BenchmarkScenario, seed: int) -> SimulationSpec:
    return SimulationSpec.uniform(
        cluster_sizes=scenario.cluster_sizes,
        n_attributes=scenario.n_attributes,
        explained=scenario.explained,
        contributing=scenario.contributing,
        correlation=scenario.correlation,
        seed=seed,
    )


def run_benchmark(
    scenario: BenchmarkScenario, n_jobs: int = 1, progress=None
) -> BenchmarkResult:
    """Run all repeats of a scenario and aggregate medians and IQRs."""
    result = BenchmarkResult(scenario=scenario)
    for r in range(scenario.repeats):
        data_seed = derived_seed(scenario.seed, r, 0)
        run_seed = derived_seed(scenario.seed, r, 1)
        try:
            dataset = simulate_dataset(_simulation_spec(scenario, data_seed))
        except (InputError, NumericalError) as exc:
            for spec in scenario.methods:
                for kind in spec.calibrate_by:
                    result.records.append(
                        _failure_record(r, spec.name, kind, f"simulate: {exc}")
                    )
            continue
        truth = dataset.truth.labels
        for spec in scenario.methods:
            t0 = time.perf_counter()
            try:
                run = consensus_run(
                    dataset.data.values,
                    method=spec.method,
                    metric=spec.metric,
                    algorithm=spec.algorithm,
                    linkage=spec.linkage,
                    n_subsamples=scenario.n_subsamples,
                    subsample_fraction=scenario.subsample_fraction,
                    master_seed=run_seed,
                    cluster_counts=scenario.cluster_counts,
                    penalties=spec.penalties,
                    pac_bounds=scenario.pac_bounds,
                    n_jobs=n_jobs,
                    keep_matrices=False,
                )
            except (InputError, NumericalError) as exc:
                for kind in spec.calibrate_by:
                    result.records.append(
                        _failure_record(r, spec.name, kind, str(exc))
                    )
                continue
            seconds = time.perf_counter() - t0
            for kind in spec.calibrate_by:
                selection = run.calibration(kind)
                if selection is None:
                    result.records.append(
                        _failure_record(
                            r, spec.name, kind, "no_stable_structure"
                        )
                    )
                    continue
                labels = run.state(
                    selection.penalty_index, selection.cluster_index
                ).assignment.labels
                ranking = run.attribute_ranking(selection.penalty_index)
                f1 = None
                if ranking is not None and dataset.contributing:
                    f1 = weighting_f1(dataset.contributing, ranking)
                result.records.append(
                    {
                        "repeat": r,
                        "method": spec.name,
                        "calibrate_by": kind,
                        "status": "ok",
                        "error": "",
                        "n_clusters": selection.n_clusters,
                        "penalty": selection.penalty,
                        "ari": adjusted_rand_index(truth, labels),
                        "rand": rand_index(truth, labels),
                        "jaccard": jaccard_index(truth, labels),
                        "f1": f1,
                        "seconds": seconds,
                    }
                )
        if progress is not None:
            progress(r + 1, scenario.repeats)
    result.table = _aggregate(scenario, result.records)
    return result


def _failure_record(repeat: int, method: str, kind: str, error: str) -> dict:
    return {
        "repeat": repeat,
        "method": method,
        "calibrate_by": kind,
        "status": "failed",
        "error": error,
        "n_clusters": None,
        "penalty": None,
        "ari": None,
        "rand": None,
        "jaccard": None,
        "f1": None,
        "seconds": None,
    }


def _median_iqr(values: list) -> tuple[float, float]:
    arr = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    q25, q50, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
    return float(q50), float(q75 - q25)


def _aggregate(scenario: BenchmarkScenario, records: list[dict]) -> list[dict]:
    table = []
    for spec in scenario.methods:
        for kind in spec.calibrate_by:
            rows = [
                rec
                for rec in records
                if rec["method"] == spec.name and rec["calibrate_by"] == kind
            ]
            ok = [rec for rec in rows if rec["status"] == "ok"]
            entry: dict = {
                "method": spec.name,
                "calibrate_by": kind,
                "repeats": len(rows),
                "failures": len(rows) - len(ok),
            }
            for column in ("n_clusters", "ari", "rand", "jaccard", "f1", "seconds"):
                median, iqr = _median_iqr([rec[column] for rec in ok])
                entry[f"{column}_median"] = median
                entry[f"{column}_iqr"] = iqr
            table.append(entry)
    return table


def scenario_from_dict(payload: dict) -> BenchmarkScenario:
    """Build a scenario from a parsed YAML/JSON mapping (strict keys)."""
    if not isinstance(payload, dict):
        raise InputError("scenario must be a mapping")
    allowed = {"repeats", "seed", "simulation", "consensus", "methods"}
    unknown = set(payload) - allowed
    if unknown:
        raise InputError(f"unknown scenario key(s): {sorted(unknown)}")
    for key in ("repeats", "seed", "simulation", "methods"):
        if key not in payload:
            raise InputError(f"scenario is missing required key {key!r}")

    sim = dict(payload["simulation"])
    sim_allowed = {
        "cluster_sizes",
        "attributes",
        "explained",
        "contributing",
        "correlation",
    }
    unknown = set(sim) - sim_allowed
    if unknown:
        raise InputError(f"unknown simulation key(s): {sorted(unknown)}")
    correlation = _correlation_from(sim.get("correlation", "independent"))

    cons = dict(payload.get("consensus", {}))
    cons_allowed = {
        "subsamples",
        "fraction",
        "min_clusters",
        "max_clusters",
        "cluster_counts",
        "pac_bounds",
    }
    unknown = set(cons) - cons_allowed
    if unknown:
        raise InputError(f"unknown consensus key(s): {sorted(unknown)}")
    if "cluster_counts" in cons:
        cluster_counts = tuple(int(g) for g in cons["cluster_counts"])
    elif "min_clusters" in cons or "max_clusters" in cons:
        lo = int(cons.get("min_clusters", 2))
        hi = int(cons.get("max_clusters", 20))
        cluster_counts = tuple(range(lo, hi + 1))
    else:
        cluster_counts = None

    methods = []
    for entry in payload["methods"]:
        entry = dict(entry)
        m_allowed = {
            "name",
            "method",
            "metric",
            "algorithm",
            "linkage",
            "penalties",
            "calibrate_by",
        }
        unknown = set(entry) - m_allowed
        if unknown:
            raise InputError(f"unknown method key(s): {sorted(unknown)}")
        method = str(entry.get("method", "unweighted"))
        if method == "sparcl":  # accepted alias
            method = "sparse"
        penalties = entry.get("penalties")
        if penalties is not None:
            penalties = tuple(float(v) for v in penalties)
        kinds = entry.get("calibrate_by", ["consensus"])
        if isinstance(kinds, str):
            kinds = [kinds]
        methods.append(
            MethodSpec(
                name=str(entry.get("name", method)),
                method=method,
                metric=str(entry.get("metric", "squared")),
                algorithm=str(entry.get("algorithm", "hierarchical")),
                linkage=str(entry.get("linkage", "complete")),
                penalties=penalties,
                calibrate_by=tuple(str(k) for k in kinds),
            )
        )

    contributing = sim.get("contributing")
    return BenchmarkScenario(
        repeats=int(payload["repeats"]),
        seed=int(payload["seed"]),
        cluster_sizes=tuple(int(s) for s in sim["cluster_sizes"]),
        n_attributes=int(sim["attributes"]),
        explained=float(sim["explained"]),
        contributing=None if contributing is None else int(contributing),
        correlation=correlation,
        methods=tuple(methods),
        n_subsamples=int(cons.get("subsamples", 100)),
        subsample_fraction=float(cons.get("fraction", 0.5)),
        cluster_counts=cluster_counts,
        pac_bounds=tuple(cons.get("pac_bounds", (0.1, 0.9))),
    )


def _correlation_from(value) -> BlockCorrelation | None:
    if value in (None, "independent"):
        return None
    if value == "blocks":
        return BlockCorrelation()
    if isinstance(value, dict):
        entry = dict(value)
        kind = entry.pop("kind", "blocks")
        if kind != "blocks":
            raise InputError(f"unknown correlation kind {kind!r}")
        allowed = {"size_range", "edge_weight", "extra_edge_prob", "diagonal_boost"}
        unknown = set(entry) - allowed
        if unknown:
            raise InputError(f"unknown correlation key(s): {sorted(unknown)}")
        if "size_range" in entry:
            entry["size_range"] = tuple(int(v) for v in entry["size_range"])
        return BlockCorrelation(**entry)
    raise InputError(f"unknown correlation setting {value!r}")


BENCHMARK_COLUMNS = (
    "method",
    "calibrate_by",
    "repeats",
    "failures",
    "n_clusters_median",
    "n_clusters_iqr",
    "ari_median",
    "ari_iqr",
    "rand_median",
    "rand_iqr",
    "jaccard_median",
    "jaccard_iqr",
    "f1_median",
    "f1_iqr",
    "seconds_median",
    "seconds_iqr",
)

REPEAT_COLUMNS = (
    "repeat",
    "method",
    "calibrate_by",
    "status",
    "n_clusters",
    "penalty",
    "ari",
    "rand",
    "jaccard",
    "f1",
    "seconds",
    "error",
)


def _cell(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_table(rows: list[dict], columns) -> str:
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"

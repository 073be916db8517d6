"""Delimited matrix and JSON artifact IO.

Floats are written with `repr`, the shortest form that parses back to the
identical double, so write -> read round-trips are exact. JSON artifacts
are serialized canonically (sorted keys, fixed separators) so identical
results produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._validation import check_labels
from .distance import DataMatrix
from .exceptions import InputError

DELIMITERS = {"tab": "\t", "comma": ","}


def _delimiter_char(delimiter: str) -> str:
    if delimiter in DELIMITERS:
        return DELIMITERS[delimiter]
    if delimiter in DELIMITERS.values():
        return delimiter
    raise InputError(f"delimiter must be tab or comma, got {delimiter!r}")


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_matrix(
    path,
    values: np.ndarray,
    row_ids,
    col_ids,
    corner: str = "id",
    delimiter: str = "tab",
) -> None:
    """Write a labelled matrix with an id header row and id-leading rows."""
    sep = _delimiter_char(delimiter)
    values = np.asarray(values)
    if values.ndim != 2:
        raise InputError("matrix must be 2-dimensional")
    n, p = values.shape
    row_ids = [str(r) for r in row_ids]
    col_ids = [str(c) for c in col_ids]
    if len(row_ids) != n or len(col_ids) != p:
        raise InputError("id lengths do not match the matrix shape")
    integral = np.issubdtype(values.dtype, np.integer)
    lines = [sep.join([corner, *col_ids])]
    for i in range(n):
        row = values[i]
        if integral:
            cells = [str(int(v)) for v in row.tolist()]
        else:
            cells = [repr(float(v)) for v in row.tolist()]
        lines.append(sep.join([row_ids[i], *cells]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sniff(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def read_matrix(path):
    """Read a labelled matrix; returns (values, row_ids, col_ids)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line != ""]
    if len(lines) < 2:
        raise InputError(f"{path}: need a header and at least one row")
    sep = _sniff(lines[0])
    header = lines[0].split(sep)
    col_ids = header[1:]
    width = len(col_ids)
    if width < 1:
        raise InputError(f"{path}: header has no attribute columns")
    row_ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(sep)
        if len(cells) != width + 1:
            raise InputError(
                f"{path}: line {lineno} has {len(cells) - 1} values,"
                f" expected {width}"
            )
        row_ids.append(cells[0])
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
    return np.array(rows, dtype=np.float64), tuple(row_ids), tuple(col_ids)


def write_data_matrix(path, data: DataMatrix, delimiter: str = "tab") -> None:
    write_matrix(
        path,
        data.values,
        data.item_ids,
        data.attribute_ids,
        corner="item",
        delimiter=delimiter,
    )


def read_data_matrix(path) -> DataMatrix:
    values, row_ids, col_ids = read_matrix(path)
    return DataMatrix(values=values, item_ids=row_ids, attribute_ids=col_ids)


def write_assignment(path, item_ids, labels, delimiter: str = "tab") -> None:
    """Two-column item/cluster table."""
    sep = _delimiter_char(delimiter)
    labels = check_labels(labels, n=len(item_ids), name="labels")
    lines = [sep.join(["item", "cluster"])]
    for item, label in zip(item_ids, labels.tolist()):
        lines.append(sep.join([str(item), str(label)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_assignment(path):
    """Returns (item_ids, labels)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line != ""]
    if len(lines) < 2:
        raise InputError(f"{path}: need a header and at least one row")
    sep = _sniff(lines[0])
    items: list[str] = []
    labels: list[int] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(sep)
        if len(cells) != 2:
            raise InputError(f"{path}: line {lineno} must have 2 columns")
        items.append(cells[0])
        try:
            labels.append(int(cells[1]))
        except ValueError:
            raise InputError(
                f"{path}: line {lineno}: cluster must be an integer"
            ) from None
    return tuple(items), check_labels(np.array(labels), name=f"{path} labels")


SCORE_GRID_COLUMNS = (
    "penalty",
    "n_clusters",
    "consensus_score",
    "delta_score",
    "pac_score",
    "silhouette",
    "cdf_area",
    "within_comembers",
    "within_cosampled",
    "between_comembers",
    "between_cosampled",
    "weight_fit_converged",
)


def write_score_grid(path, grid, delimiter: str = "tab") -> None:
    """One row per (penalty, cluster count) cell, column-stable."""
    sep = _delimiter_char(delimiter)
    lines = [sep.join(SCORE_GRID_COLUMNS)]
    for li, penalty in enumerate(grid.penalties):
        for gi, g in enumerate(grid.cluster_counts):
            cells = [
                repr(float(penalty)),
                str(int(g)),
                repr(float(grid.consensus[li, gi])),
                repr(float(grid.delta[li, gi])),
                repr(float(grid.pac[li, gi])),
                repr(float(grid.silhouette[li, gi])),
                repr(float(grid.area[li, gi])),
                str(int(grid.within_comembers[li, gi])),
                str(int(grid.within_cosampled[li, gi])),
                str(int(grid.between_comembers[li, gi])),
                str(int(grid.between_cosampled[li, gi])),
                repr(float(grid.weight_converged[li])),
            ]
            lines.append(sep.join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sanitize_json(obj):
    """Make an object strict-JSON serializable; non-finite floats -> None."""
    if isinstance(obj, dict):
        return {str(k): sanitize_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize_json(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, np.ndarray):
        return [sanitize_json(v) for v in obj.tolist()]
    return obj


def write_json(path, payload: dict) -> None:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(sanitize_json(payload), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None


def build_report(run, by: str, standardized: bool = False, files=None) -> dict:
    """Assemble the machine-readable run summary.

    Contains config echo, every calibration, the winning cell per the
    requested score, attribute ranking (weighted routes), warnings, file
    map, and timings. Timings are wall-clock and vary between runs; all
    other fields are deterministic for a given input and seed.
    """
    calibrations = {}
    for kind, cal in run.calibrations.items():
        calibrations[kind] = (
            None
            if cal is None
            else {
                "penalty": cal.penalty,
                "n_clusters": cal.n_clusters,
                "value": cal.value,
            }
        )
    selection = run.calibration(by)
    ranking = None
    if selection is not None:
        values = run.attribute_ranking(selection.penalty_index)
        if values is not None:
            ranking = {"kind": run.ranking_kind, "values": values}
    return {
        "tool": "consclust",
        "status": run.status_for(by),
        "calibrated_by": by,
        "selection": calibrations[by],
        "calibrations": calibrations,
        "config": {
            "method": run.method,
            "metric": run.metric,
            "algorithm": run.algorithm,
            "linkage": run.linkage,
            "n_subsamples": run.subsamples.n_subsamples,
            "subsample_fraction": run.subsamples.fraction,
            "subsample_size": run.subsamples.size,
            "master_seed": run.subsamples.master_seed,
            "penalties": list(run.penalties),
            "cluster_counts": list(run.cluster_counts),
            "pac_bounds": list(run.pac_bounds),
            "standardized": bool(standardized),
        },
        "data": {"n_items": run.n_items, "n_attributes": run.n_attributes},
        "weight_fit_converged": list(run.grid.weight_converged),
        "attribute_ranking": ranking,
        "warnings": list(run.warnings),
        "files": dict(files or {}),
        "timings": dict(run.timings),
    }

"""
CSV readers and writers.

Dialect: comma-separated, header row required, UTF-8. Parse failures report
`path:row N` (1-based, header is row 1).
"""
import csv
import math
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np
from pydantic import ValidationError

from viraliency.core.exceptions import ParseError
from viraliency.schemas.data import EngagementRecord, PairRecord
from viraliency.schemas.evaluation import GradCheckEntry

PathLike = Union[str, Path]
T = TypeVar("T")

METADATA_HEADER = ["id", "likes", "resubmissions"]
PAIRS_HEADER = ["id_a", "id_b", "label"]
PREDICTIONS_HEADER = ["id_a", "id_b", "label", "logit", "correct"]
ACCURACY_HEADER = ["pairs", "correct", "accuracy"]
LOSS_HEADER = ["iteration", "lr", "loss"]
LOCALIZATION_HEADER = ["id", "precision", "recall", "outcome", "threshold", "pixels_evaluated"]
HISTOGRAM_HEADER = ["bin_lo", "bin_hi", "count", "mass"]
BENCH_HEADER = ["mode", "channels", "height", "width", "repeats", "mean_ms"]
GRADCHECK_HEADER = ["group", "size", "max_rel_error", "tolerance", "oracle", "passed"]


def format_float(value: Optional[float]) -> str:
    """repr() round-trips float64 exactly; None becomes an empty cell."""
    if value is None:
        return ""
    return repr(float(value))


def eta_header(channels: int) -> List[str]:
    return ["iteration"] + [f"eta_{index}" for index in range(channels)]


# =============================================================================
# Generic helpers
# =============================================================================

def _read_rows(
    path: PathLike,
    expected_header: Optional[Sequence[str]],
    parse_row: Callable[[List[str], int], T]
) -> List[T]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None:
                raise ParseError(str(path), "missing header row", position="row 1")
            header = [cell.strip() for cell in header]
            if expected_header is not None and header != list(expected_header):
                raise ParseError(
                    str(path),
                    f"expected header {','.join(expected_header)}, got {','.join(header)}",
                    position="row 1",
                )
            rows = []
            for row_number, row in enumerate(reader, start=2):
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        str(path),
                        f"expected {len(header)} fields, got {len(row)}",
                        position=f"row {row_number}",
                    )
                rows.append(parse_row([cell.strip() for cell in row], row_number))
            return rows
    except FileNotFoundError:
        raise ParseError(str(path), "file not found")
    except UnicodeDecodeError:
        raise ParseError(str(path), "not valid UTF-8")
    except csv.Error as e:
        raise ParseError(str(path), f"malformed CSV ({e})")


def _write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _parse_float(value: str, column: str, path: PathLike, row_number: int) -> float:
    try:
        number = float(value)
    except ValueError:
        raise ParseError(str(path), f"column {column}: {value!r} is not a number", position=f"row {row_number}")
    if not math.isfinite(number):
        raise ParseError(str(path), f"column {column}: non-finite value", position=f"row {row_number}")
    return number


# =============================================================================
# Metadata and pairs
# =============================================================================

def load_metadata_csv(path: PathLike) -> List[EngagementRecord]:
    """Rows `id,likes,resubmissions` as EngagementRecords."""
    def parse(row: List[str], row_number: int) -> EngagementRecord:
        likes = _parse_float(row[1], "likes", path, row_number)
        resubmissions = _parse_float(row[2], "resubmissions", path, row_number)
        try:
            return EngagementRecord(id=row[0], likes=likes, resubmissions=resubmissions)
        except ValidationError as e:
            first = e.errors()[0]
            raise ParseError(str(path), f"{first['loc'][0]}: {first['msg']}", position=f"row {row_number}")

    return _read_rows(path, METADATA_HEADER, parse)


def write_metadata_csv(path: PathLike, records: Iterable[EngagementRecord]) -> Path:
    return _write_rows(
        path,
        METADATA_HEADER,
        ([r.id, format_float(r.likes), format_float(r.resubmissions)] for r in records),
    )


def load_pairs_csv(path: PathLike) -> List[PairRecord]:
    def parse(row: List[str], row_number: int) -> PairRecord:
        try:
            return PairRecord(id_a=row[0], id_b=row[1], label=row[2])
        except ValidationError:
            raise ParseError(
                str(path),
                f"label must be a_more_viral or b_more_viral, got {row[2]!r}",
                position=f"row {row_number}",
            )

    return _read_rows(path, PAIRS_HEADER, parse)


def write_pairs_csv(path: PathLike, pairs: Iterable[PairRecord]) -> Path:
    return _write_rows(path, PAIRS_HEADER, ([p.id_a, p.id_b, p.label.value] for p in pairs))


# =============================================================================
# Training traces
# =============================================================================

def write_loss_csv(path: PathLike, iterations: Sequence[int], lrs: Sequence[float], losses: Sequence[float]) -> Path:
    return _write_rows(
        path,
        LOSS_HEADER,
        ([it, format_float(lr), format_float(loss)] for it, lr, loss in zip(iterations, lrs, losses)),
    )


def write_eta_csv(path: PathLike, iterations: Sequence[int], snapshots: Sequence[np.ndarray]) -> Path:
    channels = len(snapshots[0]) if snapshots else 0
    return _write_rows(
        path,
        eta_header(channels),
        ([it] + [format_float(v) for v in snap] for it, snap in zip(iterations, snapshots)),
    )


def load_eta_csv(path: PathLike) -> List[np.ndarray]:
    """All eta snapshot rows of an eta CSV, in file order."""
    def parse(row: List[str], row_number: int) -> np.ndarray:
        return np.array([_parse_float(v, "eta", path, row_number) for v in row[1:]])

    rows = _read_rows(path, None, parse)
    if not rows:
        raise ParseError(str(path), "no eta snapshots")
    return rows


# =============================================================================
# Reports
# =============================================================================

def write_predictions_csv(path: PathLike, rows: Iterable[Sequence[object]]) -> Path:
    return _write_rows(path, PREDICTIONS_HEADER, rows)


def write_accuracy_csv(path: PathLike, pairs: int, correct: int, accuracy: float) -> Path:
    return _write_rows(path, ACCURACY_HEADER, [[pairs, correct, format_float(accuracy)]])


def write_localization_csv(path: PathLike, rows: Iterable[Sequence[object]]) -> Path:
    return _write_rows(path, LOCALIZATION_HEADER, rows)


def write_histogram_csv(path: PathLike, edges: np.ndarray, counts: np.ndarray) -> Path:
    total = int(np.sum(counts))
    return _write_rows(
        path,
        HISTOGRAM_HEADER,
        (
            [format_float(edges[i]), format_float(edges[i + 1]), int(counts[i]),
             format_float(counts[i] / total if total else 0.0)]
            for i in range(len(counts))
        ),
    )


def write_bench_csv(path: PathLike, rows: Iterable[Sequence[object]]) -> Path:
    return _write_rows(path, BENCH_HEADER, rows)


def write_matrix_csv(path: PathLike, values: np.ndarray) -> Path:
    """Headerless H rows of W values (raw activation maps)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerows([format_float(v) for v in row] for row in np.asarray(values))
    return path


def write_gradcheck_csv(path: PathLike, entries: Iterable[GradCheckEntry]) -> Path:
    return _write_rows(
        path,
        GRADCHECK_HEADER,
        (
            [e.group, e.size, format_float(e.max_rel_error), format_float(e.tolerance), e.oracle, int(e.passed)]
            for e in entries
        ),
    )


def sweep_header(bins: int) -> List[str]:
    return ["eta_init", "accuracy", "eta_mean"] + [f"bin_{index}" for index in range(bins)]


def write_sweep_csv(path: PathLike, rows: Iterable[Sequence[object]], bins: int) -> Path:
    return _write_rows(path, sweep_header(bins), rows)

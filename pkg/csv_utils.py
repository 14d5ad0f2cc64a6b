"""
csv_utils.py
CSV utilities for ReproMC reports.
"""
import csv
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from errors import ReportIOError

PathLike = Union[str, Path]


def read_csv(path: PathLike) -> List[List[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            return list(csv.reader(f))
    except OSError as exc:
        raise ReportIOError(path, f"cannot read CSV: {exc.strerror or exc}") from exc


def write_csv(path: PathLike, rows: Iterable[Sequence], header: Sequence[str] = ()) -> Path:
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            if header:
                writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ReportIOError(path, f"cannot write CSV: {exc.strerror or exc}") from exc
    return path


def read_value_lines(path: PathLike) -> List[str]:
    """One value per line; blank lines and ``#`` comments are skipped."""
    try:
        with open(path, encoding="utf-8") as f:
            return [line.strip() for line in f if line.strip() and not line.lstrip().startswith("#")]
    except OSError as exc:
        raise ReportIOError(path, f"cannot read input: {exc.strerror or exc}") from exc

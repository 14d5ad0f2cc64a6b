"""
json_utils.py
JSON-lines run records for bit-identity audits.
"""
import json
from pathlib import Path
from typing import Iterable, List, Union

from errors import ReportIOError


def pretty_json(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True)


def parse_json(text: str):
    try:
        return json.loads(text)
    except (TypeError, ValueError):
        return None


def append_json_lines(path: Union[str, Path], records: Iterable[dict]) -> int:
    path = Path(path)
    count = 0
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
                count += 1
    except OSError as exc:
        raise ReportIOError(path, f"cannot append records: {exc.strerror or exc}") from exc
    return count


def read_json_lines(path: Union[str, Path]) -> List[dict]:
    """Parse a records file; malformed lines are reported with their line number."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise ReportIOError(path, f"cannot read records: {exc.strerror or exc}") from exc
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        record = parse_json(line)
        if not isinstance(record, dict):
            raise ReportIOError(path, f"line {number} is not a JSON object")
        records.append(record)
    return records

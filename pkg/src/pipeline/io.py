from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from src.contracts.errors import InputFileError
from src.contracts.manifest import Manifest

NUMBER_FORMAT = "%.12g"


@dataclass(frozen=True, slots=True)
class OutputPaths:
    run_dir: Path
    manifest_path: Path
    solution_path: Path
    g_csv_path: Path
    s_star_csv_path: Path
    response_csv_path: Path
    eu_curves_csv_path: Path
    sweep_csv_path: Path
    audit_path: Path


def build_output_paths(
    run_dir: Path,
    *,
    manifest_filename: str = "manifest.json",
    solution_filename: str = "solution.json",
    g_filename: str = "g.csv",
    s_star_filename: str = "s_star.csv",
    response_filename: str = "response.csv",
    eu_curves_filename: str = "eu_curves.csv",
    sweep_filename: str = "sweep.csv",
    audit_filename: str = "audit.json",
) -> OutputPaths:
    run_dir = Path(run_dir)
    return OutputPaths(
        run_dir=run_dir,
        manifest_path=run_dir / manifest_filename,
        solution_path=run_dir / solution_filename,
        g_csv_path=run_dir / g_filename,
        s_star_csv_path=run_dir / s_star_filename,
        response_csv_path=run_dir / response_filename,
        eu_curves_csv_path=run_dir / eu_curves_filename,
        sweep_csv_path=run_dir / sweep_filename,
        audit_path=run_dir / audit_filename,
    )


def manifest_path_ref(path: Path, *, base_dir: Path) -> str:
    path = Path(path)
    base_dir = Path(base_dir)
    try:
        return path.relative_to(base_dir).as_posix()
    except ValueError:
        return str(path)


def write_json_file(path: Path, data: Any) -> None:
    payload = json.dumps(data, indent=2, sort_keys=True, default=str).encode("utf-8")
    _atomic_write_bytes(path, payload)


def read_json_file(path: Path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"missing file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def write_csv_file(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    """Comma separated, '.' decimals, fixed number format; byte-identical for equal data."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([NUMBER_FORMAT % float(value) for value in row])
    _atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))


def read_csv_file(path: Path, *, columns: int) -> list[tuple[float, ...]]:
    """Numeric rows of a CSV with a header line; only the first `columns` fields are read."""
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"missing file: {path}")
    rows: list[tuple[float, ...]] = []
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InputFileError(f"{path}: empty file")
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not field.strip() for field in record):
                continue
            if len(record) < columns:
                raise InputFileError(f"{path}: line {line_no}: expected {columns} columns, got {len(record)}")
            try:
                rows.append(tuple(float(field) for field in record[:columns]))
            except ValueError as exc:
                raise InputFileError(f"{path}: line {line_no}: non-numeric value ({exc})") from exc
    if not rows:
        raise InputFileError(f"{path}: no data rows")
    return rows


def persist_manifest(manifest: Manifest, path: Path) -> None:
    manifest.touch()
    write_json_file(path, manifest.to_dict())


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fd, tmp_name = tempfile.mkstemp(prefix=f"{path.name}.", suffix=".tmp", dir=path.parent)
    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, "wb") as tmp_file:
            tmp_file.write(payload)
            tmp_file.flush()
            try:
                os.fsync(tmp_file.fileno())
            except OSError:
                pass
        os.replace(tmp_path, path)
    finally:
        try:
            tmp_path.unlink(missing_ok=True)
        except OSError:
            pass


__all__ = [
    "NUMBER_FORMAT",
    "OutputPaths",
    "build_output_paths",
    "manifest_path_ref",
    "persist_manifest",
    "read_csv_file",
    "read_json_file",
    "write_csv_file",
    "write_json_file",
]

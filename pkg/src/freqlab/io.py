"""Deterministic file formats: JSON configs and reports, RFC 4180 CSV
tables, and a binary grid container.  All writers go through a
write-temp-rename step so partial files never appear under the final
name, and none of the formats embeds wall-clock data."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import struct
import tempfile
from typing import Any, Iterable, Sequence

import numpy as np

from .solver import DiscreteSolution, PolarGrid

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "atomic_write_bytes",
    "atomic_write_text",
    "canonical_json",
    "config_hash",
    "load_config",
    "read_grid",
    "write_csv",
    "write_grid",
    "write_json",
]

SCHEMA_VERSION = 1

# binary grid container, little-endian:
#   bytes 0..3    magic "FLGR"
#   uint32        format version (1)
#   uint32        grid kind (0 disk, 1 annulus)
#   uint32        n_r
#   uint32        n_theta
#   float64[n_r]  ring radii, ascending
#   float64[n]    nodal values, ring-major; disk grids append one
#                 origin node after the rings
_GRID_MAGIC = b"FLGR"
_GRID_VERSION = 1
_GRID_KINDS = ("disk", "annulus")


class ConfigError(ValueError):
    """A run configuration failed to parse or validate."""


def atomic_write_bytes(path: str, data: bytes) -> str:
    """Write into the target directory under a temporary name and
    rename over the destination."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str, text: str) -> str:
    return atomic_write_bytes(path, text.encode("utf-8"))


def canonical_json(obj: Any) -> str:
    """Stable rendering used both for files and for hashing."""
    return json.dumps(obj, sort_keys=True, indent=2,
                      ensure_ascii=True, allow_nan=False) + "\n"


def config_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def write_json(path: str, obj: Any) -> str:
    return atomic_write_text(path, canonical_json(obj))


def load_config(path: str) -> dict:
    """Parse a JSON run configuration and check its schema version.
    Parse failures report the line and column."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    schema = doc.get("schema")
    if schema is None:
        raise ConfigError(f"{path}: missing required field 'schema'")
    if schema != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: field 'schema' is {schema!r}; this tool reads "
            f"schema {SCHEMA_VERSION}")
    return doc


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str, header: Sequence[str],
              rows: Iterable[Sequence[Any]]) -> str:
    """RFC 4180 table: CRLF line endings, minimal quoting, floats
    rendered with full round-trip precision."""
    buf = _io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL,
                        lineterminator="\r\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def write_grid(path: str, solution: DiscreteSolution) -> str:
    grid = solution.grid
    values = np.asarray(solution.values, dtype="<f8")
    if values.size != grid.node_count:
        raise ValueError(
            f"value count {values.size} does not match the grid's "
            f"{grid.node_count} nodes")
    head = _GRID_MAGIC + struct.pack(
        "<IIII", _GRID_VERSION, _GRID_KINDS.index(grid.kind),
        grid.n_r, grid.n_theta)
    body = grid.radii.astype("<f8").tobytes() + values.tobytes()
    return atomic_write_bytes(path, head + body)


def read_grid(path: str) -> tuple[PolarGrid, np.ndarray]:
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[:4] != _GRID_MAGIC:
        raise ConfigError(f"{path}: not a grid file (bad magic)")
    version, kind_code, n_r, n_theta = struct.unpack_from("<IIII", blob, 4)
    if version != _GRID_VERSION:
        raise ConfigError(f"{path}: unsupported grid format {version}")
    if kind_code >= len(_GRID_KINDS):
        raise ConfigError(f"{path}: unknown grid kind code {kind_code}")
    offset = 4 + 16
    radii = np.frombuffer(blob, dtype="<f8", count=n_r, offset=offset)
    grid = PolarGrid(radii.copy(), n_theta, _GRID_KINDS[kind_code])
    offset += 8 * n_r
    values = np.frombuffer(blob, dtype="<f8", count=grid.node_count,
                           offset=offset)
    if offset + 8 * grid.node_count != len(blob):
        raise ConfigError(f"{path}: trailing bytes after grid payload")
    return grid, values.copy()

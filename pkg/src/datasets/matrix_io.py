"""Matrix I/O: the DMAT binary format and one-row-per-line CSV."""

import csv
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.datasets.matrix import DatasetMatrix
from src.errors import DatasetFormatError, DimensionOverflowError, DomainError

logger = logging.getLogger(__name__)

MAGIC = b"DMAT"
VERSION = 1
# magic, version byte, p and n as little-endian uint64
HEADER = struct.Struct("<4sBQQ")
VALUE_SIZE = 8

# Largest element count whose byte size fits a signed 64-bit offset
MAX_ELEMENTS = (2 ** 63 - 1) // VALUE_SIZE

FORMAT_BINARY = "binary"
FORMAT_CSV = "csv"

_EXTENSIONS = {
    ".dmat": FORMAT_BINARY,
    ".bin": FORMAT_BINARY,
    ".csv": FORMAT_CSV,
}


def infer_format(path: Union[str, Path]) -> str:
    """Guess the matrix format from a file extension."""
    suffix = Path(path).suffix.lower()
    if suffix not in _EXTENSIONS:
        raise DomainError(
            f"Cannot infer matrix format from '{suffix}', expected one of {sorted(_EXTENSIONS)}"
        )
    return _EXTENSIONS[suffix]


def save_matrix(X: DatasetMatrix, path: Union[str, Path], format: Optional[str] = None) -> Path:
    """
    Write a matrix to disk.

    Args:
        X: Matrix to write
        path: Destination file
        format: 'binary' or 'csv' (inferred from the extension when None)

    Returns:
        Path written
    """
    path = Path(path)
    format = format or infer_format(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(X, dtype=np.float64)
    if format == FORMAT_BINARY:
        with open(path, "wb") as handle:
            handle.write(HEADER.pack(MAGIC, VERSION, values.shape[0], values.shape[1]))
            handle.write(values.astype("<f8").tobytes(order="F"))
    elif format == FORMAT_CSV:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            for row in values:
                writer.writerow(repr(float(value)) for value in row)
    else:
        raise DomainError(f"Unknown matrix format: {format}")
    logger.info(f"Wrote {values.shape[0]}x{values.shape[1]} matrix to {path}")
    return path


def load_matrix(path: Union[str, Path], format: Optional[str] = None) -> DatasetMatrix:
    """
    Read a matrix written by save_matrix (or any CSV with one matrix row per line).

    Args:
        path: Source file
        format: 'binary' or 'csv' (inferred from the extension when None)

    Returns:
        DatasetMatrix named after the file

    Raises:
        DatasetFormatError: Bad magic, unknown version, truncated or ragged data
        DimensionOverflowError: Header dimensions too large to address
        NonFiniteValueError: NaN or infinite entries
    """
    path = Path(path)
    format = format or infer_format(path)
    if format == FORMAT_BINARY:
        values = _read_binary(path)
    elif format == FORMAT_CSV:
        values = _read_csv(path)
    else:
        raise DomainError(f"Unknown matrix format: {format}")
    matrix = DatasetMatrix(values, name=path.stem)
    logger.info(f"Loaded {matrix.p}x{matrix.n} matrix from {path}")
    return matrix


def _read_binary(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise DatasetFormatError(f"{path}: file too short for a DMAT header ({len(data)} bytes)")
    magic, version, p, n = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported DMAT version {version}")
    if p == 0 or n == 0:
        raise DatasetFormatError(f"{path}: empty matrix dimensions {p}x{n}")
    if p > MAX_ELEMENTS or n > MAX_ELEMENTS or p * n > MAX_ELEMENTS:
        raise DimensionOverflowError(f"{path}: dimensions {p}x{n} exceed the addressable size")
    expected = HEADER.size + p * n * VALUE_SIZE
    if len(data) != expected:
        raise DatasetFormatError(
            f"{path}: expected {expected} bytes for a {p}x{n} matrix, found {len(data)}"
        )
    flat = np.frombuffer(data, dtype="<f8", count=p * n, offset=HEADER.size)
    return flat.reshape((p, n), order="F").astype(np.float64)


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as handle:
        for line_number, row in enumerate(csv.reader(handle), start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as e:
                raise DatasetFormatError(f"{path}:{line_number}: {e}") from e
            if len(rows[-1]) != len(rows[0]):
                raise DatasetFormatError(
                    f"{path}:{line_number}: {len(rows[-1])} values, expected {len(rows[0])}"
                )
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)

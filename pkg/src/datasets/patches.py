"""Patches: grayscale PGM images and sliding-window patch extraction."""

import logging
import re
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.datasets.matrix import DatasetMatrix
from src.errors import DatasetFormatError, DomainError

logger = logging.getLogger(__name__)

# P5 header: magic, width, height, maxval, separated by whitespace and optional comments
_PGM_TOKEN = re.compile(rb"(?:\s+|#[^\n]*\n)*(\S+)")


def extract_patches(
    image: np.ndarray,
    patch: Tuple[int, int],
    stride: Tuple[int, int] = (1, 1)
) -> DatasetMatrix:
    """
    Extract every (h, w) patch of an image as a column.

    Columns are ordered by the raster (row-major) position of the patch's
    top-left corner; each patch is flattened row-major, so p = h * w.

    Args:
        image: 2-d array (H x W)
        patch: Patch size (h, w)
        stride: Step between corners (sh, sw)

    Returns:
        DatasetMatrix with floor((H-h)/sh + 1) * floor((W-w)/sw + 1) columns

    Raises:
        DomainError: If the patch does not fit or sizes are not positive
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DomainError(f"Expected a 2-d grayscale image, got {image.ndim} dimension(s)")
    h, w = patch
    sh, sw = stride
    if h < 1 or w < 1 or sh < 1 or sw < 1:
        raise DomainError(f"Patch {patch} and stride {stride} must be positive")
    H, W = image.shape
    if h > H or w > W:
        raise DomainError(f"Patch {h}x{w} larger than image {H}x{W}")

    windows = sliding_window_view(image, (h, w))[::sh, ::sw]
    n_rows, n_cols = windows.shape[:2]
    columns = windows.reshape(n_rows * n_cols, h * w).T
    logger.debug(f"Extracted {n_rows * n_cols} patches of {h}x{w} from a {H}x{W} image")
    return DatasetMatrix(columns, name=f"patches-{h}x{w}")


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """
    Read a binary (P5) PGM image.

    Args:
        path: Image file (8-bit or 16-bit big-endian samples)

    Returns:
        H x W float array of raw sample values

    Raises:
        DatasetFormatError: If the header or pixel data is malformed
    """
    path = Path(path)
    data = path.read_bytes()
    tokens = []
    position = 0
    for _ in range(4):
        match = _PGM_TOKEN.match(data, position)
        if match is None:
            raise DatasetFormatError(f"{path}: truncated PGM header")
        tokens.append(match.group(1))
        position = match.end()
    if tokens[0] != b"P5":
        raise DatasetFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError as e:
        raise DatasetFormatError(f"{path}: bad PGM header: {e}") from e
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise DatasetFormatError(f"{path}: invalid PGM dimensions {width}x{height}, maxval {maxval}")

    # A single whitespace byte separates the header from the raster
    position += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    if len(data) - position < expected:
        raise DatasetFormatError(
            f"{path}: expected {expected} bytes of pixel data, found {len(data) - position}"
        )
    pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=position)
    return pixels.reshape(height, width).astype(np.float64)


def write_pgm(path: Union[str, Path], image: np.ndarray, maxval: int = 255) -> Path:
    """
    Write a 2-d array as a binary (P5) PGM image.

    Values are rounded and clipped to [0, maxval]; maxval > 255 writes 16-bit samples.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DomainError(f"Expected a 2-d image, got {image.ndim} dimension(s)")
    if not 0 < maxval < 65536:
        raise DomainError(f"maxval must lie in [1, 65535], got {maxval}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    pixels = np.clip(np.rint(image), 0, maxval).astype(dtype)
    height, width = image.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        handle.write(pixels.tobytes())
    logger.info(f"Wrote {width}x{height} PGM image to {path}")
    return path

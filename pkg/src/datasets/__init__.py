"""Datasets: matrix files, synthetic instances, image patches and splits."""

from src.datasets.matrix import DatasetMatrix, as_array, center_columns, normalize_columns
from src.datasets.matrix_io import load_matrix, save_matrix
from src.datasets.synthetic import SyntheticSpec, generate_synthetic
from src.datasets.patches import extract_patches, read_pgm, write_pgm
from src.datasets.splitting import train_test_split

__all__ = [
    "DatasetMatrix",
    "as_array",
    "center_columns",
    "normalize_columns",
    "load_matrix",
    "save_matrix",
    "SyntheticSpec",
    "generate_synthetic",
    "extract_patches",
    "read_pgm",
    "write_pgm",
    "train_test_split"
]

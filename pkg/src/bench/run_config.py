"""Run configuration: TOML benchmark configs validated against a schema table."""

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from src.datasets.synthetic import SyntheticSpec
from src.engine.config import Algorithm, FitConfig
from src.errors import ConfigError, SomfError
from src.factorization.estimators import EstimatorVariant
from src.settings import get_settings

logger = logging.getLogger(__name__)

SOURCE_SYNTHETIC = "synthetic"
SOURCE_FILE = "file"
SOURCE_IMAGE = "image"
SOURCES = (SOURCE_SYNTHETIC, SOURCE_FILE, SOURCE_IMAGE)

_NUMBER = (int, float)

# key -> accepted types, per section; documented in docs/config_schema.md
TOP_LEVEL_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "name": (str,),
    "output_dir": (str,),
    "checkpoint_every": (int,),
}

DATASET_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "source": (str,),
    "path": (str,),
    "format": (str,),
    "test_fraction": _NUMBER,
    "split_seed": (int,),
    "center": (bool,),
    "normalize": (bool,),
}

SYNTHETIC_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "p": (int,),
    "n": (int,),
    "true_k": (int,),
    "noise_sigma": _NUMBER,
    "dict_sparsity": _NUMBER,
    "code_sparsity": _NUMBER,
    "nonnegative": (bool,),
    "seed": (int,),
    "mu": _NUMBER,
    "redundancy": (int,),
}

IMAGE_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "patch": (list,),
    "stride": (list,),
}

# TOML key -> FitConfig field
FIT_SCHEMA: Dict[str, Tuple[str, Tuple[type, ...]]] = {
    "algorithm": ("algorithm", (str,)),
    "k": ("k", (int,)),
    "lambda": ("lambda_", _NUMBER),
    "nu": ("nu", _NUMBER),
    "mu": ("mu", _NUMBER),
    "positive_code": ("positive_code", (bool,)),
    "positive_dict": ("positive_dict", (bool,)),
    "batch_size": ("batch_size", (int,)),
    "reduction": ("reduction", _NUMBER),
    "variant": ("variant", (str,)),
    "u": ("u", _NUMBER),
    "v": ("v", _NUMBER),
    "n_epochs": ("n_epochs", _NUMBER),
    "max_iter": ("max_iter", (int,)),
    "seed": ("seed", (int,)),
    "code_tol": ("code_tol", _NUMBER),
    "code_max_iter": ("code_max_iter", (int,)),
    "oracle_tol": ("oracle_tol", _NUMBER),
    "oracle_max_iter": ("oracle_max_iter", (int,)),
    "parallel": ("parallel", (bool,)),
    "code_subsampling": ("code_subsampling", (bool,)),
    "final_reduction": ("final_reduction", _NUMBER),
    "reduction_switch_epoch": ("reduction_switch_epoch", _NUMBER),
    "track_surrogate": ("track_surrogate", (bool,)),
    "reinit_dead_atoms": ("reinit_dead_atoms", (bool,)),
    "shuffle_coordinates": ("shuffle_coordinates", (bool,)),
}

SWEEP_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "reductions": (list,),
    "variants": (list,),
    "parallel_runs": (bool,),
}

ORACLE_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "outer_tol": _NUMBER,
    "max_outer": (int,),
    "force": (bool,),
}


@dataclass
class DatasetSource:
    """Where the data of a run comes from and how it is prepared."""

    source: str
    path: Optional[str] = None
    format: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    patch: Tuple[int, int] = (8, 8)
    stride: Tuple[int, int] = (1, 1)
    test_fraction: float = 0.1
    split_seed: int = 0
    center: bool = False
    normalize: bool = False


@dataclass
class RunConfig:
    """
    A validated benchmark configuration.

    Every (reduction, variant) pair of the sweep is one run sharing the
    dataset, seed and sample order.
    """

    name: str
    dataset: DatasetSource
    fit: Dict[str, Any]
    reductions: List[float] = field(default_factory=lambda: [1.0])
    variants: List[EstimatorVariant] = field(default_factory=lambda: [EstimatorVariant.EXACT_GRAM])
    parallel_runs: bool = False
    checkpoint_every: Optional[int] = None
    output_dir: Path = Path("results")
    oracle_outer_tol: float = 1e-6
    oracle_max_outer: int = 500
    oracle_force: bool = False
    source_path: Optional[Path] = None

    def combinations(self) -> List[Tuple[float, EstimatorVariant]]:
        """
        The (reduction, variant) pairs to run, in sweep order.

        A reduction of 1 is run once, as OMF, whatever the variants.
        """
        pairs: List[Tuple[float, EstimatorVariant]] = []
        for reduction in self.reductions:
            if reduction == 1.0:
                if (1.0, EstimatorVariant.MASKED) not in pairs:
                    pairs.append((1.0, EstimatorVariant.MASKED))
                continue
            for variant in self.variants:
                pairs.append((reduction, variant))
        return pairs

    def fit_config(self, reduction: Optional[float] = None, variant: Optional[EstimatorVariant] = None) -> FitConfig:
        """Build the FitConfig of one sweep entry (the [fit] section when both are None)."""
        values = dict(self.fit)
        if reduction is not None:
            values["reduction"] = reduction
            if reduction == 1.0:
                values["algorithm"] = Algorithm.OMF
        if variant is not None:
            values["variant"] = variant
        try:
            return FitConfig(**values)
        except (SomfError, ValueError) as e:
            raise ConfigError(f"Invalid [fit] section: {e}") from e


def _check_table(table: Dict[str, Any], schema: Dict[str, Tuple[type, ...]], section: str) -> None:
    for key, value in table.items():
        if key not in schema:
            raise ConfigError(f"Unknown key '{key}' in [{section}]; allowed: {sorted(schema)}")
        allowed = schema[key]
        # bool is an int subclass; only accept it where bool is listed
        if isinstance(value, bool) and bool not in allowed:
            raise ConfigError(f"[{section}] {key} must be {_type_names(allowed)}, got a boolean")
        if not isinstance(value, allowed):
            raise ConfigError(
                f"[{section}] {key} must be {_type_names(allowed)}, got {type(value).__name__}"
            )


def _type_names(types: Tuple[type, ...]) -> str:
    return " or ".join(t.__name__ for t in types)


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    table = raw.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    return table


def _pair(value: List[Any], key: str) -> Tuple[int, int]:
    if len(value) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"[dataset.image] {key} must be a list of two integers, got {value}")
    return int(value[0]), int(value[1])


def parse_synthetic(table: Dict[str, Any], section: str = "dataset.synthetic") -> SyntheticSpec:
    """Validate a table of SyntheticSpec fields."""
    _check_table(table, SYNTHETIC_SCHEMA, section)
    missing = [key for key in ("p", "n", "true_k") if key not in table]
    if missing:
        raise ConfigError(f"[{section}] missing required key(s): {missing}")
    try:
        return SyntheticSpec(**table)
    except SomfError as e:
        raise ConfigError(f"Invalid [{section}]: {e}") from e


def _parse_dataset(raw: Dict[str, Any], base_dir: Path) -> DatasetSource:
    table = dict(_section(raw, "dataset"))
    synthetic_table = table.pop("synthetic", None)
    image_table = table.pop("image", None)
    _check_table(table, DATASET_SCHEMA, "dataset")

    source = table.get("source")
    if source not in SOURCES:
        raise ConfigError(f"[dataset] source must be one of {list(SOURCES)}, got {source!r}")
    dataset = DatasetSource(
        source=source,
        format=table.get("format"),
        test_fraction=float(table.get("test_fraction", 0.1)),
        split_seed=table.get("split_seed", 0),
        center=table.get("center", False),
        normalize=table.get("normalize", False),
    )
    if not 0.0 < dataset.test_fraction < 1.0:
        raise ConfigError(f"[dataset] test_fraction must lie in (0, 1), got {dataset.test_fraction}")

    if source == SOURCE_SYNTHETIC:
        if not isinstance(synthetic_table, dict):
            raise ConfigError("[dataset] source 'synthetic' needs a [dataset.synthetic] table")
        dataset.synthetic = parse_synthetic(synthetic_table)
    else:
        if "path" not in table:
            raise ConfigError(f"[dataset] source '{source}' needs a path")
        path = Path(table["path"])
        dataset.path = str(path if path.is_absolute() else base_dir / path)
        if source == SOURCE_IMAGE:
            image_table = image_table or {}
            if not isinstance(image_table, dict):
                raise ConfigError("[dataset.image] must be a table")
            _check_table(image_table, IMAGE_SCHEMA, "dataset.image")
            if "patch" in image_table:
                dataset.patch = _pair(image_table["patch"], "patch")
            if "stride" in image_table:
                dataset.stride = _pair(image_table["stride"], "stride")
    return dataset


def _parse_fit(raw: Dict[str, Any]) -> Dict[str, Any]:
    table = _section(raw, "fit")
    schema = {key: types for key, (_, types) in FIT_SCHEMA.items()}
    _check_table(table, schema, "fit")
    if "k" not in table:
        raise ConfigError("[fit] missing required key 'k'")
    return {FIT_SCHEMA[key][0]: value for key, value in table.items()}


def _parse_sweep(raw: Dict[str, Any], fit: Dict[str, Any]) -> Tuple[List[float], List[EstimatorVariant], bool]:
    table = _section(raw, "sweep")
    _check_table(table, SWEEP_SCHEMA, "sweep")
    reductions = table.get("reductions", [fit.get("reduction", 1.0)])
    for value in reductions:
        if isinstance(value, bool) or not isinstance(value, _NUMBER) or value < 1:
            raise ConfigError(f"[sweep] reductions must be numbers >= 1, got {value!r}")
    try:
        variants = [
            EstimatorVariant(value)
            for value in table.get("variants", [fit.get("variant", EstimatorVariant.EXACT_GRAM.value)])
        ]
    except ValueError as e:
        valid = [variant.value for variant in EstimatorVariant]
        raise ConfigError(f"[sweep] variants must be drawn from {valid}: {e}") from e
    if not reductions or not variants:
        raise ConfigError("[sweep] needs at least one reduction and one variant")
    return [float(r) for r in reductions], variants, table.get("parallel_runs", False)


def parse_run_config(raw: Dict[str, Any], base_dir: Union[str, Path] = ".", name: str = "run") -> RunConfig:
    """
    Validate a parsed TOML document into a RunConfig.

    Args:
        raw: Parsed TOML document
        base_dir: Directory relative dataset paths are resolved against
        name: Default run name

    Returns:
        RunConfig

    Raises:
        ConfigError: On unknown keys, wrong types or invalid values
    """
    base_dir = Path(base_dir)
    sections = {"dataset", "fit", "sweep", "oracle"}
    top = {key: value for key, value in raw.items() if key not in sections}
    _check_table(top, TOP_LEVEL_SCHEMA, "top level")

    dataset = _parse_dataset(raw, base_dir)
    fit = _parse_fit(raw)
    reductions, variants, parallel_runs = _parse_sweep(raw, fit)
    oracle = _section(raw, "oracle")
    _check_table(oracle, ORACLE_SCHEMA, "oracle")

    checkpoint_every = top.get("checkpoint_every")
    if checkpoint_every is not None and checkpoint_every < 1:
        raise ConfigError(f"checkpoint_every must be >= 1, got {checkpoint_every}")

    if "output_dir" in top:
        output_dir = Path(top["output_dir"])
        if not output_dir.is_absolute():
            output_dir = base_dir / output_dir
    else:
        output_dir = Path(get_settings().output_dir)

    config = RunConfig(
        name=top.get("name", name),
        dataset=dataset,
        fit=fit,
        reductions=reductions,
        variants=variants,
        parallel_runs=parallel_runs,
        checkpoint_every=checkpoint_every,
        output_dir=output_dir,
        oracle_outer_tol=float(oracle.get("outer_tol", 1e-6)),
        oracle_max_outer=oracle.get("max_outer", 500),
        oracle_force=oracle.get("force", False),
    )
    # Surfaces invalid [fit] values (and sweep entries) before anything runs
    for reduction, variant in config.combinations():
        config.fit_config(reduction, variant)
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a TOML run configuration.

    Relative paths inside the file are resolved against the file's directory.

    Raises:
        ConfigError: If the file is missing, not valid TOML or fails validation
    """
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    config = parse_run_config(raw, base_dir=path.parent, name=path.stem)
    config.source_path = path
    logger.info(
        f"Loaded run config '{config.name}' from {path}: "
        f"{len(config.combinations())} run(s), output {config.output_dir}"
    )
    return config

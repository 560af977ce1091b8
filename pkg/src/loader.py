import json
import logging
import os
from typing import Any, Dict, Optional, Type, TypeVar

import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError

from src.errors import ConfigError, UsageError
from src.schemas import DifficultyTable, SampleSet, SimConfig

logger = logging.getLogger(__name__)

Model = TypeVar("Model", bound=BaseModel)


def load_structured(path: str) -> Dict[str, Any]:
    """Read a YAML or JSON document, chosen by file extension."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found at {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh) if path.lower().endswith(".json") else yaml.safe_load(fh)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def validate(model: Type[Model], data: Dict[str, Any]) -> Model:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key_path = ".".join(str(part) for part in first["loc"])
        raise ConfigError(first["msg"], key_path=key_path) from e


def load_sim_config(path: str) -> SimConfig:
    logger.info("Loading simulation config from %s...", path)
    return validate(SimConfig, load_structured(path))


def load_difficulty_table(path: str) -> DifficultyTable:
    logger.info("Loading difficulty table from %s...", path)
    return validate(DifficultyTable, load_structured(path))


def load_samples(path: str, column: Optional[str] = None, name: Optional[str] = None) -> SampleSet:
    """
    Read one value per line, with an optional header line.

    Multi-column CSVs with a header (mine-bench and simulate outputs) are read from
    `column`. Parse failures name the offending line.
    """
    if not os.path.exists(path):
        raise UsageError(f"sample file not found at {path}")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise UsageError(f"{path} holds no samples") from None
    raw = raw.fillna("")
    # line numbers are 1-based positions in the file
    raw.index = raw.index + 1
    raw = raw[raw.apply(lambda row: "".join(row).strip() != "", axis=1)]
    if raw.empty:
        raise UsageError(f"{path} holds no samples")

    first_row = raw.iloc[0].str.strip().tolist()
    has_header = pd.to_numeric(pd.Series(first_row), errors="coerce").isna().any()
    if has_header:
        frame = raw.iloc[1:].copy()
        frame.columns = first_row
        if column is None:
            column = first_row[0]
        elif column not in first_row:
            raise UsageError(f"{path} has no column {column!r}; columns are {first_row}")
        values = frame[column]
    else:
        if column is not None and raw.shape[1] > 1:
            raise UsageError(f"{path} has no header to select column {column!r} from")
        values = raw.iloc[:, 0]

    parsed = pd.to_numeric(values.str.strip(), errors="coerce")
    bad = parsed[parsed.isna()]
    if not bad.empty:
        line = int(bad.index[0])
        raise UsageError(f"{path}:{line}: cannot parse {values.loc[line]!r} as a number")
    if parsed.empty:
        raise UsageError(f"{path} holds no samples")
    return SampleSet(values=parsed.astype(float).tolist(), name=name or os.path.basename(path))

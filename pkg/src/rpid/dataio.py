"""CSV reading and writing with schema checks.

Floats are written with 17 significant digits and read back with
round-trip parsing, so a write/read cycle returns identical values.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"


class SchemaError(ValueError):
    pass


def read_csv(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    try:
        df = pd.read_csv(path, float_precision="round_trip", keep_default_na=False, na_values=[""])
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: empty file") from exc
    except pd.errors.ParserError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    missing = df.columns[df.isna().any()].tolist()
    if missing:
        rows = sorted(set(np.where(df[missing].isna().to_numpy())[0].tolist()))
        raise SchemaError(f"{path}: missing values in column(s) {missing}, first at row {rows[0]}")
    return df


def write_csv(df: pd.DataFrame, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def check_columns(df: pd.DataFrame, columns: Iterable[str], what: str = "data") -> None:
    for c in columns:
        if c not in df.columns:
            raise SchemaError(f"{what}: required column {c!r} is missing")


def check_schema(df: pd.DataFrame, graph, columns: Iterable[str] | None = None, what: str = "data") -> None:
    """Protected column has two levels; binary columns hold 0/1; others are numeric.

    ``columns`` restricts the check (defaults to every graph variable).
    """
    cols = list(columns) if columns is not None else graph.names
    check_columns(df, cols, what)
    pa = graph.protected
    if pa in cols:
        levels = sorted(set(df[pa].astype(str)))
        if len(levels) > 2:
            raise SchemaError(f"{what}: protected column {pa!r} has {len(levels)} levels {levels}; exactly two are supported")
    for c in cols:
        if c == pa:
            continue
        if not pd.api.types.is_numeric_dtype(df[c]):
            raise SchemaError(f"{what}: column {c!r} must be numeric")
        if graph.spec(c).kind == "binary" and not df[c].isin([0, 1]).all():
            raise SchemaError(f"{what}: binary column {c!r} must contain only 0 and 1")


def two_levels(df: pd.DataFrame, pa: str, what: str = "data") -> list[str]:
    levels = sorted(set(df[pa].astype(str)))
    if len(levels) != 2:
        raise SchemaError(f"{what}: protected column {pa!r} needs exactly two levels, found {levels}")
    return levels


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random split of ``range(n)`` into sorted (train, rest) index arrays."""
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(fraction * n))
    return np.sort(perm[:cut]), np.sort(perm[cut:])

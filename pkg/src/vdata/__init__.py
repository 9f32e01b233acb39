"""vdata: virtual datasets for ML workflows.

Datasets are declared as links to predecessor datasets plus a link to a
registered transformation, then resolved, executed, and cached on demand
instead of being stored as explicit copies.
"""

from .model import (
    Column,
    ColumnType,
    DataObject,
    ObjectIndex,
    ObjectIndexEntry,
    Schema,
    SourceLink,
    Table,
    common_columns,
    validate_table,
)
from .csvio import infer_schema, parse_table, serialize_table

__version__ = "0.1.0"

__all__ = [
    "Column",
    "ColumnType",
    "DataObject",
    "ObjectIndex",
    "ObjectIndexEntry",
    "Schema",
    "SourceLink",
    "Table",
    "common_columns",
    "validate_table",
    "infer_schema",
    "parse_table",
    "serialize_table",
    "__version__",
]

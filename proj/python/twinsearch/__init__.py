"""Validation-free hyperparameter selection on learning-rate x weight-decay grids.

Matrices are numpy arrays with rows indexing weight decay and columns
indexing learning rate. Selections come back as the same dicts that the
command-line tool writes to selection.json.
"""

from ._twin import (
    HyperGrid,
    NoTrainableConfiguration,
    QuickshiftParams,
    SchemaError,
    StorageError,
    baseline,
    build_log_grid,
    default_grid,
    default_params,
    load_run,
    make_manifest,
    quickshift,
    run,
    select,
    twin_select,
)

__all__ = [
    "HyperGrid",
    "NoTrainableConfiguration",
    "QuickshiftParams",
    "SchemaError",
    "StorageError",
    "baseline",
    "build_log_grid",
    "default_grid",
    "default_params",
    "load_run",
    "make_manifest",
    "quickshift",
    "run",
    "select",
    "twin_select",
]

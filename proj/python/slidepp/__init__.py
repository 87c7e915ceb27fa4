"""Point-process models of landslide crown locations.

Grids are 2-d arrays with row 0 to the north and NaN for NODATA. Point sets
are (n, 2) arrays of planar x, y in metres.
"""

from ._slidepp import (
    ConfigError,
    DataError,
    Error,
    Grid,
    Model,
    NumericalError,
    Stack,
    __version__,
    binarize_twi,
    bootstrap,
    fit,
    gaussian_filter,
    importance,
    in_range_mask,
    load_model,
    loglik,
    predict,
    raw_errors,
    read_grid,
    read_points,
    read_stack,
    run_cli,
    select,
    simulate,
    synth_valley,
    write_grid,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]

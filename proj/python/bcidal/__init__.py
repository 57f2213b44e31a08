from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    bandpass_filter,
    bandpass_response,
    blockwise_folds,
    compare,
    cross_validate,
    format_cell,
    generate_session,
    load_session,
    paired_ttest,
    predict,
    prox_group_rows,
    prox_l1,
    prox_trace,
    resample,
    rm_anova,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "bandpass_filter",
    "bandpass_response",
    "blockwise_folds",
    "compare",
    "cross_validate",
    "format_cell",
    "generate_session",
    "load_session",
    "paired_ttest",
    "predict",
    "prox_group_rows",
    "prox_l1",
    "prox_trace",
    "resample",
    "rm_anova",
    "train",
]

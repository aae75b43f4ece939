"""Predict one liver-panel analyte from the other three and score the learners."""
from .dataset import (
    ANALYTES,
    DEFAULT_CALIBRATION,
    REFERENCE_RANGES,
    Calibration,
    Dataset,
    PanelRecord,
    flag_out_of_range,
    load_csv,
    make_folds,
    summarize,
    synthesize,
    write_csv,
)
from .kernels import BACKEND
from .metrics import MetricTriple, evaluate, ppmcc, rae, rrse

__version__ = "0.1.0"

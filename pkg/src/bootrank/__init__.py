"""Bootstrap test of matrix rank for the first stage of linear IV regressions."""

from .bootstrap import BootstrapDraws, BootstrapScheme
from .data import Dataset, assemble, lag, load_csv, set_time
from .engine import TestConfig, TestReport, run_test
from .regression import FirstStageFit, fit_first_stage

__all__ = [
    "BootstrapDraws",
    "BootstrapScheme",
    "Dataset",
    "FirstStageFit",
    "TestConfig",
    "TestReport",
    "assemble",
    "fit_first_stage",
    "lag",
    "load_csv",
    "run_test",
    "set_time",
]

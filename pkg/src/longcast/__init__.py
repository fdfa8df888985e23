"""Forecasting engine for longitudinal tabular cohorts.

Converts per-patient visit histories into fixed-length cross-sectional
rows, augments them over all (cutoff, target) pairs with an explicit
prediction horizon, trains pluggable predictors, and evaluates
diagnosis, cognitive-score and ventricle-volume forecasts.
"""

__version__ = "0.1.0"

from .cohort import (Cohort, ColumnMap, Demographics, DiagnosisState,
                     PatientHistory, Task, Visit, dump_cohort,
                     encode_diagnosis, parse_cohort)
from .summaries import (DxSummary, L2CRow, NumericSummary, build_row,
                        summarize_diagnosis, summarize_numeric)
from .tables import (FeatureTable, TableSchema, augment_patient,
                     build_training_table, table_from_csv, table_to_csv)
from .splits import patient_disjoint_folds, validation_rows
from .predictors import (PredictionRecord, PredictorConfig, fit_predict,
                         knn_distance)
from .bridge import bridge_session
from .forecast import build_test_table, forecast_table, sweep_horizons
from .metrics import MetricReport, bca, compare_reports, mae, mauc, wilcoxon_exact
from .synth import synth_cohort

__all__ = [
    "Cohort", "ColumnMap", "Demographics", "DiagnosisState",
    "PatientHistory", "Task", "Visit", "dump_cohort", "encode_diagnosis",
    "parse_cohort",
    "DxSummary", "L2CRow", "NumericSummary", "build_row",
    "summarize_diagnosis", "summarize_numeric",
    "FeatureTable", "TableSchema", "augment_patient", "build_training_table",
    "table_from_csv", "table_to_csv",
    "patient_disjoint_folds", "validation_rows",
    "PredictionRecord", "PredictorConfig", "fit_predict", "knn_distance",
    "bridge_session",
    "build_test_table", "forecast_table", "sweep_horizons",
    "MetricReport", "bca", "compare_reports", "mae", "mauc", "wilcoxon_exact",
    "synth_cohort",
]

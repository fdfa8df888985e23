"""Forecast-side row construction: horizon sweeps and evaluation tables.

A swept row reuses every history-derived value and moves only the clock:
the horizon, the time_since_* deltas, and the age at the predicted time
point. That is exactly what rebuilding the row at the shifted target
would produce, because the history before the cutoff is unchanged.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

from .cohort import Cohort, Task, target_value
from .errors import ContractViolation
from .summaries import L2CRow, build_row
from .tables import FeatureTable, TableSchema

DEFAULT_HORIZON_GRID = tuple(range(1, 61))   # monthly, five years out


def sweep_horizons(base: L2CRow, horizons: Sequence[float]) -> list[L2CRow]:
    """Copies of `base` re-aimed at cutoff + h for each h.

    Value fields stay bit-identical; every time_since_* field shifts by
    the horizon change and current_age is recomputed at the new target.
    Swept rows carry no target: they are pure forecast rows.
    """
    out = []
    for h in horizons:
        if h <= 0:
            raise ContractViolation(f"horizon must be positive, got {h}")
        new_target = base.cutoff_month + h
        delta = new_target - base.target_month
        features = dict(base.features)
        features["horizon"] = new_target - base.cutoff_month
        for name, value in base.features.items():
            if name.startswith("time_since_") and value is not None:
                features[name] = value + delta
        if base.features.get("baseline_age") is not None:
            features["current_age"] = (base.features["baseline_age"]
                                       + new_target / 12)
        out.append(replace(base, target_month=new_target, features=features,
                           target=None))
    return out


def build_test_table(cohort: Cohort, task: Task,
                     schema: Optional[TableSchema] = None,
                     membership: str = "D2",
                     per_target_cutoff: bool = True) -> FeatureTable:
    """Evaluation rows: one per observed task outcome with prior history.

    Default mode uses the maximal available history (cutoff = the visit
    immediately before each target). The alternative fixes one cutoff per
    patient, just before their earliest qualifying target, and reaches
    the later targets at growing horizons.
    """
    schema = schema or TableSchema(task=task, feature_names=cohort.schema)
    rows = []
    for patient in cohort.select(membership):
        target_indices = [
            j for j in range(1, len(patient.visits))
            if target_value(patient.visits[j], task, schema.vent_scale)
            is not None]
        if not target_indices:
            continue
        for j in target_indices:
            cutoff_index = j - 1 if per_target_cutoff else target_indices[0] - 1
            rows.append(build_row(patient, cutoff_index,
                                  patient.visits[j].month, task,
                                  schema.feature_names, schema.vent_scale))
    rows.sort(key=lambda r: (r.patient_id, r.cutoff_month, r.target_month))
    return FeatureTable(schema=schema, rows=rows)


def forecast_table(cohort: Cohort, task: Task,
                   horizons: Sequence[float] = DEFAULT_HORIZON_GRID,
                   schema: Optional[TableSchema] = None,
                   membership: str = "D2") -> FeatureTable:
    """Ground-truth-free rows over a horizon grid from each patient's
    full history (cutoff = last visit)."""
    schema = schema or TableSchema(task=task, feature_names=cohort.schema)
    horizons = sorted(float(h) for h in horizons)
    if not horizons:
        raise ContractViolation("horizon grid must be non-empty")
    rows = []
    for patient in cohort.select(membership):
        if not patient.visits:
            continue
        last = len(patient.visits) - 1
        base = build_row(patient, last,
                         patient.visits[last].month + horizons[0], task,
                         schema.feature_names, schema.vent_scale)
        rows.extend(sweep_horizons(base, horizons))
    rows.sort(key=lambda r: (r.patient_id, r.cutoff_month, r.target_month))
    return FeatureTable(schema=schema, rows=rows)

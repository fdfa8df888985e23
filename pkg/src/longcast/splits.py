"""Patient-disjoint cross-validation folds and half-history validation rows.

No patient ever contributes rows to both the training and validation
side of a fold. Validation uses the forecasting protocol: the first half
of a patient's visits predicts the second half.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Optional

import numpy as np

from .cohort import PatientHistory, Task
from .errors import ConfigError, ParseError
from .summaries import L2CRow, build_row
from .tables import FeatureTable, TableSchema


def patient_disjoint_folds(table: FeatureTable, k: int, seed: int,
                           stratified: bool = False) -> dict[str, int]:
    """Assign every patient in the table to exactly one of k folds.

    Folds are balanced by patient count (sizes differ by at most one).
    Stratified mode additionally balances the distribution of each
    patient's most recent diagnosis across folds, greedily filling the
    smallest fold first.
    """
    if k < 2:
        raise ConfigError(f"fold count must be >= 2, got {k}")
    patients = sorted(set(table.patient_ids()))
    if not patients:
        raise ConfigError("cannot split an empty table")
    if k > len(patients):
        raise ConfigError(f"k={k} exceeds patient count {len(patients)}")

    rng = np.random.default_rng(seed)

    if not stratified:
        order = list(patients)
        rng.shuffle(order)
        return {pid: i % k for i, pid in enumerate(order)}

    key = _latest_dx_by_patient(table)
    groups: dict[float, list[str]] = {}
    for pid in patients:
        groups.setdefault(key.get(pid, -1.0), []).append(pid)

    assignment: dict[str, int] = {}
    fold_sizes = [0] * k
    for group_key in sorted(groups):
        members = groups[group_key]
        rng.shuffle(members)
        for pid in members:
            fold = min(range(k), key=lambda i: (fold_sizes[i], i))
            assignment[pid] = fold
            fold_sizes[fold] += 1
    return assignment


def _latest_dx_by_patient(table: FeatureTable) -> dict[str, float]:
    """mr_DX from each patient's most-informed row (largest cutoff)."""
    latest: dict[str, tuple[float, float]] = {}
    for row in table.rows:
        dx = row.features.get("mr_DX")
        if dx is None:
            continue
        current = latest.get(row.patient_id)
        if current is None or row.cutoff_month >= current[0]:
            latest[row.patient_id] = (row.cutoff_month, dx)
    return {pid: dx for pid, (_, dx) in latest.items()}


def validation_rows(patient: PatientHistory, task: Task,
                    schema: Optional[TableSchema] = None) -> list[L2CRow]:
    """Half-history rows: floor(n/2) visits as history, the rest as targets.

    Rows whose task outcome is unobserved at the target visit are dropped,
    matching the training-table rule.
    """
    n = len(patient.visits)
    if n < 2:
        return []
    schema = schema or TableSchema(task=task)
    m = n // 2                       # history visit count; cutoff index m-1
    rows = []
    for target_index in range(m, n):
        row = build_row(patient, m - 1, patient.visits[target_index].month,
                        task, schema.feature_names, schema.vent_scale)
        if row.target is not None:
            rows.append(row)
    return rows


def folds_to_csv(assignment: dict[str, int]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["patient_id", "fold"])
    for pid in sorted(assignment):
        writer.writerow([pid, assignment[pid]])
    return out.getvalue()


def folds_from_csv(text: str | Iterable[str]) -> dict[str, int]:
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    header = next(reader, None)
    if header != ["patient_id", "fold"]:
        raise ParseError("fold file must have header patient_id,fold")
    assignment = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"line {line_no}: expected 2 cells")
        try:
            assignment[row[0]] = int(row[1])
        except ValueError:
            raise ParseError(f"line {line_no}: fold must be an integer")
    return assignment

"""Feature tables: augmentation into (cutoff, target) pairs and table I/O.

A table row's provenance (patient, cutoff month, target month) always
travels with it so downstream splitting and evaluation never need the
original cohort. Missing values are empty CSV cells, nothing else.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .cohort import Cohort, PatientHistory, Task, DEFAULT_FEATURES
from .errors import ParseError, SchemaError
from .summaries import AUX_COLUMNS, L2CRow, build_row, feature_columns

PROVENANCE_COLUMNS = ("patient_id", "cutoff_month", "target_month")
TARGET_COLUMN = "y"


@dataclass(frozen=True)
class TableSchema:
    task: Task
    feature_names: tuple[str, ...] = DEFAULT_FEATURES
    vent_scale: float = 1.0

    @property
    def model_columns(self) -> list[str]:
        return feature_columns(self.feature_names)

    @property
    def columns(self) -> list[str]:
        return [*PROVENANCE_COLUMNS, *self.model_columns, *AUX_COLUMNS,
                TARGET_COLUMN]

    def roles(self) -> dict[str, str]:
        roles = {name: "provenance" for name in PROVENANCE_COLUMNS}
        roles.update({name: "feature" for name in self.model_columns})
        roles.update({name: "aux" for name in AUX_COLUMNS})
        roles[TARGET_COLUMN] = "target"
        return roles


@dataclass
class FeatureTable:
    schema: TableSchema
    rows: list[L2CRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def patient_ids(self) -> list[str]:
        seen = dict.fromkeys(row.patient_id for row in self.rows)
        return list(seen)

    def check_compatible(self, other: "FeatureTable") -> None:
        if (self.schema.task is not other.schema.task
                or self.schema.feature_names != other.schema.feature_names):
            raise SchemaError("tables disagree on task or feature schema")


def augment_patient(patient: PatientHistory, task: Task,
                    schema: TableSchema) -> list[L2CRow]:
    """All (cutoff, later-target) rows for one patient.

    A patient with n visits generates n(n-1)/2 pairs; pairs whose task
    outcome is unobserved at the target visit are dropped afterwards.
    Fewer than two visits generate nothing.
    """
    n = len(patient.visits)
    rows = []
    for cutoff_index in range(n - 1):
        for target_index in range(cutoff_index + 1, n):
            row = build_row(patient, cutoff_index,
                            patient.visits[target_index].month, task,
                            schema.feature_names, schema.vent_scale)
            if row.target is not None:
                rows.append(row)
    return rows


def snapshot_rows(patient: PatientHistory, task: Task,
                  schema: TableSchema) -> list[L2CRow]:
    """Un-augmented rows: each visit from the second on predicted from
    all visits before it."""
    rows = []
    for target_index in range(1, len(patient.visits)):
        row = build_row(patient, target_index - 1,
                        patient.visits[target_index].month, task,
                        schema.feature_names, schema.vent_scale)
        if row.target is not None:
            rows.append(row)
    return rows


def build_training_table(cohort: Cohort, task: Task,
                         membership: Optional[str] = "D1",
                         schema: Optional[TableSchema] = None,
                         augment: bool = True, jobs: int = 1) -> FeatureTable:
    """Concatenated per-patient rows in deterministic order.

    Patients are independent, so jobs > 1 fans them out over a thread
    pool; the final sort keeps the output order identical either way.
    """
    schema = schema or TableSchema(task=task, feature_names=cohort.schema)
    build = augment_patient if augment else snapshot_rows
    patients = cohort.select(membership)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_patient = list(pool.map(
                lambda p: build(p, task, schema), patients))
    else:
        per_patient = [build(p, task, schema) for p in patients]
    rows: list[L2CRow] = [row for chunk in per_patient for row in chunk]
    rows.sort(key=lambda r: (r.patient_id, r.cutoff_month, r.target_month))
    return FeatureTable(schema=schema, rows=rows)


def _format(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def table_to_csv(table: FeatureTable) -> str:
    """Stable column order; floats use shortest round-trip text."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    columns = table.schema.columns
    writer.writerow(columns)
    value_cols = columns[1:-1]
    for row in table.rows:
        record = {"cutoff_month": row.cutoff_month,
                  "target_month": row.target_month, **row.features}
        writer.writerow([row.patient_id,
                         *[_format(record[c]) for c in value_cols],
                         _format(row.target)])
    return out.getvalue()


def table_manifest(table: FeatureTable) -> dict:
    """Schema manifest listing column name -> semantic role."""
    roles = table.schema.roles()
    return {
        "task": table.schema.task.value,
        "feature_names": list(table.schema.feature_names),
        "vent_scale": table.schema.vent_scale,
        "columns": [{"name": name, "role": roles[name]}
                    for name in table.schema.columns],
        "row_count": len(table.rows),
    }


def manifest_json(table: FeatureTable) -> str:
    return json.dumps(table_manifest(table), indent=2) + "\n"


def _infer_feature_names(header: Sequence[str]) -> tuple[str, ...]:
    names = []
    for column in header:
        if (column.startswith("mr_") and not column.startswith("mr_change_")
                and column not in ("mr_DX", "mr_target")):
            names.append(column[len("mr_"):])
    return tuple(names)


def table_from_csv(text: str | Iterable[str], task: Optional[Task] = None,
                   manifest: Optional[dict] = None) -> FeatureTable:
    """Parse a table written by table_to_csv.

    The feature list is taken from the manifest when given, otherwise
    inferred from the header's mr_* columns.
    """
    if manifest is not None:
        task = Task.parse(manifest["task"])
        schema = TableSchema(task=task,
                             feature_names=tuple(manifest["feature_names"]),
                             vent_scale=float(manifest.get("vent_scale", 1.0)))
    elif task is None:
        raise SchemaError("table_from_csv needs a task or a manifest")
    else:
        schema = None

    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty table: header row required")

    if schema is None:
        schema = TableSchema(task=task,
                             feature_names=_infer_feature_names(header))
    expected = schema.columns
    if header != expected:
        raise SchemaError(
            f"table header does not match schema (got {len(header)} columns, "
            f"expected {len(expected)})")

    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if not raw:
            continue
        if len(raw) != len(expected):
            raise ParseError(
                f"line {line_no}: expected {len(expected)} cells, got {len(raw)}")
        cells = dict(zip(expected, raw))
        try:
            values = {name: (None if cells[name] == "" else float(cells[name]))
                      for name in expected[1:]}
        except ValueError as exc:
            raise ParseError(f"line {line_no}: {exc}")
        if values["cutoff_month"] is None or values["target_month"] is None:
            raise ParseError(f"line {line_no}: provenance months must be "
                             "present")
        features = {name: values[name] for name in expected[3:-1]}
        rows.append(L2CRow(
            patient_id=cells["patient_id"],
            cutoff_month=values["cutoff_month"],
            target_month=values["target_month"],
            features=features,
            target=values[TARGET_COLUMN],
        ))
    return FeatureTable(schema=schema, rows=rows)

"""Domain types and ingestion for longitudinal patient cohorts.

The cohort file is delimiter-separated text with one row per visit.
Parsing validates and sorts each patient's visits by month, resolves
demographics, and leaves every missing cell missing (no imputation).
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterable, Optional, TextIO

from .errors import ConfigError, EncodingError, ParseError, SchemaError

logger = logging.getLogger(__name__)

# Default missing-value sentinels; "-4" is an ADNI export convention.
DEFAULT_SENTINELS = frozenset({"", "NA", "NaN", "-4"})

# Numeric visit features summarized by the history transform, with their
# validity ranges (inclusive bounds; None = unbounded). Volumes are mm^3
# and must be strictly positive.
FEATURE_RANGES: dict[str, tuple[Optional[float], Optional[float], bool]] = {
    # name: (low, high, strict_low)
    "MMSE": (0.0, 30.0, False),
    "CDRSB": (0.0, 18.0, False),
    "ADAS13": (0.0, None, False),
    "Ventricles": (0.0, None, True),
    "WholeBrain": (0.0, None, True),
    "Hippocampus": (0.0, None, True),
    "Fusiform": (0.0, None, True),
    "MidTemp": (0.0, None, True),
    "ICV": (0.0, None, True),
}

DEFAULT_FEATURES = tuple(FEATURE_RANGES)

MARITAL_VOCABULARY = {
    "Married": 0,
    "Widowed": 1,
    "Divorced": 2,
    "Never married": 3,
    "Unknown": 4,
}
_MARITAL_LABELS = {code: label for label, code in MARITAL_VOCABULARY.items()}


class DiagnosisState(IntEnum):
    """Three-state clinical diagnosis with total order CN < MCI < AD."""

    CN = 0
    MCI = 1
    AD = 2


_DX_STABLE = {"NL": DiagnosisState.CN, "CN": DiagnosisState.CN,
              "MCI": DiagnosisState.MCI,
              "Dementia": DiagnosisState.AD, "AD": DiagnosisState.AD}
_DX_LABELS = {DiagnosisState.CN: "NL", DiagnosisState.MCI: "MCI",
              DiagnosisState.AD: "Dementia"}


class Task(str, Enum):
    """Forecasting task tag: classification (DX) or regression targets."""

    DX = "DX"
    ADAS = "ADAS"
    VENT = "VENT"

    @classmethod
    def parse(cls, raw: str) -> "Task":
        key = raw.strip().upper()
        aliases = {"DX": cls.DX, "ADAS": cls.ADAS, "ADAS13": cls.ADAS,
                   "ADAS-COG": cls.ADAS, "VENT": cls.VENT,
                   "VENTRICLES": cls.VENT}
        if key not in aliases:
            raise ConfigError(f"unknown task {raw!r}; expected DX, ADAS or VENT")
        return aliases[key]


def encode_diagnosis(raw: str) -> Optional[DiagnosisState]:
    """Map a source diagnosis label to its state; empty cells are missing.

    Transition labels such as "NL to MCI" encode the state at the visit
    itself, so they map to the endpoint state.
    """
    label = raw.strip()
    if label == "":
        return None
    endpoint = label.split(" to ")[-1].strip()
    if endpoint not in _DX_STABLE:
        raise EncodingError(f"unknown diagnosis label {label!r}")
    return _DX_STABLE[endpoint]


def diagnosis_label(state: Optional[DiagnosisState]) -> str:
    return "" if state is None else _DX_LABELS[DiagnosisState(state)]


@dataclass(frozen=True)
class Demographics:
    apoe4: Optional[int] = None           # allele count in {0, 1, 2}
    is_male: Optional[bool] = None
    educ: Optional[float] = None          # years, >= 0
    marital: Optional[int] = None         # code from MARITAL_VOCABULARY
    baseline_age: Optional[float] = None  # years at month 0


@dataclass(frozen=True)
class Visit:
    """One timestamped observation row for one patient."""

    patient_id: str
    month: float                          # months since baseline, >= 0
    dx: Optional[DiagnosisState] = None
    features: dict[str, Optional[float]] = field(default_factory=dict)

    def feature(self, name: str) -> Optional[float]:
        return self.features.get(name)

    def vent_ratio(self) -> Optional[float]:
        """Ventricles normalized by intracranial volume, missing if either is."""
        vent = self.features.get("Ventricles")
        icv = self.features.get("ICV")
        if vent is None or icv is None:
            return None
        return vent / icv


@dataclass(frozen=True)
class PatientHistory:
    patient_id: str
    demographics: Demographics
    visits: tuple[Visit, ...]             # strictly increasing by month
    in_d1: bool = True
    in_d2: bool = False


@dataclass(frozen=True)
class Cohort:
    patients: dict[str, PatientHistory]
    schema: tuple[str, ...] = DEFAULT_FEATURES

    def __iter__(self):
        return iter(self.patients.values())

    def __len__(self):
        return len(self.patients)

    def select(self, membership: Optional[str]) -> list[PatientHistory]:
        """Patients filtered by split flag: "D1", "D2" or None for all."""
        if membership is None:
            return list(self.patients.values())
        key = membership.upper()
        if key == "D1":
            return [p for p in self.patients.values() if p.in_d1]
        if key == "D2":
            return [p for p in self.patients.values() if p.in_d2]
        raise ConfigError(f"unknown membership filter {membership!r}")


def target_value(visit: Visit, task: Task, vent_scale: float = 1.0) -> Optional[float]:
    """Task outcome observed at a visit, or None when not recorded there.

    The VENT target is the per-visit Ventricles/ICV ratio times a
    configurable scale; raw volumes stay untouched in the features.
    """
    if task is Task.DX:
        return None if visit.dx is None else float(visit.dx)
    if task is Task.ADAS:
        return visit.features.get("ADAS13")
    ratio = visit.vent_ratio()
    return None if ratio is None else ratio * vent_scale


@dataclass(frozen=True)
class ColumnMap:
    """Assignment of semantic fields to source column names.

    Defaults follow the TADPOLE column vocabulary.
    """

    patient_id: str = "RID"
    month: str = "month_bl"
    dx: str = "DX"
    features: dict[str, str] = field(
        default_factory=lambda: {name: name for name in DEFAULT_FEATURES})
    apoe4: str = "APOE4"
    gender: str = "PTGENDER"
    educ: str = "PTEDUCAT"
    marital: str = "PTMARRY"
    age: str = "AGE"
    d1: str = "D1"
    d2: str = "D2"

    def with_overrides(self, overrides: dict[str, str]) -> "ColumnMap":
        known = {"patient_id", "month", "dx", "apoe4", "gender", "educ",
                 "marital", "age", "d1", "d2"}
        plain = {k: v for k, v in overrides.items() if k in known}
        feats = {k: v for k, v in overrides.items() if k not in known}
        merged = dict(self.features)
        merged.update(feats)
        return replace(self, features=merged, **plain)


class _RowReader:
    """Validates raw cells against sentinels/ranges with line-number context."""

    def __init__(self, sentinels: frozenset[str], strict: bool):
        self.sentinels = sentinels
        self.strict = strict

    def cell(self, row: dict[str, str], column: Optional[str]) -> Optional[str]:
        if column is None or column not in row:
            return None
        raw = (row[column] or "").strip()
        return None if raw in self.sentinels else raw

    def number(self, row, column, line_no, what) -> Optional[float]:
        raw = self.cell(row, column)
        if raw is None:
            return None
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"line {line_no}: {what} is not a number: {raw!r}")
        if not math.isfinite(value):
            if self.strict:
                raise ParseError(
                    f"line {line_no}: {what} is not finite: {raw!r}")
            logger.warning("line %d: %s=%r not finite, treated as missing",
                           line_no, what, raw)
            return None
        return value

    def ranged(self, value, low, high, strict_low, line_no, what) -> Optional[float]:
        if value is None:
            return None
        bad = (low is not None and (value < low or (strict_low and value == low))) \
            or (high is not None and value > high)
        if not bad:
            return value
        if self.strict:
            raise SchemaError(f"line {line_no}: {what}={value} out of range")
        logger.warning("line %d: %s=%s out of range, treated as missing",
                       line_no, what, value)
        return None

    def flag(self, row, column) -> bool:
        raw = self.cell(row, column)
        return raw is not None and raw not in {"0", "0.0", "false", "False"}


def parse_cohort(source: str | TextIO | Iterable[str],
                 mapping: Optional[ColumnMap] = None,
                 *,
                 sentinels: Optional[Iterable[str]] = None,
                 strict: bool = False,
                 delimiter: str = ",") -> Cohort:
    """Read a visit-per-row cohort file into sorted patient histories.

    Visits are sorted ascending by month per patient. Duplicate
    (patient, month) rows keep the last one read (strict mode errors
    instead). Out-of-range values become missing unless strict.
    """
    mapping = mapping or ColumnMap()
    sset = frozenset(sentinels) if sentinels is not None else DEFAULT_SENTINELS
    reader = _RowReader(sset, strict)

    if isinstance(source, str):
        source = io.StringIO(source)
    rows = csv.reader(source, delimiter=delimiter)
    try:
        header = next(rows)
    except StopIteration:
        raise ParseError("empty input: header row required")
    ncols = len(header)

    wanted = {mapping.patient_id, mapping.month, mapping.dx, mapping.apoe4,
              mapping.gender, mapping.educ, mapping.marital, mapping.age,
              mapping.d1, mapping.d2, *mapping.features.values()}
    if mapping.patient_id not in header or mapping.month not in header:
        raise SchemaError(
            f"required columns {mapping.patient_id!r}, {mapping.month!r} "
            f"not both present in header")
    col_index = {name: i for i, name in enumerate(header) if name in wanted}

    # keyed by (patient, month); insertion order preserved, later rows
    # overwrite earlier ones (ADNI exports contain duplicate-month rows)
    visits: dict[tuple[str, float], Visit] = {}
    demo_obs: dict[str, list[tuple[float, dict]]] = {}
    flags: dict[str, list[bool]] = {}

    for line_no, raw in enumerate(rows, start=2):
        if not raw or (len(raw) == 1 and raw[0].strip() == ""):
            continue
        if len(raw) != ncols:
            raise ParseError(
                f"line {line_no}: expected {ncols} columns, got {len(raw)}")
        row = {name: raw[i] for name, i in col_index.items()}

        pid = reader.cell(row, mapping.patient_id)
        if pid is None:
            if strict:
                raise ParseError(f"line {line_no}: missing patient id")
            logger.warning("line %d: missing patient id, row skipped", line_no)
            continue
        month = reader.number(row, mapping.month, line_no, "month")
        if month is None or month < 0:
            if strict:
                raise ParseError(f"line {line_no}: invalid month {month!r}")
            logger.warning("line %d: invalid month, row skipped", line_no)
            continue

        dx_raw = reader.cell(row, mapping.dx)
        dx = encode_diagnosis(dx_raw) if dx_raw is not None else None

        feats: dict[str, Optional[float]] = {}
        for fname, fcol in mapping.features.items():
            value = reader.number(row, fcol, line_no, fname)
            low, high, strict_low = FEATURE_RANGES.get(fname, (None, None, False))
            feats[fname] = reader.ranged(value, low, high, strict_low,
                                         line_no, fname)

        key = (pid, month)
        if key in visits:
            if strict:
                raise SchemaError(
                    f"line {line_no}: duplicate visit for patient {pid} "
                    f"at month {month}")
            logger.warning("duplicate visit (%s, %s): keeping last row read",
                           pid, month)
        visits[key] = Visit(patient_id=pid, month=month, dx=dx, features=feats)

        demo = {
            "apoe4": reader.ranged(
                reader.number(row, mapping.apoe4, line_no, "APOE4"),
                0, 2, False, line_no, "APOE4"),
            "is_male": _parse_gender(reader, row, mapping.gender, line_no),
            "educ": reader.ranged(
                reader.number(row, mapping.educ, line_no, "educ"),
                0, None, False, line_no, "educ"),
            "marital": _parse_marital(reader, row, mapping.marital, line_no),
            "baseline_age": reader.ranged(
                reader.number(row, mapping.age, line_no, "age"),
                0, None, False, line_no, "age"),
        }
        demo_obs.setdefault(pid, []).append((month, demo))
        flags.setdefault(pid, []).append(
            (reader.flag(row, mapping.d1), reader.flag(row, mapping.d2)))

    by_patient: dict[str, list[Visit]] = {}
    for (pid, _), visit in visits.items():
        by_patient.setdefault(pid, []).append(visit)

    patients: dict[str, PatientHistory] = {}
    for pid in sorted(by_patient):
        ordered = tuple(sorted(by_patient[pid], key=lambda v: v.month))
        demographics = _resolve_demographics(demo_obs[pid])
        d1 = any(f[0] for f in flags[pid])
        d2 = any(f[1] for f in flags[pid])
        # files without split columns mean a single undivided training set
        if mapping.d1 not in header and mapping.d2 not in header:
            d1 = True
        patients[pid] = PatientHistory(
            patient_id=pid, demographics=demographics, visits=ordered,
            in_d1=d1, in_d2=d2)

    schema = tuple(mapping.features)
    return Cohort(patients=patients, schema=schema)


def _parse_gender(reader, row, column, line_no) -> Optional[bool]:
    raw = reader.cell(row, column)
    if raw is None:
        return None
    key = raw.strip().lower()
    if key in {"male", "m", "1"}:
        return True
    if key in {"female", "f", "0"}:
        return False
    if reader.strict:
        raise EncodingError(f"line {line_no}: unknown gender label {raw!r}")
    logger.warning("line %d: unknown gender label %r, treated as missing",
                   line_no, raw)
    return None


def _parse_marital(reader, row, column, line_no) -> Optional[int]:
    raw = reader.cell(row, column)
    if raw is None:
        return None
    if raw in MARITAL_VOCABULARY:
        return MARITAL_VOCABULARY[raw]
    if reader.strict:
        raise EncodingError(f"line {line_no}: unknown marital label {raw!r}")
    logger.warning("line %d: unknown marital label %r, treated as missing",
                   line_no, raw)
    return None


def _resolve_demographics(observed: list[tuple[float, dict]]) -> Demographics:
    """First non-missing value by ascending month wins, per field."""
    resolved: dict[str, object] = {}
    for _, demo in sorted(observed, key=lambda mv: mv[0]):
        for name, value in demo.items():
            if name not in resolved and value is not None:
                resolved[name] = value
    apoe4 = resolved.get("apoe4")
    return Demographics(
        apoe4=None if apoe4 is None else int(apoe4),
        is_male=resolved.get("is_male"),
        educ=resolved.get("educ"),
        marital=resolved.get("marital"),
        baseline_age=resolved.get("baseline_age"),
    )


def dump_cohort(cohort: Cohort, mapping: Optional[ColumnMap] = None) -> str:
    """Canonical tabular dump; parse(dump(c)) reproduces c field-for-field."""
    mapping = mapping or ColumnMap()
    columns = [mapping.patient_id, mapping.month, mapping.dx,
               *[mapping.features[f] for f in cohort.schema],
               mapping.apoe4, mapping.gender, mapping.educ, mapping.marital,
               mapping.age, mapping.d1, mapping.d2]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for pid in sorted(cohort.patients):
        patient = cohort.patients[pid]
        demo = patient.demographics
        for visit in patient.visits:
            writer.writerow([
                pid,
                _num(visit.month),
                diagnosis_label(visit.dx),
                *[_num(visit.features.get(f)) for f in cohort.schema],
                "" if demo.apoe4 is None else demo.apoe4,
                "" if demo.is_male is None else ("Male" if demo.is_male else "Female"),
                _num(demo.educ),
                "" if demo.marital is None else _MARITAL_LABELS[demo.marital],
                _num(demo.baseline_age),
                1 if patient.in_d1 else 0,
                1 if patient.in_d2 else 0,
            ])
    return out.getvalue()


def _num(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))

"""History summarization: one fixed-length row per (cutoff, target) pair.

Every numeric feature is reduced to seven statistics over the visits
before the prediction time t: the most recent value and its age, the
change rate between the two most recent observations, and the min/max
values with the time since their earliest attainment. The diagnosis
series gets ordinal analogues plus a reversion ("milder") flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .cohort import DiagnosisState, PatientHistory, Task, target_value
from .errors import ContractViolation

NUMERIC_STAT_NAMES = ("mr", "time_since_mr", "mr_change",
                      "low", "time_since_low", "high", "time_since_high")
DX_COLUMNS = ("mr_DX", "time_since_mr_DX", "best_DX", "time_since_best_DX",
              "worst_DX", "time_since_worst_DX", "milder_DX")
DEMO_COLUMNS = ("apoe4", "is_male", "educ", "marital", "current_age")
AUX_COLUMNS = ("baseline_age", "mr_target")


@dataclass(frozen=True)
class NumericSummary:
    """Summary of one feature's observations strictly before time t."""

    mr: Optional[float] = None            # most recent value
    dt_mr: Optional[float] = None         # months from last observation to t
    mr_change: Optional[float] = None     # slope of the two latest observations
    low: Optional[float] = None
    dt_low: Optional[float] = None        # t minus earliest attainment of low
    high: Optional[float] = None
    dt_high: Optional[float] = None


@dataclass(frozen=True)
class DxSummary:
    mr_dx: Optional[DiagnosisState] = None
    dt_mr_dx: Optional[float] = None
    best_dx: Optional[DiagnosisState] = None     # ordinal minimum over history
    dt_best: Optional[float] = None
    worst_dx: Optional[DiagnosisState] = None    # ordinal maximum over history
    dt_worst: Optional[float] = None
    milder_flag: Optional[bool] = None           # mr_dx < worst_dx


@dataclass(frozen=True)
class L2CRow:
    """One cross-sectional snapshot: features from history, target ahead.

    `features` holds every model input plus the aux columns
    (baseline_age, mr_target) keyed by column name; `target` is the task
    outcome at target_month when observed there.
    """

    patient_id: str
    cutoff_month: float
    target_month: float
    features: dict[str, Optional[float]]
    target: Optional[float] = None

    @property
    def horizon(self) -> float:
        return self.features["horizon"]


def _check_observations(months: Sequence[float], t: float) -> None:
    prev = None
    for s in months:
        if s >= t:
            raise ContractViolation(
                f"observation month {s} not before target {t}")
        if prev is not None and s <= prev:
            raise ContractViolation(
                f"observation months not strictly increasing at {s}")
        prev = s


def summarize_numeric(observations: Sequence[tuple[float, float]],
                      t: float) -> NumericSummary:
    """Reduce (month, value) pairs observed before t to the seven statistics.

    Empty input leaves every field missing; a single observation leaves
    only the change rate missing. Min/max ties resolve to the earliest
    attainment month.
    """
    months = [s for s, _ in observations]
    _check_observations(months, t)
    if not observations:
        return NumericSummary()

    t_star, x_star = observations[-1]
    mr_change = None
    if len(observations) >= 2:
        t_ss, x_ss = observations[-2]
        mr_change = (x_star - x_ss) / (t_star - t_ss)

    values = [x for _, x in observations]
    low = min(values)
    high = max(values)
    s_low = next(s for s, x in observations if x == low)
    s_high = next(s for s, x in observations if x == high)
    return NumericSummary(
        mr=x_star, dt_mr=t - t_star, mr_change=mr_change,
        low=low, dt_low=t - s_low,
        high=high, dt_high=t - s_high,
    )


def summarize_diagnosis(observations: Sequence[tuple[float, DiagnosisState]],
                        t: float) -> DxSummary:
    """Ordinal summary of the diagnosis series before t."""
    months = [s for s, _ in observations]
    _check_observations(months, t)
    if not observations:
        return DxSummary()

    t_star, mr_dx = observations[-1]
    best = min(dx for _, dx in observations)
    worst = max(dx for _, dx in observations)
    s_best = next(s for s, dx in observations if dx == best)
    s_worst = next(s for s, dx in observations if dx == worst)
    return DxSummary(
        mr_dx=mr_dx, dt_mr_dx=t - t_star,
        best_dx=best, dt_best=t - s_best,
        worst_dx=worst, dt_worst=t - s_worst,
        milder_flag=mr_dx < worst,
    )


def numeric_columns(feature: str) -> tuple[str, ...]:
    return (f"mr_{feature}", f"time_since_mr_{feature}",
            f"mr_change_{feature}", f"low_{feature}",
            f"time_since_low_{feature}", f"high_{feature}",
            f"time_since_high_{feature}")


def feature_columns(feature_names: Sequence[str]) -> list[str]:
    """Model-input column order: horizon, per-feature stats, DX, demographics."""
    cols = ["horizon"]
    for feature in feature_names:
        cols.extend(numeric_columns(feature))
    cols.extend(DX_COLUMNS)
    cols.extend(DEMO_COLUMNS)
    return cols


def build_row(patient: PatientHistory, cutoff_index: int, target_month: float,
              task: Task, feature_names: Sequence[str],
              vent_scale: float = 1.0) -> L2CRow:
    """Assemble the snapshot using visits[0..cutoff_index] as history.

    The target value is filled only when the patient has a visit exactly
    at target_month with the task outcome recorded there.
    """
    if not 0 <= cutoff_index < len(patient.visits):
        raise ContractViolation(f"cutoff index {cutoff_index} out of range")
    history = patient.visits[:cutoff_index + 1]
    cutoff_month = history[-1].month
    if target_month <= cutoff_month:
        raise ContractViolation(
            f"target month {target_month} not after cutoff {cutoff_month}")

    features: dict[str, Optional[float]] = {
        "horizon": target_month - cutoff_month}

    for feature in feature_names:
        obs = [(v.month, v.features[feature]) for v in history
               if v.features.get(feature) is not None]
        summary = summarize_numeric(obs, target_month)
        (features[f"mr_{feature}"], features[f"time_since_mr_{feature}"],
         features[f"mr_change_{feature}"], features[f"low_{feature}"],
         features[f"time_since_low_{feature}"], features[f"high_{feature}"],
         features[f"time_since_high_{feature}"]) = (
            summary.mr, summary.dt_mr, summary.mr_change, summary.low,
            summary.dt_low, summary.high, summary.dt_high)

    dx_obs = [(v.month, v.dx) for v in history if v.dx is not None]
    dx = summarize_diagnosis(dx_obs, target_month)
    features["mr_DX"] = None if dx.mr_dx is None else float(dx.mr_dx)
    features["time_since_mr_DX"] = dx.dt_mr_dx
    features["best_DX"] = None if dx.best_dx is None else float(dx.best_dx)
    features["time_since_best_DX"] = dx.dt_best
    features["worst_DX"] = None if dx.worst_dx is None else float(dx.worst_dx)
    features["time_since_worst_DX"] = dx.dt_worst
    features["milder_DX"] = (None if dx.milder_flag is None
                             else float(dx.milder_flag))

    demo = patient.demographics
    features["apoe4"] = None if demo.apoe4 is None else float(demo.apoe4)
    features["is_male"] = None if demo.is_male is None else float(demo.is_male)
    features["educ"] = demo.educ
    features["marital"] = None if demo.marital is None else float(demo.marital)
    features["current_age"] = (None if demo.baseline_age is None
                               else demo.baseline_age + target_month / 12)
    features["baseline_age"] = demo.baseline_age

    features["mr_target"] = _most_recent_target(history, task, vent_scale)

    target = None
    for visit in patient.visits:
        if visit.month == target_month:
            target = target_value(visit, task, vent_scale)
            break

    return L2CRow(patient_id=patient.patient_id, cutoff_month=cutoff_month,
                  target_month=target_month, features=features, target=target)


def _most_recent_target(history, task: Task, vent_scale: float) -> Optional[float]:
    """Last observed value of the task's own outcome series within history.

    This is what a carry-forward predictor emits; kept as an aux column so
    models never see it unless explicitly configured to.
    """
    for visit in reversed(history):
        value = target_value(visit, task, vent_scale)
        if value is not None:
            return value
    return None

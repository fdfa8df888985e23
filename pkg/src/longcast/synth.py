"""Seeded synthetic cohort generator for tests and demos.

Series shapes mimic the real cohort: ventricle volumes drift up
monotonically while the other volumes and cognition drift in their
clinically expected directions, and diagnoses progress ordinally with
occasional reversion so the milder flag gets exercised. Per-patient
trends are heterogeneous, which makes the last observation a better L1
predictor of the next value than the population median.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .cohort import (Cohort, Demographics, DiagnosisState, PatientHistory,
                     Visit, DEFAULT_FEATURES)
from .errors import ConfigError

# per-feature (start_low, start_high, monthly_rate_low, monthly_rate_high);
# positive rates grow, negative decay, all multiplicative and monotone
_SERIES = {
    "Ventricles": (15_000.0, 45_000.0, 0.004, 0.012),
    "WholeBrain": (900_000.0, 1_100_000.0, -0.0020, -0.0005),
    "Hippocampus": (5_500.0, 8_000.0, -0.0030, -0.0008),
    "Fusiform": (15_000.0, 20_000.0, -0.0020, -0.0005),
    "MidTemp": (17_000.0, 22_000.0, -0.0020, -0.0005),
    "ICV": (1_300_000.0, 1_700_000.0, 0.0, 0.0),
}

PROGRESSION_PROB = 0.15
REVERSION_PROB = 0.05


def synth_cohort(patients: int = 10, visits: int = 4,
                 max_visits: Optional[int] = None, seed: int = 0,
                 missingness: float = 0.0, d2_fraction: float = 0.5,
                 features: Sequence[str] = DEFAULT_FEATURES) -> Cohort:
    """Reproducible cohort: same arguments, same cohort, byte for byte.

    `missingness` independently blanks each feature cell and diagnosis;
    visit months always stay integral so time deltas are exact.
    """
    if patients < 1 or visits < 1:
        raise ConfigError("need at least one patient and one visit")
    if not 0.0 <= missingness < 1.0:
        raise ConfigError("missingness must be in [0, 1)")
    lo = visits
    hi = max_visits if max_visits is not None else visits
    if hi < lo:
        raise ConfigError("max_visits must be >= visits")

    rng = np.random.default_rng(seed)
    feature_list = tuple(features)
    histories: dict[str, PatientHistory] = {}

    for index in range(patients):
        pid = f"S{index:04d}"
        n = int(rng.integers(lo, hi + 1))
        months = np.concatenate([[0], np.cumsum(
            rng.choice([6, 12], size=n - 1))]).astype(float)

        demographics = Demographics(
            apoe4=int(rng.choice([0, 1, 2], p=[0.55, 0.35, 0.10])),
            is_male=bool(rng.random() < 0.5),
            educ=float(rng.integers(8, 21)),
            marital=int(rng.integers(0, 5)),
            baseline_age=float(np.round(rng.uniform(55.0, 90.0), 1)),
        )

        series = {}
        for name in feature_list:
            if name in _SERIES:
                s_lo, s_hi, r_lo, r_hi = _SERIES[name]
                start = rng.uniform(s_lo, s_hi)
                rate = rng.uniform(r_lo, r_hi)
                series[name] = start * (1.0 + rate) ** months
            elif name == "MMSE":
                start = rng.uniform(26.0, 30.0)
                slope = rng.uniform(0.0, 0.15)
                series[name] = np.clip(start - slope * months, 0.0, 30.0)
            elif name == "CDRSB":
                start = rng.uniform(0.0, 2.0)
                slope = rng.uniform(0.0, 0.10)
                series[name] = np.clip(start + slope * months, 0.0, 18.0)
            elif name == "ADAS13":
                start = rng.uniform(5.0, 15.0)
                slope = rng.uniform(0.0, 0.30)
                series[name] = np.maximum(start + slope * months, 0.0)
            else:
                series[name] = rng.uniform(0.0, 1.0) * np.ones_like(months)

        state = int(rng.choice([0, 1, 2], p=[0.4, 0.4, 0.2]))
        dx_path = []
        for _ in months:
            dx_path.append(state)
            move = rng.random()
            if move < PROGRESSION_PROB:
                state = min(state + 1, 2)
            elif move < PROGRESSION_PROB + REVERSION_PROB:
                state = max(state - 1, 0)

        visits_out = []
        for i, month in enumerate(months):
            feats = {}
            for name in feature_list:
                value = float(np.round(series[name][i], 4))
                feats[name] = None if rng.random() < missingness else value
            dx = (None if rng.random() < missingness
                  else DiagnosisState(dx_path[i]))
            visits_out.append(Visit(patient_id=pid, month=float(month),
                                    dx=dx, features=feats))

        histories[pid] = PatientHistory(
            patient_id=pid, demographics=demographics,
            visits=tuple(visits_out), in_d1=True, in_d2=False)

    # deterministic rollover subset: shuffled ids, first ceil(frac * N)
    ids = sorted(histories)
    order = list(ids)
    rng.shuffle(order)
    n_d2 = int(np.ceil(d2_fraction * patients))
    for pid in order[:n_d2]:
        histories[pid] = PatientHistory(
            patient_id=pid, demographics=histories[pid].demographics,
            visits=histories[pid].visits, in_d1=True, in_d2=True)

    return Cohort(patients={pid: histories[pid] for pid in ids},
                  schema=feature_list)

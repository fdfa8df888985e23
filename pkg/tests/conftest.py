import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from longcast.cohort import (Cohort, Demographics, DiagnosisState,
                             PatientHistory, Visit)

HOSTS_DIR = Path(__file__).parent / "hosts"


def make_patient(pid, months, dx=None, features=None, demographics=None,
                 in_d1=True, in_d2=False):
    """Hand-rolled patient; features maps name -> list aligned with months."""
    features = features or {}
    dx = dx or [None] * len(months)
    visits = []
    for i, month in enumerate(months):
        feats = {name: series[i] for name, series in features.items()}
        state = dx[i]
        visits.append(Visit(
            patient_id=pid, month=float(month),
            dx=None if state is None else DiagnosisState(state),
            features=feats))
    return PatientHistory(
        patient_id=pid,
        demographics=demographics or Demographics(
            apoe4=1, is_male=True, educ=16.0, marital=0, baseline_age=70.0),
        visits=tuple(visits), in_d1=in_d1, in_d2=in_d2)


@pytest.fixture
def two_visit_patient():
    return make_patient(
        "P1", [0, 6],
        dx=[0, 1],
        features={"MMSE": [28.0, 26.0], "ADAS13": [10.0, 12.0],
                  "Ventricles": [20000.0, 21000.0],
                  "ICV": [1500000.0, 1500000.0]})


@pytest.fixture
def cohort_csv_text():
    return (
        "RID,month_bl,DX,MMSE,CDRSB,ADAS13,Ventricles,WholeBrain,"
        "Hippocampus,Fusiform,MidTemp,ICV,APOE4,PTGENDER,PTEDUCAT,PTMARRY,"
        "AGE,D1,D2\n"
        "11,0,NL,29,0.5,8,20000,1000000,7000,18000,20000,1500000,"
        "0,Male,16,Married,71.2,1,0\n"
        "11,6,MCI,27,1.0,11,21000,995000,6900,17900,19900,1500000,"
        "0,Male,16,Married,71.2,1,0\n"
        "12,0,MCI,26,2.0,15,30000,980000,6500,17000,19000,1400000,"
        "1,Female,12,Widowed,75.0,1,1\n"
        "12,12,Dementia,22,4.5,22,33000,960000,6200,16500,18500,1400000,"
        "1,Female,12,Widowed,75.0,1,1\n"
    )

import json

import pytest

from longcast.cohort import Task
from longcast.errors import SchemaError
from longcast.synth import synth_cohort
from longcast.tables import (FeatureTable, TableSchema, augment_patient,
                             build_training_table, manifest_json,
                             snapshot_rows, table_from_csv, table_manifest,
                             table_to_csv)

from conftest import make_patient


def schema_for(task, features=("MMSE", "ADAS13")):
    return TableSchema(task=task, feature_names=tuple(features))


class TestAugmentPatient:
    def test_four_visits_give_six_rows(self):
        patient = make_patient("P", [0, 6, 12, 24],
                               features={"ADAS13": [10.0, 11.0, 12.0, 13.0]})
        rows = augment_patient(patient, Task.ADAS, schema_for(Task.ADAS))
        assert len(rows) == 6
        cutoffs = sorted(set(r.cutoff_month for r in rows))
        per_cutoff = {c: sum(1 for r in rows if r.cutoff_month == c)
                      for c in cutoffs}
        assert per_cutoff == {0.0: 3, 6.0: 2, 12.0: 1}

    def test_two_visits_single_row(self):
        patient = make_patient("P", [0, 9],
                               features={"ADAS13": [10.0, 11.0]})
        rows = augment_patient(patient, Task.ADAS, schema_for(Task.ADAS))
        assert len(rows) == 1
        assert rows[0].horizon == 9.0

    def test_single_visit_empty(self):
        patient = make_patient("P", [0], features={"ADAS13": [10.0]})
        assert augment_patient(patient, Task.ADAS,
                               schema_for(Task.ADAS)) == []

    def test_missing_target_rows_dropped(self):
        # five visits, ADAS missing at the fourth: three of the ten pairs
        # target month 18 and get dropped, leaving seven
        patient = make_patient(
            "P", [0, 6, 12, 18, 24],
            features={"ADAS13": [10.0, 11.0, 12.0, None, 14.0]})
        rows = augment_patient(patient, Task.ADAS, schema_for(Task.ADAS))
        assert len(rows) == 7
        assert all(r.target_month != 18.0 for r in rows)

    def test_dropped_count_matches_pair_enumeration(self):
        patient = make_patient(
            "P", [0, 6, 12, 18, 24],
            features={"ADAS13": [10.0, None, 12.0, None, 14.0]})
        rows = augment_patient(patient, Task.ADAS, schema_for(Task.ADAS))
        months = [v.month for v in patient.visits]
        present = {m for m, v in zip(months, [10.0, None, 12.0, None, 14.0])
                   if v is not None}
        expected = [(c, t) for i, c in enumerate(months)
                    for t in months[i + 1:] if t in present]
        assert [(r.cutoff_month, r.target_month) for r in rows] == expected

    def test_count_law_before_filtering(self):
        for n in range(2, 9):
            patient = make_patient("P", list(range(0, 6 * n, 6)),
                                   features={"ADAS13": [1.0] * n})
            rows = augment_patient(patient, Task.ADAS, schema_for(Task.ADAS))
            assert len(rows) == n * (n - 1) // 2

    def test_horizon_positive_and_exact(self):
        patient = make_patient("P", [0, 6, 18],
                               features={"ADAS13": [1.0, 2.0, 3.0]})
        for row in augment_patient(patient, Task.ADAS, schema_for(Task.ADAS)):
            assert row.horizon > 0
            assert row.horizon == row.target_month - row.cutoff_month


class TestBuildTrainingTable:
    def test_synthetic_cohort_count(self):
        cohort = synth_cohort(patients=10, visits=4, seed=1)
        table = build_training_table(cohort, Task.ADAS)
        assert len(table) == 60

    def test_deterministic_row_order(self):
        cohort = synth_cohort(patients=6, visits=3, seed=3)
        a = build_training_table(cohort, Task.DX)
        b = build_training_table(cohort, Task.DX)
        assert table_to_csv(a) == table_to_csv(b)
        keys = [(r.patient_id, r.cutoff_month, r.target_month) for r in a.rows]
        assert keys == sorted(keys)

    def test_membership_filter(self):
        cohort = synth_cohort(patients=8, visits=3, seed=2, d2_fraction=0.25)
        d1 = build_training_table(cohort, Task.ADAS, membership="D1")
        d2 = build_training_table(cohort, Task.ADAS, membership="D2")
        assert set(d2.patient_ids()) < set(d1.patient_ids())
        assert len(d2.patient_ids()) == 2

    def test_empty_selection_gives_valid_schema(self):
        cohort = synth_cohort(patients=3, visits=3, seed=0, d2_fraction=0.0)
        table = build_training_table(cohort, Task.ADAS, membership="D2")
        assert len(table) == 0
        assert table.schema.columns[0] == "patient_id"

    def test_snapshot_rows_are_consecutive_pairs(self):
        patient = make_patient("P", [0, 6, 12, 24],
                               features={"ADAS13": [1.0, 2.0, 3.0, 4.0]})
        rows = snapshot_rows(patient, Task.ADAS, schema_for(Task.ADAS))
        assert [(r.cutoff_month, r.target_month) for r in rows] == [
            (0.0, 6.0), (6.0, 12.0), (12.0, 24.0)]

    def test_no_augment_table(self):
        cohort = synth_cohort(patients=5, visits=4, seed=4)
        table = build_training_table(cohort, Task.ADAS, augment=False)
        assert len(table) == 5 * 3


class TestTableSerialization:
    def test_csv_round_trip(self):
        cohort = synth_cohort(patients=5, visits=4, seed=5, missingness=0.25)
        table = build_training_table(cohort, Task.VENT)
        text = table_to_csv(table)
        back = table_from_csv(text, task=Task.VENT)
        assert back.schema.feature_names == table.schema.feature_names
        assert back.rows == table.rows
        assert table_to_csv(back) == text

    def test_round_trip_with_manifest(self):
        cohort = synth_cohort(patients=3, visits=3, seed=6)
        table = build_training_table(cohort, Task.DX)
        manifest = json.loads(manifest_json(table))
        back = table_from_csv(table_to_csv(table), manifest=manifest)
        assert back.rows == table.rows
        assert back.schema == table.schema

    def test_manifest_roles(self):
        cohort = synth_cohort(patients=2, visits=2, seed=0)
        table = build_training_table(cohort, Task.ADAS)
        manifest = table_manifest(table)
        roles = {c["name"]: c["role"] for c in manifest["columns"]}
        assert roles["patient_id"] == "provenance"
        assert roles["horizon"] == "feature"
        assert roles["mr_MMSE"] == "feature"
        assert roles["mr_target"] == "aux"
        assert roles["baseline_age"] == "aux"
        assert roles["y"] == "target"
        assert manifest["row_count"] == len(table)

    def test_header_mismatch_raises(self):
        cohort = synth_cohort(patients=2, visits=2, seed=0)
        table = build_training_table(cohort, Task.ADAS)
        text = table_to_csv(table).replace("mr_MMSE", "mr_BOGUS", 1)
        with pytest.raises(SchemaError):
            table_from_csv(text, task=Task.ADAS)

    def test_missing_cells_stay_missing(self):
        cohort = synth_cohort(patients=4, visits=4, seed=7, missingness=0.5)
        table = build_training_table(cohort, Task.ADAS)
        back = table_from_csv(table_to_csv(table), task=Task.ADAS)
        missing = [name for row in table.rows
                   for name, v in row.features.items() if v is None]
        assert missing  # the generator did produce gaps
        assert back.rows == table.rows

    def test_compatibility_check(self):
        cohort = synth_cohort(patients=2, visits=2, seed=0)
        a = build_training_table(cohort, Task.ADAS)
        b = build_training_table(cohort, Task.VENT)
        with pytest.raises(SchemaError):
            a.check_compatible(b)
        a.check_compatible(FeatureTable(schema=a.schema, rows=[]))

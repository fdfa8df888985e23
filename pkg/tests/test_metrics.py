import json

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import roc_auc_score

from longcast.errors import ContractViolation, MetricUndefinedError
from longcast.metrics import (MetricReport, argmax_classes, bca,
                              compare_reports, mae, mauc, wilcoxon_exact)

from oracles import (oracle_bca, oracle_mauc, oracle_wilcoxon_one_sided)


def random_instance(rng, n_classes=3, n=40):
    labels = np.concatenate([np.arange(n_classes),
                             rng.integers(0, n_classes, n - n_classes)])
    rng.shuffle(labels)
    probs = rng.random((n, n_classes))
    probs /= probs.sum(axis=1, keepdims=True)
    # coarse grid to force ties now and then
    probs = np.round(probs, 1)
    return labels.tolist(), probs.tolist()


class TestMauc:
    def test_binary_spec_example(self):
        labels = [0, 0, 1, 1]
        p1 = [0.1, 0.4, 0.35, 0.8]
        probs = [[1 - p, p] for p in p1]
        assert mauc(labels, probs) == 0.75

    def test_perfect_separation(self):
        labels = [0, 1, 2, 0, 1, 2]
        probs = [[1, 0, 0], [0, 1, 0], [0, 0, 1]] * 2
        assert mauc(labels, probs) == 1.0

    def test_identical_probabilities_give_half(self):
        labels = [0, 1, 2, 1]
        probs = [[1 / 3] * 3] * 4
        assert mauc(labels, probs) == 0.5

    def test_absent_class_errors(self):
        with pytest.raises(MetricUndefinedError, match="class 2"):
            mauc([0, 1, 0], [[0.5, 0.3, 0.2]] * 3)

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            labels, probs = random_instance(rng)
            assert mauc(labels, probs) == pytest.approx(
                oracle_mauc(labels, probs), abs=1e-12)

    def test_binary_reduction_equals_classical_auc(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            labels, probs = random_instance(rng, n_classes=2, n=30)
            assert mauc(labels, probs) == pytest.approx(
                roc_auc_score(labels, [p[1] for p in probs]), abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        labels, probs = random_instance(rng)
        perm = rng.permutation(len(labels))
        assert mauc(labels, probs) == pytest.approx(
            mauc([labels[i] for i in perm], [probs[i] for i in perm]),
            abs=1e-12)


class TestBca:
    def test_perfect(self):
        assert bca([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0

    def test_spec_binary_example(self):
        assert bca([1, 1, 0, 0], [1, 0, 0, 0]) == 0.75

    def test_majority_predictor(self):
        assert bca([0, 0, 0, 1], [0, 0, 0, 0]) == 0.5

    def test_empty_undefined(self):
        with pytest.raises(MetricUndefinedError):
            bca([], [])

    def test_matches_confusion_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            labels = rng.integers(0, 3, 30).tolist()
            predicted = rng.integers(0, 3, 30).tolist()
            if not set(labels):
                continue
            assert bca(labels, predicted) == oracle_bca(labels, predicted)

    def test_argmax_first_max_wins(self):
        assert argmax_classes([[0.4, 0.4, 0.2]]) == [0]
        assert argmax_classes([[0.1, 0.45, 0.45]]) == [1]


class TestMae:
    def test_zero_on_equal(self):
        assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_example(self):
        assert mae([1, 2, 3], [2, 2, 2]) == pytest.approx(2 / 3)

    def test_median_zero_example(self):
        assert mae([0.0, 0.0, 10.0], [0.0, 0.0, 0.0]) == pytest.approx(10 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            mae([1.0], [1.0, 2.0])

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            mae([], [])

    def test_nonfinite_rejected(self):
        with pytest.raises(ContractViolation):
            mae([np.nan], [1.0])


class TestWilcoxonExact:
    def test_five_same_sign_distinct(self):
        assert wilcoxon_exact([0.1, 0.2, 0.3, 0.4, 0.5]) == 0.03125

    def test_four_same_sign(self):
        assert wilcoxon_exact([1.0, 2.0, 3.0, 4.0]) == 0.0625

    def test_single_difference(self):
        assert wilcoxon_exact([2.0]) == 0.5

    def test_zero_differences_dropped(self):
        assert wilcoxon_exact([0.0, 1.0, 2.0, 0.0, 3.0]) == 0.125

    def test_all_zero_undefined(self):
        with pytest.raises(MetricUndefinedError):
            wilcoxon_exact([0.0, 0.0])

    def test_too_many_rejected(self):
        with pytest.raises(ContractViolation):
            wilcoxon_exact(list(range(1, 27)))

    def test_unknown_alternative(self):
        with pytest.raises(ContractViolation):
            wilcoxon_exact([1.0], alternative="sideways")

    @pytest.mark.parametrize("n", range(1, 9))
    def test_matches_direct_enumeration(self, n):
        rng = np.random.default_rng(n)
        for _ in range(20):
            diffs = np.round(rng.normal(size=n), 1)
            diffs = diffs[diffs != 0]
            if len(diffs) == 0:
                continue
            assert wilcoxon_exact(diffs.tolist()) == pytest.approx(
                oracle_wilcoxon_one_sided(diffs.tolist()), abs=1e-12)

    def test_matches_scipy_on_tie_free_input(self):
        rng = np.random.default_rng(9)
        for n in (4, 6, 8, 10, 12):
            diffs = rng.normal(size=n)
            while len(np.unique(np.abs(diffs))) != n:
                diffs = rng.normal(size=n)
            expected = scipy.stats.wilcoxon(
                diffs, alternative="greater", mode="exact").pvalue
            assert wilcoxon_exact(diffs.tolist()) == pytest.approx(
                expected, abs=1e-12)

    @given(st.lists(st.floats(-5, 5, allow_nan=False).filter(lambda d: d != 0),
                    min_size=1, max_size=8))
    @settings(max_examples=100)
    def test_negation_symmetry(self, diffs):
        p_pos = wilcoxon_exact(diffs)
        p_neg = wilcoxon_exact([-d for d in diffs])
        # P(W <= w) + P(W <= N - w) = 1 + P(W = w) under the exact null
        total = p_pos + p_neg
        assert total >= 1.0 - 1e-12
        assert total <= 2.0

    def test_two_sided_doubles_clean_tail(self):
        one = wilcoxon_exact([1.0, 2.0, 3.0, 4.0, 5.0])
        two = wilcoxon_exact([1.0, 2.0, 3.0, 4.0, 5.0],
                             alternative="two-sided")
        assert two == pytest.approx(2 * one)

    def test_p_in_unit_interval(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            diffs = rng.normal(size=int(rng.integers(1, 12)))
            diffs = diffs[diffs != 0]
            if len(diffs) == 0:
                continue
            for alternative in ("one-sided", "two-sided"):
                p = wilcoxon_exact(diffs.tolist(), alternative=alternative)
                assert 0.0 < p <= 1.0


class TestReports:
    def test_aggregates(self):
        report = MetricReport.from_values("VENT", "MAE", "m",
                                          [1.0, 2.0, 3.0])
        assert report.mean == 2.0
        assert report.std == pytest.approx(1.0)

    def test_single_seed_std_zero(self):
        report = MetricReport.from_values("VENT", "MAE", "m", [1.5])
        assert report.std == 0.0

    def test_json_round_trip(self):
        report = MetricReport.from_values("DX", "MAUC", "m",
                                          [0.9, 0.91], mode="cv")
        again = MetricReport.from_dict(json.loads(report.to_json()))
        assert again.per_seed == report.per_seed
        assert again.extra == report.extra

    def test_compare_lower_better_significant(self):
        a = MetricReport.from_values("VENT", "MAE", "a",
                                     [0.15, 0.16, 0.155, 0.158, 0.151])
        b = MetricReport.from_values("VENT", "MAE", "b",
                                     [0.17, 0.18, 0.175, 0.178, 0.171])
        result = compare_reports(a, b)
        assert result.comparison.winner == "a"
        assert result.comparison.p_value == 0.03125
        assert result.comparison.significant

    def test_compare_higher_better(self):
        a = MetricReport.from_values("DX", "MAUC", "a",
                                     [0.91, 0.92, 0.915, 0.918, 0.911])
        b = MetricReport.from_values("DX", "MAUC", "b",
                                     [0.93, 0.94, 0.935, 0.938, 0.931])
        result = compare_reports(a, b)
        assert result.comparison.winner == "b"
        assert result.comparison.p_value == 0.03125

    def test_compare_not_significant_with_mixed_signs(self):
        a = MetricReport.from_values("DX", "BCA", "a", [0.80, 0.70, 0.79])
        b = MetricReport.from_values("DX", "BCA", "b", [0.78, 0.75, 0.76])
        result = compare_reports(a, b)
        assert result.comparison.p_value > 0.05
        assert not result.comparison.significant

    def test_compare_mismatched_reports(self):
        a = MetricReport.from_values("DX", "MAUC", "a", [0.9])
        b = MetricReport.from_values("DX", "BCA", "b", [0.8])
        with pytest.raises(ContractViolation):
            compare_reports(a, b)

    def test_render_text_mentions_significance(self):
        a = MetricReport.from_values("VENT", "MAE", "a",
                                     [0.1, 0.11, 0.12, 0.105, 0.115])
        b = MetricReport.from_values("VENT", "MAE", "b",
                                     [0.2, 0.21, 0.22, 0.205, 0.215])
        text = compare_reports(a, b).render_text()
        assert "winner a" in text and "*" in text

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfcrime.features import (
    BASE_COLUMNS,
    FeatureMatrix,
    anova_f_scores,
    apply_selection,
    apply_standardizer,
    build_features,
    fit_standardizer,
    load_matrix,
    pca_fit,
    pca_transform,
    save_matrix,
    select_percentile,
    stratified_subsample,
    train_test_split,
)
from sfcrime.ingest import CrimeRecord

from conftest import random_matrix
from oracles import anova_f_oracle, covariance_eigvals_oracle


def simple_matrix(n=20, d=3, k=2, seed=0):
    return random_matrix(np.random.default_rng(seed), n, d, k)


class TestFeatureMatrix:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            FeatureMatrix(np.array([[1.0, np.nan]]), ("a", "b"), np.array([0]))

    def test_rejects_mismatched_names(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((2, 2)), ("a",), np.array([0, 1]))

    def test_rejects_mismatched_labels(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((2, 2)), ("a", "b"), np.array([0]))


class TestBuildFeatures:
    RECORD = CrimeRecord(year=2015, month=5, date=13, hour=23, day_code=6,
                         district_code=3, address_code=41, x=-122.43, y=37.77,
                         label=5)

    def test_single_record_row(self):
        m = build_features([self.RECORD], use_time_block=True)
        assert m.column_names == BASE_COLUMNS
        # hour 23 falls in the night block (code 3)
        assert m.values[0].tolist() == [2015, 5, 13, 23, 3, 6, 3, 41, -122.43, 37.77]
        assert m.labels.tolist() == [5]

    def test_time_block_flag_drops_column(self):
        m = build_features([self.RECORD], use_time_block=False)
        assert m.d == len(BASE_COLUMNS) - 1
        assert "time_block" not in m.column_names

    def test_empty_input(self):
        with pytest.raises(ValueError):
            build_features([])


class TestTrainTestSplit:
    def test_quarter_of_1000(self):
        m = simple_matrix(n=1000)
        sp = train_test_split(m, 0.25, seed=3)
        assert sp.test.n == 250
        assert sp.train.n == 750

    def test_deterministic(self):
        m = simple_matrix(n=97)
        a = train_test_split(m, 0.25, seed=9)
        b = train_test_split(m, 0.25, seed=9)
        assert np.array_equal(a.test.values, b.test.values)
        assert np.array_equal(a.train.labels, b.train.labels)

    def test_tiny_rounding(self):
        m = simple_matrix(n=4)
        sp = train_test_split(m, 0.25, seed=0)
        assert sp.test.n == 1

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.5, 2.0])
    def test_bad_fraction(self, fraction):
        with pytest.raises(ValueError):
            train_test_split(simple_matrix(), fraction, 0)

    def test_too_small(self):
        m = FeatureMatrix(np.zeros((1, 2)), ("a", "b"), np.array([0]))
        with pytest.raises(ValueError):
            train_test_split(m, 0.5, 0)

    @given(st.integers(2, 200), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_disjoint_and_exhaustive(self, n, fraction, seed):
        values = np.arange(n, dtype=float).reshape(n, 1)  # row identity via value
        m = FeatureMatrix(values, ("id",), np.zeros(n, dtype=int))
        sp = train_test_split(m, fraction, seed)
        train_ids = set(sp.train.values[:, 0].tolist())
        test_ids = set(sp.test.values[:, 0].tolist())
        assert train_ids | test_ids == set(float(i) for i in range(n))
        assert not train_ids & test_ids
        assert abs(sp.test.n - round(fraction * n)) <= 1


class TestStratifiedSubsample:
    def test_exact_size_and_proportions(self):
        rng = np.random.default_rng(0)
        labels = np.repeat([0, 1, 2], [600, 300, 100])
        m = FeatureMatrix(rng.normal(size=(1000, 2)), ("a", "b"), labels)
        sub = stratified_subsample(m, 200, seed=1)
        assert sub.n == 200
        counts = np.bincount(sub.labels)
        assert counts.tolist() == [120, 60, 20]

    def test_noop_when_large_enough(self):
        m = simple_matrix(n=50)
        assert stratified_subsample(m, 500, seed=0) is m

    def test_deterministic(self):
        m = simple_matrix(n=300, k=4, seed=2)
        a = stratified_subsample(m, 80, seed=5)
        b = stratified_subsample(m, 80, seed=5)
        assert np.array_equal(a.values, b.values)


class TestPCA:
    def test_rank_one_line(self):
        t = np.linspace(-3, 3, 40)
        values = np.stack([t, 2 * t], axis=1)
        m = FeatureMatrix(values, ("x", "y"), np.zeros(40, dtype=int))
        model = pca_fit(m, 2)
        expected = np.array([1.0, 2.0]) / np.sqrt(5.0)
        assert np.allclose(model.components[0], expected, atol=1e-10)
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-10)

    def test_full_basis_reconstruction(self):
        m = simple_matrix(n=30, d=4, seed=1)
        model = pca_fit(m, 4)
        projected = pca_transform(model, m)
        reconstructed = projected.values @ model.components + model.mean
        assert np.allclose(reconstructed, m.values, atol=1e-8)

    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(7)
        values = rng.normal(size=(100, 5)) @ rng.normal(size=(5, 5))
        m = FeatureMatrix(values, tuple("abcde"), np.zeros(100, dtype=int))
        model = pca_fit(m, 5)
        oracle = covariance_eigvals_oracle(values)
        assert np.allclose(model.explained_variance, oracle, rtol=1e-6)

    def test_orthonormal_components(self):
        m = simple_matrix(n=60, d=5, seed=3)
        model = pca_fit(m, 4)
        gram = model.components @ model.components.T
        assert np.allclose(gram, np.eye(4), atol=1e-8)

    def test_variances_non_increasing(self):
        m = simple_matrix(n=80, d=6, seed=4)
        ev = pca_fit(m, 6).explained_variance
        assert np.all(np.diff(ev) <= 1e-12)

    def test_transform_of_mean_is_zero(self):
        m = simple_matrix(n=25, d=3, seed=5)
        model = pca_fit(m, 3)
        row = FeatureMatrix(model.mean[None, :], m.column_names, np.array([0]))
        out = pca_transform(model, row)
        assert np.allclose(out.values, 0.0, atol=1e-10)

    def test_component_row_maps_to_unit_axis(self):
        m = simple_matrix(n=25, d=3, seed=6)
        model = pca_fit(m, 3)
        row = FeatureMatrix((model.mean + model.components[0])[None, :],
                            m.column_names, np.array([0]))
        out = pca_transform(model, row)
        assert np.allclose(out.values[0], [1.0, 0.0, 0.0], atol=1e-8)

    def test_transformed_covariance_is_diagonal(self):
        m = simple_matrix(n=200, d=4, seed=8)
        model = pca_fit(m, 4)
        out = pca_transform(model, m)
        cov = np.cov(out.values, rowvar=False)
        assert np.allclose(cov, np.diag(model.explained_variance), atol=1e-8)

    def test_k_out_of_range(self):
        m = simple_matrix(d=3)
        for k in (0, 4):
            with pytest.raises(ValueError):
                pca_fit(m, k)

    def test_dimension_mismatch(self):
        model = pca_fit(simple_matrix(d=3), 2)
        with pytest.raises(ValueError):
            pca_transform(model, simple_matrix(d=4, seed=1))


class TestAnova:
    def test_constant_feature_scores_zero(self):
        values = np.column_stack([np.ones(10), np.arange(10.0)])
        labels = np.array([0] * 5 + [1] * 5)
        m = FeatureMatrix(values, ("const", "ramp"), labels)
        scores = anova_f_scores(m)
        assert scores[0] == 0.0

    def test_perfect_separator_gets_sentinel(self):
        labels = np.array([0] * 5 + [1] * 5)
        values = labels[:, None].astype(float)
        m = FeatureMatrix(values, ("sep",), labels)
        scores = anova_f_scores(m)
        assert scores[0] == np.finfo(np.float64).max

    def test_matches_oracle(self):
        rng = np.random.default_rng(12)
        m = random_matrix(rng, 60, 3, 3)
        scores = anova_f_scores(m)
        oracle = anova_f_oracle(m.values, m.labels)
        assert np.allclose(scores, oracle, rtol=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(13)
        m = random_matrix(rng, 50, 4, 3)
        perm = rng.permutation(50)
        permuted = FeatureMatrix(m.values[perm], m.column_names, m.labels[perm])
        assert np.allclose(anova_f_scores(m), anova_f_scores(permuted), rtol=1e-9)

    def test_single_class_rejected(self):
        m = FeatureMatrix(np.random.default_rng(0).normal(size=(10, 2)),
                          ("a", "b"), np.zeros(10, dtype=int))
        with pytest.raises(ValueError):
            anova_f_scores(m)

    def test_more_classes_than_samples_rejected(self):
        m = FeatureMatrix(np.eye(3), ("a", "b", "c"), np.array([0, 1, 2]))
        with pytest.raises(ValueError):
            anova_f_scores(m)


class TestSelectPercentile:
    def test_half_of_four(self):
        sel = select_percentile(np.array([5.0, 1.0, 3.0, 2.0]), 50)
        assert sel.selected == (0, 2)

    def test_hundred_selects_all(self):
        sel = select_percentile(np.array([5.0, 1.0, 3.0]), 100)
        assert sel.selected == (0, 1, 2)

    def test_tie_breaks_to_lower_index(self):
        # ceil(33% of 3) = 1 feature; all scores equal, lowest index wins
        sel = select_percentile(np.array([2.0, 2.0, 2.0]), 33)
        assert sel.selected == (0,)
        # ceil(34% of 3) = 2 features, still filled in index order
        sel = select_percentile(np.array([2.0, 2.0, 2.0]), 34)
        assert sel.selected == (0, 1)

    def test_minimum_one_feature(self):
        sel = select_percentile(np.array([1.0, 2.0, 3.0]), 1)
        assert sel.selected == (2,)

    @pytest.mark.parametrize("p", [0, -5, 101])
    def test_bad_percentile(self, p):
        with pytest.raises(ValueError):
            select_percentile(np.array([1.0]), p)

    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=12),
           st.integers(1, 99))
    @settings(max_examples=100)
    def test_monotone_in_percentile(self, raw_scores, p):
        scores = np.array(raw_scores)
        lower = set(select_percentile(scores, p).selected)
        higher = set(select_percentile(scores, min(p + 17, 100)).selected)
        assert lower <= higher

    def test_apply_selection(self):
        m = simple_matrix(n=10, d=4)
        sel = select_percentile(np.array([1.0, 9.0, 3.0, 7.0]), 50)
        out = apply_selection(m, sel)
        assert out.column_names == (m.column_names[1], m.column_names[3])


class TestStandardizer:
    def test_zscores_columns(self):
        m = simple_matrix(n=200, d=3, seed=9)
        s = fit_standardizer(m)
        out = apply_standardizer(s, m)
        assert np.allclose(out.values.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(out.values.std(axis=0), 1.0, atol=1e-10)

    def test_constant_column_maps_to_zero(self):
        values = np.column_stack([np.full(5, 7.0), np.arange(5.0)])
        m = FeatureMatrix(values, ("c", "r"), np.zeros(5, dtype=int))
        out = apply_standardizer(fit_standardizer(m), m)
        assert np.all(out.values[:, 0] == 0.0)


class TestMatrixCache:
    def test_round_trip(self, tmp_path):
        m = simple_matrix(n=17, d=4, seed=10)
        path = tmp_path / "m.bin"
        save_matrix(m, path)
        back = load_matrix(path)
        assert back.column_names == m.column_names
        assert np.array_equal(back.values, m.values)
        assert np.array_equal(back.labels, m.labels)

    def test_cache_bytes_deterministic(self, tmp_path):
        m = simple_matrix(n=9, d=2, seed=11)
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        save_matrix(m, a)
        save_matrix(m, b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_matrix(path)

import io
import math

import numpy as np
from django.test import SimpleTestCase, tag

from predictslums.exceptions import DataError, DegenerateDataError, NumericalError, SingularHessianError
from predictslums.hotspot import Category, GridLattice, Label
from predictslums.inference import (
    MNL_CATEGORIES,
    MnlModel,
    MnlSample,
    _design,
    fit_mnl,
    format_mnl_report,
    group_t_tests,
    mnl_diagnostics,
    mnl_log_likelihood,
    mnl_predict,
    samples_from_grid,
    student_from_summary,
    student_t_test,
    welch_from_summary,
    welch_t_test,
    write_coefficients_csv,
    write_ttest_csv,
)

# rows cold, hot; columns intercept, nneighbors, formal
CAIRO_BETA = np.array([
    [-0.421, -0.041, 1.603],
    [-4.657, 0.085, -0.626],
])


def simulate_samples(beta, n, seed):
    rng = np.random.default_rng(seed)
    nn = rng.integers(0, 101, size=n)
    formal = rng.integers(0, 2, size=n)
    utilities = np.column_stack([np.zeros(n), np.column_stack([np.ones(n), nn, formal]) @ beta.T])
    probs = np.exp(utilities - utilities.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    draws = np.minimum((rng.random(n)[:, None] > probs.cumsum(axis=1)).sum(axis=1), 2)
    return [MnlSample(MNL_CATEGORIES[j], int(a), int(f)) for j, a, f in zip(draws, nn, formal)]


class TTestTests(SimpleTestCase):

    def test_identical_groups(self):
        result = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        self.assertEqual(result.t, 0.0)
        self.assertAlmostEqual(result.p_value, 1.0)

    def test_welch_small_groups(self):
        result = welch_t_test([1, 2, 3, 4], [2, 3, 4, 5])
        self.assertAlmostEqual(result.t, -1.0954, places=4)
        self.assertAlmostEqual(result.df, 6.0, places=9)
        self.assertLess(result.ci_low, -1.0)
        self.assertGreater(result.ci_high, -1.0)

    def test_cairo_summary_welch(self):
        result = welch_from_summary(46.192, 21.982, 27976, 64.102, 17.026, 15754)
        self.assertAlmostEqual(result.t, -94.83, delta=0.05)
        self.assertAlmostEqual(result.df, 39573, delta=100)
        self.assertAlmostEqual(result.ci_low, -18.28, delta=0.01)
        self.assertAlmostEqual(result.ci_high, -17.54, delta=0.01)
        self.assertLess(result.p_value, 1e-10)

    def test_cairo_summary_student(self):
        result = student_from_summary(46.192, 21.982, 27976, 64.102, 17.026, 15754)
        self.assertAlmostEqual(result.t, -88.42, delta=0.1)
        self.assertEqual(result.df, 27976 + 15754 - 2)

    def test_student_matches_welch_for_equal_sizes_and_variances(self):
        a, b = [1.0, 3.0, 5.0, 7.0], [2.0, 4.0, 6.0, 8.0]
        self.assertAlmostEqual(student_t_test(a, b).t, welch_t_test(a, b).t)

    def test_swapping_groups_negates_the_statistic(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            a = rng.normal(10, 3, size=int(rng.integers(3, 40)))
            b = rng.normal(12, 5, size=int(rng.integers(3, 40)))
            forward, backward = welch_t_test(a, b), welch_t_test(b, a)
            self.assertAlmostEqual(backward.t, -forward.t, places=12)
            self.assertAlmostEqual(backward.p_value, forward.p_value, places=12)
            self.assertAlmostEqual(backward.df, forward.df, places=9)
            self.assertAlmostEqual(backward.ci_low, -forward.ci_high, places=9)
            self.assertAlmostEqual(backward.ci_high, -forward.ci_low, places=9)

    def test_zero_variance(self):
        with self.assertRaises(DegenerateDataError):
            welch_t_test([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])

    def test_group_too_small(self):
        with self.assertRaises(DataError):
            welch_t_test([1.0], [1.0, 2.0])

    def test_grid_groups(self):
        grid = GridLattice((0.0, 0.0), 100.0, 3, 2)
        grid.nneighbors = np.array([10, 12, 14, 30, 34, 38])
        grid.gi_z = np.array([-1.0, -0.5, 0.0, 2.0, 2.5, 3.5])
        grid.label = np.array(['F', 'F', 'F', 'I', 'I', 'I'])
        results = group_t_tests(grid)
        self.assertEqual(set(results), {'nneighbors', 'gi_z'})
        self.assertLess(results['nneighbors']['welch'].t, 0)
        buffer = io.StringIO()
        write_ttest_csv(results, buffer)
        lines = buffer.getvalue().splitlines()
        self.assertEqual(len(lines), 5)
        self.assertTrue(lines[1].startswith('nneighbors,student,3,3,'))


class MnlPredictTests(SimpleTestCase):

    def test_zero_coefficients_are_uniform(self):
        probs = mnl_predict(MnlModel(beta=np.zeros((2, 3))), 64, 0)
        for cat in Category:
            self.assertAlmostEqual(probs[cat], 1 / 3)

    def test_cairo_coefficients(self):
        probs = mnl_predict(MnlModel(beta=CAIRO_BETA), 64, 0)
        self.assertAlmostEqual(probs[Category.HOT], 0.676, delta=0.002)
        self.assertAlmostEqual(sum(probs.values()), 1.0)

    def test_common_utility_shift_leaves_probabilities_unchanged(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            beta = rng.normal(0, 0.05, size=(2, 3))
            nn, formal = int(rng.integers(0, 101)), int(rng.integers(0, 2))
            probs = mnl_predict(MnlModel(beta=beta), nn, formal)
            self.assertAlmostEqual(sum(probs.values()), 1.0, places=12)
            utilities = np.r_[0.0, beta @ np.array([1.0, nn, formal])]
            for shift in (-30.0, 0.0, 25.0):
                weights = np.exp(utilities + shift)
                for j, cat in enumerate(MNL_CATEGORIES):
                    self.assertAlmostEqual(probs[cat], weights[j] / weights.sum(), places=12)

    def test_large_utilities_do_not_overflow(self):
        probs = mnl_predict(MnlModel(beta=np.array([[800.0, 0.0, 0.0], [-800.0, 0.0, 0.0]])), 10, 1)
        self.assertTrue(all(math.isfinite(p) for p in probs.values()))
        self.assertAlmostEqual(probs[Category.COLD], 1.0)
        self.assertAlmostEqual(sum(probs.values()), 1.0)

    def test_odds_ratios(self):
        odds = MnlModel(beta=CAIRO_BETA).odds_ratios
        self.assertEqual(round(odds[0, 1], 3), 0.960)
        self.assertEqual(round(odds[1, 1], 3), 1.089)
        self.assertEqual(round(odds[1, 2], 3), 0.535)
        self.assertAlmostEqual(odds[0, 2], 4.970, delta=0.005)


class FitMnlTests(SimpleTestCase):

    def test_constant_predictor_is_singular(self):
        samples = [MnlSample(cat, 5, f) for cat in Category for f in (0, 1, 1)]
        with self.assertRaises(SingularHessianError):
            fit_mnl(samples)

    def test_missing_category(self):
        samples = [MnlSample(Category.HOT, n, n % 2) for n in range(10)]
        samples += [MnlSample(Category.NOT_SIGNIFICANT, n, n % 2) for n in range(10)]
        with self.assertRaises(DataError):
            fit_mnl(samples)

    def test_uninformative_predictors_give_log_ratios(self):
        samples = []
        for nn in (0, 10):
            for formal in (0, 1):
                samples += [MnlSample(Category.NOT_SIGNIFICANT, nn, formal)] * 5
                samples += [MnlSample(Category.COLD, nn, formal)] * 3
                samples += [MnlSample(Category.HOT, nn, formal)] * 2
        model = fit_mnl(samples)
        self.assertTrue(model.converged)
        self.assertAlmostEqual(model.beta[0, 0], math.log(3 / 5), places=6)
        self.assertAlmostEqual(model.beta[1, 0], math.log(2 / 5), places=6)
        self.assertTrue(np.allclose(model.beta[:, 1:], 0.0, atol=1e-6))
        diagnostics = mnl_diagnostics(model, samples)
        self.assertAlmostEqual(diagnostics.pseudo_r2, 0.0, places=6)
        self.assertAlmostEqual(diagnostics.lr_chi2, 0.0, places=5)

    def test_score_and_hessian_match_finite_differences(self):
        X, y = _design(simulate_samples(CAIRO_BETA, 300, seed=3))
        X[:, 1] /= 50.0
        h = 1e-6
        for seed in range(20):
            with self.subTest(seed=seed):
                beta = np.random.default_rng(seed).normal(0, 0.3, size=(2, 3))
                _, grad, H = mnl_log_likelihood(beta, X, y)
                numeric_grad = np.zeros(6)
                numeric_hess = np.zeros((6, 6))
                for i in range(6):
                    step = np.zeros(6)
                    step[i] = h
                    up, g_up, _ = mnl_log_likelihood(beta + step.reshape(2, 3), X, y, hessian=False)
                    down, g_down, _ = mnl_log_likelihood(beta - step.reshape(2, 3), X, y, hessian=False)
                    numeric_grad[i] = (up - down) / (2 * h)
                    numeric_hess[:, i] = (g_up - g_down) / (2 * h)
                self.assertTrue(np.allclose(grad, numeric_grad, rtol=1e-5, atol=1e-5))
                self.assertTrue(np.allclose(H, numeric_hess, rtol=1e-4, atol=1e-4))

    def test_log_likelihood_never_decreases(self):
        for seed in (5, 6, 7):
            with self.subTest(seed=seed):
                model = fit_mnl(simulate_samples(CAIRO_BETA, 2000, seed=seed))
                path = np.asarray(model.log_likelihood_path)
                self.assertGreater(len(path), 2)
                self.assertTrue(np.all(np.diff(path) >= 0.0), path)
                self.assertEqual(path[-1], model.log_likelihood)
                self.assertGreaterEqual(model.log_likelihood, model.null_log_likelihood)

    def test_separated_categories(self):
        rng = np.random.default_rng(0)
        samples = []
        for nn in range(0, 60):
            cat = Category.COLD if nn < 20 else Category.NOT_SIGNIFICANT if nn < 40 else Category.HOT
            samples.append(MnlSample(cat, nn, int(rng.integers(0, 2))))
        try:
            model = fit_mnl(samples)
        except NumericalError:
            return
        self.assertGreater(mnl_diagnostics(model, samples).pseudo_r2, 0.99)

    def test_report_and_coefficients(self):
        samples = simulate_samples(CAIRO_BETA, 3000, seed=8)
        model = fit_mnl(samples)
        diagnostics = mnl_diagnostics(model, samples)
        self.assertEqual(diagnostics.confusion.sum(), 3000)
        self.assertEqual(diagnostics.lr_df, 4)
        report = format_mnl_report(model, diagnostics)
        self.assertIn('McFadden pseudo R2', report)
        self.assertIn('reference category: not significant', report)
        buffer = io.StringIO()
        write_coefficients_csv(model, buffer)
        lines = buffer.getvalue().splitlines()
        self.assertEqual(lines[0], 'category,term,b,se,wald,p,exp_b,exp_b_low,exp_b_high')
        self.assertEqual(len(lines), 7)
        self.assertTrue(lines[4].startswith('hot,intercept,'))

    @tag('slow')
    def test_recovers_simulated_coefficients(self):
        samples = simulate_samples(CAIRO_BETA, 50000, seed=21)
        model = fit_mnl(samples)
        self.assertTrue(model.converged)
        error = np.abs(model.beta - CAIRO_BETA)
        self.assertTrue(np.all(error <= 4 * model.standard_errors), error / model.standard_errors)
        self.assertLess(mnl_diagnostics(model, samples).lr_p, 0.001)


class SamplesFromGridTests(SimpleTestCase):

    def test_only_labeled_cells(self):
        grid = GridLattice((0.0, 0.0), 100.0, 3, 1)
        grid.nneighbors = np.array([4, 9, 16])
        grid.category = np.array(['H', 'N', 'C'])
        grid.label = np.array(['F', 'U', 'I'])
        samples = samples_from_grid(grid)
        self.assertEqual(samples, [MnlSample(Category.HOT, 4, 1), MnlSample(Category.COLD, 16, 0)])

    def test_unscored_grid(self):
        grid = GridLattice((0.0, 0.0), 100.0, 1, 1)
        grid.label = np.array([Label.FORMAL.value])
        with self.assertRaises(DataError):
            samples_from_grid(grid)

"""
Inference Module
Statistical validation of the hot-spot phase: two-sample t-tests between formal
and informal cells, and the multinomial logit (MNL) model linking the hot-spot
category to NNeighbors and formality.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp, softmax

from .exceptions import (
    ConfigError,
    DataError,
    DegenerateDataError,
    SeparationError,
    SingularHessianError,
)
from .hotspot import Category, Label


logger = logging.getLogger(__name__)

# Column order of MNL probabilities and confusion matrices; the reference
# category comes first and its utility is fixed at zero.
MNL_CATEGORIES = (Category.NOT_SIGNIFICANT, Category.COLD, Category.HOT)
MNL_TERMS = ('intercept', 'nneighbors', 'formal')

SEPARATION_LIMIT = 30.0


# --- t-tests ---

@dataclass
class TTestResult:
    method: str
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    se_a: float
    se_b: float
    t: float
    df: float
    se_diff: float
    ci_low: float
    ci_high: float
    p_value: float

    @property
    def mean_diff(self):
        return self.mean_a - self.mean_b

    def to_row(self):
        return [self.method, self.n_a, self.n_b, self.mean_a, self.mean_b, self.sd_a, self.sd_b,
                self.se_a, self.se_b, self.t, self.df, self.se_diff, self.ci_low, self.ci_high,
                self.p_value]


TTEST_COLUMNS = ['variable', 'method', 'n_a', 'n_b', 'mean_a', 'mean_b', 'sd_a', 'sd_b',
                 'se_a', 'se_b', 't', 'df', 'se_diff', 'ci_low', 'ci_high', 'p']


def _t_result(method, n_a, n_b, mean_a, mean_b, sd_a, sd_b, se_diff, df, level=0.95):
    diff = mean_a - mean_b
    t = diff / se_diff
    p = float(2.0 * stats.t.sf(abs(t), df))
    half = stats.t.ppf(0.5 + level / 2.0, df) * se_diff
    return TTestResult(
        method=method, n_a=n_a, n_b=n_b, mean_a=mean_a, mean_b=mean_b, sd_a=sd_a, sd_b=sd_b,
        se_a=sd_a / math.sqrt(n_a), se_b=sd_b / math.sqrt(n_b), t=t, df=df, se_diff=se_diff,
        ci_low=diff - half, ci_high=diff + half, p_value=p,
    )


def welch_from_summary(mean_a, sd_a, n_a, mean_b, sd_b, n_b):
    """
    Welch t-test from group means, standard deviations and sizes.
    """
    if n_a < 2 or n_b < 2:
        raise DataError('each group needs at least 2 values')
    if sd_a == 0 and sd_b == 0:
        raise DegenerateDataError('both groups have zero variance')
    va, vb = sd_a ** 2 / n_a, sd_b ** 2 / n_b
    se_diff = math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (n_a - 1) + vb ** 2 / (n_b - 1))
    return _t_result('welch', n_a, n_b, mean_a, mean_b, sd_a, sd_b, se_diff, df)


def student_from_summary(mean_a, sd_a, n_a, mean_b, sd_b, n_b):
    """
    Pooled-variance (equal variances assumed) t-test from summary statistics.
    """
    if n_a < 2 or n_b < 2:
        raise DataError('each group needs at least 2 values')
    if sd_a == 0 and sd_b == 0:
        raise DegenerateDataError('both groups have zero variance')
    df = n_a + n_b - 2
    pooled = ((n_a - 1) * sd_a ** 2 + (n_b - 1) * sd_b ** 2) / df
    se_diff = math.sqrt(pooled * (1.0 / n_a + 1.0 / n_b))
    return _t_result('student', n_a, n_b, mean_a, mean_b, sd_a, sd_b, se_diff, float(df))


def _summary(values):
    values = np.asarray(values, dtype=float).ravel()
    if len(values) < 2:
        raise DataError(f'each group needs at least 2 values, got {len(values)}')
    return float(values.mean()), float(values.std(ddof=1)), len(values)


def welch_t_test(group_a, group_b):
    """
    Welch's unequal-variance two-sample t-test.

    Args:
        group_a: Values of the first group (>= 2)
        group_b: Values of the second group (>= 2)

    Returns:
        TTestResult with Welch-Satterthwaite df and a 95% CI of mean_a - mean_b
    """
    mean_a, sd_a, n_a = _summary(group_a)
    mean_b, sd_b, n_b = _summary(group_b)
    return welch_from_summary(mean_a, sd_a, n_a, mean_b, sd_b, n_b)


def student_t_test(group_a, group_b):
    mean_a, sd_a, n_a = _summary(group_a)
    mean_b, sd_b, n_b = _summary(group_b)
    return student_from_summary(mean_a, sd_a, n_a, mean_b, sd_b, n_b)


def group_t_tests(grid):
    """
    Formal vs informal t-tests of NNeighbors and Gi* z-scores over labeled cells.

    Returns:
        Dict variable -> {'welch': TTestResult, 'student': TTestResult}
    """
    formal = grid.label == Label.FORMAL.value
    informal = grid.label == Label.INFORMAL.value
    results = {}
    for name, values in (('nneighbors', grid.nneighbors), ('gi_z', grid.gi_z)):
        if values is None:
            raise DataError(f'grid has no {name} values')
        values = np.asarray(values, dtype=float)
        results[name] = {
            'welch': welch_t_test(values[formal], values[informal]),
            'student': student_t_test(values[formal], values[informal]),
        }
    return results


def write_ttest_csv(results, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(TTEST_COLUMNS)
    for variable, tests in results.items():
        for method in ('student', 'welch'):
            writer.writerow([variable] + [
                repr(float(v)) if isinstance(v, float) else v for v in tests[method].to_row()
            ])


# --- Multinomial logit ---

@dataclass
class MnlSample:
    category: Category
    nneighbors: int
    formal: int


@dataclass
class MnlModel:
    """
    Coefficients for the non-reference categories (Cold, Hot) over
    (intercept, nneighbors, formal); NotSignificant is the reference.
    """
    beta: np.ndarray
    log_likelihood: float = float('nan')
    null_log_likelihood: float = float('nan')
    iterations_used: int = 0
    converged: bool = True
    standard_errors: np.ndarray = field(default=None)
    n_samples: int = 0
    log_likelihood_path: list = field(default_factory=list, repr=False)

    @property
    def coefficients(self):
        return {cat: self.beta[j] for j, cat in enumerate(MNL_CATEGORIES[1:])}

    @property
    def odds_ratios(self):
        return np.exp(self.beta)

    def wald_table(self, level=0.95):
        """
        Rows (category, term, b, se, wald, p, exp_b, exp_b_low, exp_b_high).
        """
        if self.standard_errors is None:
            raise DataError('model has no standard errors')
        crit = stats.norm.ppf(0.5 + level / 2.0)
        rows = []
        for j, cat in enumerate(MNL_CATEGORIES[1:]):
            for k, term in enumerate(MNL_TERMS):
                b = float(self.beta[j, k])
                se = float(self.standard_errors[j, k])
                wald = (b / se) ** 2 if se > 0 else float('inf')
                p = float(stats.chi2.sf(wald, 1))
                rows.append((cat.name.lower(), term, b, se, wald, p, math.exp(b),
                             math.exp(b - crit * se), math.exp(b + crit * se)))
        return rows


@dataclass
class MnlDiagnostics:
    pseudo_r2: float
    lr_chi2: float
    lr_df: int
    lr_p: float
    confusion: np.ndarray
    log_likelihood: float
    null_log_likelihood: float

    @property
    def accuracy(self):
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else float('nan')


def _design(samples):
    if not samples:
        raise DataError('no MNL samples')
    X = np.array([[1.0, float(s.nneighbors), float(s.formal)] for s in samples])
    lookup = {cat: j for j, cat in enumerate(MNL_CATEGORIES)}
    y = np.array([lookup[Category(s.category)] for s in samples])
    return X, y


def samples_from_grid(grid):
    """
    MNL samples of all labeled cells that carry a category and NNeighbors.
    """
    if grid.category is None or grid.nneighbors is None:
        raise DataError('grid has no hot-spot categories or NNeighbors')
    samples = []
    for i in np.nonzero(grid.labeled_mask)[0]:
        samples.append(MnlSample(
            category=Category(grid.category[i]),
            nneighbors=int(grid.nneighbors[i]),
            formal=1 if grid.label[i] == Label.FORMAL.value else 0,
        ))
    return samples


def _utilities(beta, X):
    return np.column_stack([np.zeros(len(X)), X @ beta.T])


def mnl_log_likelihood(beta, X, y, hessian=True):
    """
    Log-likelihood, score and Hessian of the multinomial logit.

    Args:
        beta: (2, k) coefficients of the non-reference categories
        X: (n, k) design matrix
        y: (n,) category indices into MNL_CATEGORIES

    Returns:
        (log L, gradient of shape (2k,), Hessian of shape (2k, 2k) or None)
    """
    V = _utilities(beta, X)
    lse = logsumexp(V, axis=1)
    ll = float((V[np.arange(len(y)), y] - lse).sum())
    P = np.exp(V - lse[:, None])[:, 1:]
    Y = np.zeros_like(P)
    nonref = y > 0
    Y[np.nonzero(nonref)[0], y[nonref] - 1] = 1.0
    grad = ((Y - P).T @ X).ravel()
    if not hessian:
        return ll, grad, None
    J, k = P.shape[1], X.shape[1]
    H = np.zeros((J * k, J * k))
    for j in range(J):
        for m in range(J):
            weight = P[:, j] * ((1.0 if j == m else 0.0) - P[:, m])
            H[j * k:(j + 1) * k, m * k:(m + 1) * k] = -(X * weight[:, None]).T @ X
    return ll, grad, H


def _null_log_likelihood(y):
    counts = np.bincount(y, minlength=len(MNL_CATEGORIES)).astype(float)
    counts = counts[counts > 0]
    return float((counts * np.log(counts / counts.sum())).sum())


def fit_mnl(samples, max_iter=100, tol=1e-8):
    """
    Fit the multinomial logit by Newton-Raphson with step halving.

    Args:
        samples: List of MnlSample (every category present)
        max_iter: Iteration cap
        tol: Convergence tolerance on the score max-norm (and on the relative
            change of the score norm)

    Returns:
        MnlModel with coefficients, log-likelihoods and Wald standard errors
    """
    if max_iter < 1:
        raise ConfigError('max_iter must be >= 1')
    X, y = _design(samples)
    counts = np.bincount(y, minlength=len(MNL_CATEGORIES))
    if np.any(counts == 0):
        missing = [MNL_CATEGORIES[j].name for j in np.nonzero(counts == 0)[0]]
        raise DataError(f'MNL needs samples in every category; missing {missing}')

    J, k = len(MNL_CATEGORIES) - 1, X.shape[1]
    beta = np.zeros((J, k))
    ll, grad, H = mnl_log_likelihood(beta, X, y)
    path = [ll]
    grad_norm = np.linalg.norm(grad)
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        neg_h = -H
        if not np.all(np.isfinite(neg_h)) or np.linalg.cond(neg_h) > 1e13:
            raise SingularHessianError(
                'MNL Hessian is singular; check the predictors for collinearity '
                '(a constant predictor duplicates the intercept)'
            )
        step = np.linalg.solve(neg_h, grad).reshape(J, k)

        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            new_ll, new_grad, new_H = mnl_log_likelihood(candidate, X, y)
            if new_ll >= ll:
                break
            scale *= 0.5
        else:
            # no ascent possible along the Newton direction: numerically at the optimum
            converged = True
            break

        beta, ll, grad, H = candidate, new_ll, new_grad, new_H
        path.append(ll)
        new_norm = np.linalg.norm(grad)
        logger.debug('MNL iteration %d: logL=%.6f |score|max=%.3e step=%g',
                     iterations, ll, np.abs(grad).max(), scale)

        if np.abs(beta).max() > SEPARATION_LIMIT and np.abs(grad).max() > tol:
            raise SeparationError(
                f'coefficient magnitude {np.abs(beta).max():.1f} with non-vanishing score; '
                'the categories are (quasi-)perfectly separated by the predictors'
            )
        if np.abs(grad).max() < tol or abs(new_norm - grad_norm) <= tol * max(grad_norm, 1e-300):
            converged = True
            break
        grad_norm = new_norm

    if not converged:
        logger.warning('MNL did not converge in %d iterations', max_iter)

    try:
        cov = np.linalg.inv(-H)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None)).reshape(J, k)
    except np.linalg.LinAlgError:
        raise SingularHessianError('MNL Hessian is singular at the optimum')

    model = MnlModel(
        beta=beta,
        log_likelihood=ll,
        null_log_likelihood=_null_log_likelihood(y),
        iterations_used=iterations,
        converged=converged,
        standard_errors=se,
        n_samples=len(y),
        log_likelihood_path=path,
    )
    logger.info('MNL fitted on %d samples in %d iterations (logL %.3f, null %.3f)',
                len(y), iterations, model.log_likelihood, model.null_log_likelihood)
    return model


def predict_proba(model, nneighbors, formal):
    """
    Vectorized MNL probabilities, columns in MNL_CATEGORIES order.
    """
    nneighbors = np.atleast_1d(np.asarray(nneighbors, dtype=float))
    formal = np.broadcast_to(np.asarray(formal, dtype=float), nneighbors.shape)
    X = np.column_stack([np.ones_like(nneighbors), nneighbors, formal])
    return softmax(_utilities(model.beta, X), axis=1)


def mnl_predict(model, nneighbors, formal):
    """
    Category probabilities of one observation.

    Returns:
        Dict Category -> probability (sums to 1)
    """
    probs = predict_proba(model, nneighbors, formal)[0]
    return {cat: float(p) for cat, p in zip(MNL_CATEGORIES, probs)}


def mnl_diagnostics(model, samples):
    """
    McFadden pseudo R-square, likelihood-ratio chi-square and the confusion
    matrix (rows observed, columns predicted, MNL_CATEGORIES order).
    """
    X, y = _design(samples)
    ll, _, _ = mnl_log_likelihood(model.beta, X, y, hessian=False)
    ll0 = _null_log_likelihood(y)
    pseudo_r2 = max(0.0, 1.0 - ll / ll0) if ll0 < 0 else 0.0
    lr = max(0.0, 2.0 * (ll - ll0))
    df = (len(MNL_CATEGORIES) - 1) * (len(MNL_TERMS) - 1)
    predicted = softmax(_utilities(model.beta, X), axis=1).argmax(axis=1)
    confusion = np.zeros((len(MNL_CATEGORIES), len(MNL_CATEGORIES)), dtype=np.int64)
    np.add.at(confusion, (y, predicted), 1)
    return MnlDiagnostics(
        pseudo_r2=pseudo_r2,
        lr_chi2=lr,
        lr_df=df,
        lr_p=float(stats.chi2.sf(lr, df)),
        confusion=confusion,
        log_likelihood=ll,
        null_log_likelihood=ll0,
    )


COEFFICIENT_COLUMNS = ['category', 'term', 'b', 'se', 'wald', 'p', 'exp_b', 'exp_b_low', 'exp_b_high']


def write_coefficients_csv(model, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(COEFFICIENT_COLUMNS)
    for row in model.wald_table():
        writer.writerow(list(row[:2]) + [repr(float(v)) for v in row[2:]])


def format_mnl_report(model, diagnostics):
    """
    Plain-text parameter table with model fit statistics.
    """
    lines = [
        'MNL parameter estimates (reference category: not significant)',
        f'{"category":<10} {"term":<11} {"B":>10} {"S.E.":>9} {"Wald":>12} {"p":>8} {"Exp(B)":>9}',
    ]
    for cat, term, b, se, wald, p, exp_b, _, _ in model.wald_table():
        lines.append(f'{cat:<10} {term:<11} {b:>10.3f} {se:>9.3f} {wald:>12.3f} {p:>8.3f} {exp_b:>9.3f}')
    lines += [
        '',
        f'samples: {model.n_samples}  iterations: {model.iterations_used}  converged: {model.converged}',
        f'log-likelihood: {diagnostics.log_likelihood:.3f}  null: {diagnostics.null_log_likelihood:.3f}',
        f'McFadden pseudo R2: {diagnostics.pseudo_r2:.4f}',
        f'LR chi-square: {diagnostics.lr_chi2:.1f} (df {diagnostics.lr_df}, p {diagnostics.lr_p:.3g})',
        '',
        'confusion (rows observed, columns predicted): ' + ', '.join(c.name.lower() for c in MNL_CATEGORIES),
    ]
    for cat, row in zip(MNL_CATEGORIES, diagnostics.confusion):
        lines.append(f'{cat.name.lower():<16}' + ''.join(f'{int(v):>10}' for v in row))
    lines.append(f'overall accuracy: {diagnostics.accuracy:.4f}')
    return '\n'.join(lines) + '\n'

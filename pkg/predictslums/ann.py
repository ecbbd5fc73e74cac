"""
ANN Module
Phase-II binary classifier of formal (0) / informal (1) cells.

Inputs are the one-hot hot-spot category, NNeighbors and the centroid
coordinates, standardized with training-set statistics. The network is a
feed-forward 6 -> 100 -> 30 -> 1 perceptron (ReLU, ReLU, sigmoid) trained with
Adam on mini-batches under binary cross-entropy, with optional inverted
dropout after each hidden layer.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, DataError, DegenerateDataError
from .hotspot import Category, Label


logger = logging.getLogger(__name__)

FEATURE_NAMES = ('hot', 'notsig', 'cold', 'nneighbors', 'x', 'y')
ONE_HOT = (Category.HOT, Category.NOT_SIGNIFICANT, Category.COLD)
N_ONE_HOT = len(ONE_HOT)

INFORMAL = 1
FORMAL = 0
DECISION_THRESHOLD = 0.5
LOSS_EPS = 1e-12


# --- Features ---

def feature_names(use_coords=True):
    return FEATURE_NAMES if use_coords else FEATURE_NAMES[:4]


def encode_features(cell, use_coords=True):
    """
    Raw feature tuple of a grid cell: one-hot(category) + (nneighbors, cx, cy).

    Args:
        cell: GridCell with category, nneighbors and centroid
        use_coords: Drop the coordinates when False

    Returns:
        Tuple of 6 (or 4) floats
    """
    if cell.category is None:
        raise DataError(f'cell ({cell.col}, {cell.row}) has no hot-spot category')
    if cell.nneighbors is None:
        raise DataError(f'cell ({cell.col}, {cell.row}) has no NNeighbors')
    one_hot = tuple(1.0 if Category(cell.category) is c else 0.0 for c in ONE_HOT)
    values = one_hot + (float(cell.nneighbors),)
    if use_coords:
        values += (float(cell.cx), float(cell.cy))
    return values


def encode_grid(grid, use_coords=True):
    """
    Raw feature matrix of every cell of a grid (vectorized encode_features).
    """
    if grid.category is None or grid.nneighbors is None or np.any(grid.category == ''):
        raise DataError('grid is missing hot-spot categories or NNeighbors')
    columns = [(grid.category == c.value).astype(float) for c in ONE_HOT]
    columns.append(grid.nneighbors.astype(float))
    if use_coords:
        columns += [grid.cx.astype(float), grid.cy.astype(float)]
    return np.column_stack(columns)


def grid_targets(grid):
    """
    0/1 targets (informal = 1) and the mask of labeled cells.
    """
    mask = grid.labeled_mask
    y = (grid.label == Label.INFORMAL.value).astype(np.int64)
    return y, mask


def dataset_from_grids(grids, use_coords=True):
    """
    Stack the labeled cells of one or more city grids into (X, y).
    """
    X_parts, y_parts = [], []
    for grid in grids:
        X = encode_grid(grid, use_coords)
        y, mask = grid_targets(grid)
        X_parts.append(X[mask])
        y_parts.append(y[mask])
    X = np.concatenate(X_parts) if X_parts else np.empty((0, len(feature_names(use_coords))))
    y = np.concatenate(y_parts) if y_parts else np.empty(0, dtype=np.int64)
    if len(y) == 0:
        raise DataError('no labeled cells to train on')
    return X, y


# --- Standardization ---

class Standardizer:
    """
    Per-feature z-scoring with training-set mean and (population) standard
    deviation. All columns are standardized, one-hot included; a constant
    one-hot column is only centred.
    """

    def __init__(self, mean=None, sd=None, names=FEATURE_NAMES):
        self.mean = None if mean is None else np.asarray(mean, dtype=float)
        self.sd = None if sd is None else np.asarray(sd, dtype=float)
        self.names = tuple(names)

    def fit(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(X) < 2:
            raise DataError('standardization needs at least 2 training rows')
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        for j in range(X.shape[1]):
            if sd[j] == 0:
                name = self.names[j] if j < len(self.names) else str(j)
                if j < N_ONE_HOT:
                    sd[j] = 1.0
                else:
                    raise DegenerateDataError(f'feature {name!r} is constant on the training rows')
        self.mean, self.sd = mean, sd
        return self

    def transform(self, X):
        if self.mean is None:
            raise DataError('standardizer is not fitted')
        return (np.asarray(X, dtype=float) - self.mean) / self.sd

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float) * self.sd + self.mean


def fit_standardizer(rows, names=FEATURE_NAMES):
    return Standardizer(names=names).fit(rows)


# --- Network ---

def relu(z):
    return np.maximum(0.0, z)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def cross_entropy(target, output):
    """
    Binary cross-entropy with the output clamped to [eps, 1 - eps].
    """
    y = np.clip(output, LOSS_EPS, 1.0 - LOSS_EPS)
    return -(target * np.log(y) + (1.0 - target) * np.log(1.0 - y))


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 10
    epochs: int = 600
    train_fraction: float = 0.7
    hidden: tuple = (100, 30)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f'train_fraction must lie in (0, 1), got {self.train_fraction}')
        for name in ('batch_size', 'epochs'):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f'{name} must be a positive integer')
        if self.learning_rate <= 0:
            raise ConfigError('learning_rate must be positive')
        self.hidden = tuple(int(h) for h in self.hidden)

    def to_dict(self):
        return {
            'learning_rate': self.learning_rate, 'beta1': self.beta1, 'beta2': self.beta2,
            'epsilon': self.epsilon, 'batch_size': self.batch_size, 'epochs': self.epochs,
            'train_fraction': self.train_fraction, 'hidden': list(self.hidden), 'seed': self.seed,
        }


class AnnModel:
    """
    Fully connected network with ReLU hidden layers and a sigmoid output.

    weights[l] has shape (out, in); biases[l] has shape (out,).
    """

    activations = ('relu', 'relu', 'sigmoid')

    def __init__(self, layer_sizes=(6, 100, 30, 1), dropout_rate=0.0, seed=0,
                 standardizer=None, use_coords=True, weights=None, biases=None):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or self.layer_sizes[-1] != 1:
            raise ConfigError(f'invalid layer sizes {self.layer_sizes}')
        if not 0 <= dropout_rate < 1:
            raise ConfigError(f'dropout rate must lie in [0, 1), got {dropout_rate}')
        self.dropout_rate = float(dropout_rate)
        self.seed = int(seed)
        self.use_coords = bool(use_coords)
        self.standardizer = standardizer
        if weights is None:
            weights, biases = self._init_params()
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self._check_shapes()

    def _init_params(self):
        # He-uniform, scaled by fan-in
        rng = np.random.default_rng([self.seed, 0x5EED])
        weights, biases = [], []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return weights, biases

    def _check_shapes(self):
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ConfigError('weights do not match the layer sizes')
        for l, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            if self.weights[l].shape != (fan_out, fan_in) or self.biases[l].shape != (fan_out,):
                raise ConfigError(f'layer {l} has shape {self.weights[l].shape}, '
                                  f'expected {(fan_out, fan_in)}')

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def parameters(self):
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, Z, masks=None):
        """
        Output probabilities for standardized inputs Z of shape (n, n_inputs).

        Args:
            Z: Standardized inputs
            masks: Optional dropout masks per hidden layer (training only)

        Returns:
            (n,) probabilities and the per-layer cache used by backward()
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.n_inputs:
            raise ConfigError(f'expected {self.n_inputs} inputs, got {Z.shape[1]}')
        a = Z
        cache = [(None, a)]
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T + b
            if l == last:
                a = sigmoid(z)
            else:
                a = relu(z)
                if masks is not None:
                    a = a * masks[l]
            cache.append((z, a))
        return a[:, 0], cache

    def backward(self, cache, targets, masks=None):
        """
        Gradients of the mean cross-entropy w.r.t. every weight and bias.

        Returns:
            List of (dW, db) per layer
        """
        n = len(targets)
        output = cache[-1][1][:, 0]
        delta = ((output - targets) / n)[:, None]
        grads = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[l][1]
            grads[l] = (delta.T @ a_prev, delta.sum(axis=0))
            if l > 0:
                delta = delta @ self.weights[l]
                if masks is not None:
                    delta = delta * masks[l - 1]
                delta = delta * (cache[l][0] > 0)
        return grads

    def loss_and_gradients(self, Z, targets, masks=None):
        output, cache = self.forward(Z, masks)
        loss = float(cross_entropy(targets, output).mean())
        return loss, self.backward(cache, np.asarray(targets, dtype=float), masks)

    def dropout_masks(self, rng, batch):
        if self.dropout_rate == 0:
            return None
        keep = 1.0 - self.dropout_rate
        return [
            (rng.random((batch, size)) < keep) / keep
            for size in self.layer_sizes[1:-1]
        ]

    def predict_proba(self, X):
        """
        Probabilities of informality for raw (unstandardized) features.
        Dropout is never applied here.
        """
        Z = self.standardizer.transform(X) if self.standardizer is not None else X
        return np.clip(self.forward(Z)[0], LOSS_EPS, 1.0 - LOSS_EPS)

    def predict(self, X):
        return (self.predict_proba(X) >= DECISION_THRESHOLD).astype(np.int64)


def forward(model, x):
    """
    Probability of one standardized feature vector.
    """
    return float(model.forward(np.asarray(x, dtype=float).reshape(1, -1))[0][0])


class Adam:
    """
    Adaptive moment estimation over a list of parameter arrays (updated in place).
    """

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g ** 2
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


# --- Training and evaluation ---

@dataclass
class EvalReport:
    confusion: np.ndarray
    overall_accuracy: float
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    kfold_mean: float = None
    kfold_variance: float = None

    @property
    def total(self):
        return int(self.confusion.sum())

    def to_dict(self):
        return {
            'confusion': self.confusion.tolist(),
            'confusion_layout': 'rows predicted, columns actual; index 0 formal, 1 informal',
            'overall_accuracy': self.overall_accuracy,
            'total': self.total,
            'kfold_mean': self.kfold_mean,
            'kfold_variance': self.kfold_variance,
        }

    def write_history_csv(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['epoch', 'train_loss', 'train_acc', 'val_loss', 'val_acc'])
        for epoch, row in enumerate(zip(self.train_loss, self.train_acc, self.val_loss, self.val_acc), 1):
            writer.writerow([epoch] + [repr(float(v)) for v in row])


def confusion_matrix(predicted, actual):
    """
    2x2 counts, rows predicted, columns actual (0 formal, 1 informal).
    """
    matrix = np.zeros((2, 2), dtype=np.int64)
    np.add.at(matrix, (np.asarray(predicted, dtype=np.int64), np.asarray(actual, dtype=np.int64)), 1)
    return matrix


def confusion_accuracy(matrix):
    matrix = np.asarray(matrix)
    total = matrix.sum()
    return float(np.trace(matrix) / total) if total else float('nan')


def _scores(model, Z, y):
    if len(y) == 0:
        return float('nan'), float('nan')
    output = model.forward(Z)[0]
    loss = float(cross_entropy(y, output).mean())
    acc = float(((output >= DECISION_THRESHOLD).astype(np.int64) == y).mean())
    return loss, acc


def fit(X_train, y_train, cfg, dropout=0.0, use_coords=True, X_val=None, y_val=None):
    """
    Train a network on the given rows (no splitting).

    Returns:
        (AnnModel, EvalReport with per-epoch histories on train and validation rows)
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(np.unique(y_train)) < 2:
        raise DegenerateDataError('training rows contain a single class')

    names = feature_names(use_coords)
    standardizer = Standardizer(names=names).fit(X_train)
    model = AnnModel(
        layer_sizes=(X_train.shape[1],) + tuple(cfg.hidden) + (1,),
        dropout_rate=dropout,
        seed=cfg.seed,
        standardizer=standardizer,
        use_coords=use_coords,
    )
    Z_train = standardizer.transform(X_train)
    has_val = X_val is not None and len(X_val) > 0
    Z_val = standardizer.transform(X_val) if has_val else np.empty((0, X_train.shape[1]))
    y_val = np.asarray(y_val, dtype=np.int64) if has_val else np.empty(0, dtype=np.int64)

    optimizer = Adam(model.parameters, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    dropout_rng = np.random.default_rng([cfg.seed, 2])
    report = EvalReport(confusion=np.zeros((2, 2), dtype=np.int64), overall_accuracy=float('nan'))

    n = len(y_train)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            masks = model.dropout_masks(dropout_rng, len(batch))
            _, grads = model.loss_and_gradients(Z_train[batch], y_train[batch], masks)
            optimizer.step([g for pair in grads for g in pair])

        train_loss, train_acc = _scores(model, Z_train, y_train)
        val_loss, val_acc = _scores(model, Z_val, y_val)
        report.train_loss.append(train_loss)
        report.train_acc.append(train_acc)
        report.val_loss.append(val_loss)
        report.val_acc.append(val_acc)
        if epoch == 1 or epoch % 50 == 0 or epoch == cfg.epochs:
            logger.debug('epoch %d: loss %.4f acc %.4f | val loss %.4f acc %.4f',
                         epoch, train_loss, train_acc, val_loss, val_acc)

    if has_val:
        predicted = model.predict(X_val)
        report.confusion = confusion_matrix(predicted, y_val)
        report.overall_accuracy = confusion_accuracy(report.confusion)
    return model, report


def split_indices(n, train_fraction, seed):
    """
    Seeded random train/validation split of n rows.
    """
    order = np.random.default_rng([seed, 0]).permutation(n)
    n_train = int(round(train_fraction * n))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def train(X, y, cfg, dropout=0.0, use_coords=True):
    """
    Train with a seeded train/validation split (cfg.train_fraction).

    Args:
        X: Raw feature rows
        y: 0/1 targets (1 = informal)
        cfg: TrainConfig
        dropout: Dropout rate after each hidden layer (0 disables)
        use_coords: Whether X carries the coordinate columns

    Returns:
        (AnnModel, EvalReport); the report's confusion matrix and accuracy are
        on the validation split, histories cover every epoch
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) != len(X):
        raise DataError('features and targets differ in length')
    train_idx, val_idx = split_indices(len(y), cfg.train_fraction, cfg.seed)
    if len(np.unique(y[train_idx])) < 2:
        raise DegenerateDataError('the training split contains a single class')
    logger.info('training on %d rows, validating on %d (%d epochs, dropout %g)',
                len(train_idx), len(val_idx), cfg.epochs, dropout)
    model, report = fit(X[train_idx], y[train_idx], cfg, dropout, use_coords,
                        X[val_idx], y[val_idx])
    logger.info('validation accuracy %.4f', report.overall_accuracy)
    return model, report


def evaluate(model, X, y):
    """
    Confusion matrix and overall accuracy of a trained model; informal is
    predicted iff the output probability is >= 0.5.
    """
    predicted = model.predict(np.asarray(X, dtype=float))
    matrix = confusion_matrix(predicted, np.asarray(y, dtype=np.int64))
    return EvalReport(confusion=matrix, overall_accuracy=confusion_accuracy(matrix))


@dataclass
class KFoldResult:
    mean: float
    variance: float
    accuracies: list
    cv_error: float

    def to_dict(self):
        return {'mean': self.mean, 'variance': self.variance,
                'accuracies': list(self.accuracies), 'cv_error': self.cv_error}


def stratified_folds(y, K, seed):
    """
    Seeded near-equal fold assignment that deals each class round-robin.
    """
    rng = np.random.default_rng([seed, 3])
    folds = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        members = rng.permutation(np.nonzero(y == cls)[0])
        folds[members] = (np.arange(len(members)) + offset) % K
        offset += len(members)
    return folds


def fold_seed(seed, fold):
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def kfold_cv(X, y, K=10, cfg=None, dropout=0.0, use_coords=True, trainer=None):
    """
    K-fold cross-validation: each fold is held out once while a model is
    trained on the remaining K - 1 folds.

    Args:
        X, y: Raw features and 0/1 targets
        K: Number of folds (2 <= K <= n)
        cfg: TrainConfig (each fold trains with a seed derived from cfg.seed)
        trainer: Optional callable (X_train, y_train, seed) -> object with
            predict_proba(X); defaults to training the network

    Returns:
        KFoldResult with mean and population variance of the fold accuracies
        and the squared-error cross-validation estimate
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if K < 2:
        raise ConfigError(f'K must be >= 2, got {K}')
    if K > n:
        raise ConfigError(f'K={K} exceeds the number of rows ({n})')

    if trainer is None:
        def trainer(X_train, y_train, seed):
            return fit(X_train, y_train, replace(cfg, seed=seed), dropout, use_coords)[0]

    folds = stratified_folds(y, K, cfg.seed)
    accuracies = []
    squared_error = 0.0
    for k in range(K):
        held = folds == k
        if not held.any():
            raise ConfigError(f'fold {k} is empty')
        model = trainer(X[~held], y[~held], fold_seed(cfg.seed, k))
        probs = np.asarray(model.predict_proba(X[held]), dtype=float)
        predicted = (probs >= DECISION_THRESHOLD).astype(np.int64)
        accuracies.append(float((predicted == y[held]).mean()))
        squared_error += float(((y[held] - probs) ** 2).sum())
        logger.info('fold %d/%d accuracy %.4f', k + 1, K, accuracies[-1])

    accuracies_arr = np.array(accuracies)
    return KFoldResult(
        mean=float(accuracies_arr.mean()),
        variance=float(accuracies_arr.var()),
        accuracies=accuracies,
        cv_error=squared_error / n,
    )


def predict_grid(model, grid):
    """
    Probability and prediction for every cell of a grid, labeled or not.
    """
    X = encode_grid(grid, model.use_coords)
    if X.shape[1] != model.n_inputs:
        raise DataError(f'model expects {model.n_inputs} features, grid encodes {X.shape[1]}')
    out = grid.copy()
    out.prob = model.predict_proba(X)
    out.pred = (out.prob >= DECISION_THRESHOLD).astype(np.int64)
    logger.info('predicted %d cells: %d informal', grid.n_cells, int(out.pred.sum()))
    return out

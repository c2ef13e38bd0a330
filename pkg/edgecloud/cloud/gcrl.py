# Copyright (C) 2021, edgecloud contributors
#
# This file is part of edgecloud
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import logging
from dataclasses import dataclass, field
import numpy as np
from edgecloud.cloud import numerics as nx
from edgecloud.cloud.exceptions import ShapeException, TrainingDivergedException
from edgecloud.config import GcrlConfig, derive_seed

log = logging.getLogger(__name__)

STD_FLOOR = 1e-12


@dataclass
class GcrlParams:
    config: GcrlConfig
    propagation: np.ndarray
    weights: dict
    feature_mean: np.ndarray
    feature_std: np.ndarray
    seed: int = 0
    history: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return self.propagation.shape[0]

    def with_weights(self, weights):
        return GcrlParams(self.config, self.propagation, weights, self.feature_mean, self.feature_std, self.seed,
                          list(self.history))


def propagation_matrix(adjacency):
    """Symmetric normalisation of the adjacency with self-loops."""
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ShapeException(f"adjacency must be square, got {adjacency.shape}")
    if not np.array_equal(adjacency, adjacency.T) or not np.isin(adjacency, (0, 1)).all() \
            or np.any(np.diag(adjacency) != 0):
        raise ShapeException("adjacency must be symmetric, binary and without self-loops")

    with_loops = adjacency + np.eye(len(adjacency))
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return with_loops * np.outer(inv_sqrt, inv_sqrt)


def parameter_shapes(config):
    shapes = {}
    h = config.hidden
    for layer in range(config.layers):
        shapes[f"gcn{layer}.W"] = (config.window if layer == 0 else h, h)
        if config.use_lstm:
            shapes[f"lstm{layer}.Wx"] = (1, 4 * h)
            shapes[f"lstm{layer}.Wh"] = (h, 4 * h)
            shapes[f"lstm{layer}.b"] = (1, 4 * h)
            shapes[f"lstm{layer}.Wout"] = (h, 1)
            shapes[f"lstm{layer}.bout"] = (1, 1)
    shapes["readout.W"] = (h, config.n_classes)
    shapes["readout.b"] = (1, config.n_classes)
    return shapes


def init_params(config, adjacency, seed=0, feature_mean=None, feature_std=None):
    propagation = propagation_matrix(adjacency)
    n_nodes = len(propagation)
    rng = np.random.default_rng(derive_seed(seed, "gcrl-init"))
    weights = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".b") or name.endswith(".bout"):
            weights[name] = np.zeros(shape)
        else:
            weights[name] = nx.glorot_uniform(rng, *shape)

    mean = np.zeros(n_nodes) if feature_mean is None else np.asarray(feature_mean, dtype=np.float64)
    std = np.ones(n_nodes) if feature_std is None else np.asarray(feature_std, dtype=np.float64)
    return GcrlParams(config, propagation, weights, mean, std, seed)


def _lstm(ctx, x, prefix, hidden):
    """
    Runs over the columns of `x` as a sequence of scalars per row, hidden
    width `hidden`, and projects every hidden state back to one scalar so
    the output has the shape of the input.
    """
    wx, wh, b = ctx.params[f"{prefix}.Wx"], ctx.params[f"{prefix}.Wh"], ctx.params[f"{prefix}.b"]
    w_out, b_out = ctx.params[f"{prefix}.Wout"], ctx.params[f"{prefix}.bout"]
    h = ctx.constant(np.zeros((x.shape[0], hidden)))
    c = ctx.constant(np.zeros((x.shape[0], hidden)))

    outputs = []
    for k in range(x.shape[1]):
        z = nx.add(nx.add(nx.matmul(nx.slice_cols(x, k, k + 1), wx), nx.matmul(h, wh)), b)
        i = nx.sigmoid(nx.slice_cols(z, 0, hidden))
        f = nx.sigmoid(nx.slice_cols(z, hidden, 2 * hidden))
        g = nx.tanh(nx.slice_cols(z, 2 * hidden, 3 * hidden))
        o = nx.sigmoid(nx.slice_cols(z, 3 * hidden, 4 * hidden))
        c = nx.add(nx.hadamard(f, c), nx.hadamard(i, g))
        h = nx.hadamard(o, nx.tanh(c))
        outputs.append(nx.add(nx.matmul(h, w_out), b_out))

    return nx.concat_cols(outputs)


def build_forward(ctx, x, params, trace=None):
    """Record the model on `ctx` for stacked node features (samples * nodes, window)."""
    config = params.config
    n_nodes = params.n_nodes
    for name, value in params.weights.items():
        ctx.param(name, value)

    out = x
    for layer in range(config.layers):
        y_g = nx.relu(nx.propagate(params.propagation, nx.matmul(out, ctx.params[f"gcn{layer}.W"]), n_nodes))
        if config.use_lstm:
            y_l = _lstm(ctx, y_g, f"lstm{layer}", config.hidden)
            out = nx.add(y_g, y_l)
        else:
            y_l = None
            out = y_g
        if trace is not None:
            trace.append({"y_g": y_g.value, "y_l": None if y_l is None else y_l.value, "y_lg": out.value})

    pooled = nx.mean_pool_rows(out, n_nodes)
    return nx.add(nx.matmul(pooled, ctx.params["readout.W"]), ctx.params["readout.b"])


def _stack(features, params):
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 2
    if single:
        features = features[None]

    expected = (params.n_nodes, params.config.window)
    if features.ndim != 3 or features.shape[1:] != expected:
        raise ShapeException(f"features of shape {features.shape[-2:]} do not match (nodes, window) {expected}")

    return features.reshape(-1, features.shape[2]), features.shape[0], single


def gcrl_forward(features, params, trace=None):
    """Logits for one (nodes, window) feature matrix or a (samples, nodes, window) batch."""
    stacked, _, single = _stack(features, params)
    ctx = nx.GradientContext()
    logits = build_forward(ctx, ctx.constant(stacked), params, trace).value
    return logits[0] if single else logits


def standardize(features, params):
    features = np.asarray(features, dtype=np.float64)
    return (features - params.feature_mean[:, None]) / params.feature_std[:, None]


def loss_and_gradients(params, features, classes):
    stacked, _, _ = _stack(features, params)
    ctx = nx.GradientContext()
    logits = build_forward(ctx, ctx.constant(stacked), params)
    loss = nx.softmax_cross_entropy(logits, classes)
    ctx.backward(loss)
    return float(loss.value[0, 0]), ctx.gradients()


def loss(params, features, classes):
    """Mean cross-entropy of raw (unstandardised) windows."""
    return _standardized_loss(params, standardize(features, params), np.asarray(classes))


def feature_statistics(features):
    features = np.asarray(features, dtype=np.float64)
    mean = features.mean(axis=(0, 2))
    std = features.std(axis=(0, 2))
    return mean, np.where(std > STD_FLOOR, std, 1.0)


def train(features, classes, config, adjacency, seed=0, initial=None):
    features = np.asarray(features, dtype=np.float64)
    classes = np.asarray(classes, dtype=np.int64)
    if len(features) == 0:
        raise ShapeException("training set is empty")
    if len(classes) != len(features):
        raise ShapeException(f"{len(classes)} classes for {len(features)} training windows")
    if classes.min() < 0 or classes.max() >= config.n_classes:
        raise ShapeException(f"classes must lie in [0, {config.n_classes}), got [{classes.min()}, {classes.max()}]")

    if initial is None:
        mean, std = feature_statistics(features)
        params = init_params(config, adjacency, seed, mean, std)
    else:
        params = initial
    x = standardize(features, params)

    order = np.random.default_rng(derive_seed(seed, "gcrl-split")).permutation(len(x))
    n_val = int(round(len(x) * config.validation_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise ShapeException("validation split leaves no training windows")
    batch = config.batch_size or len(train_idx)
    batch_rng = np.random.default_rng(derive_seed(seed, "gcrl-batches"))
    state = nx.AdamState(learning_rate=config.learning_rate)

    weights = dict(params.weights)
    best = (np.inf, 0, weights)
    history = []
    log.info(f"training GCRL: {len(train_idx)} train / {len(val_idx)} validation windows, "
             f"{config.layers} layers, hidden {config.hidden}, {config.n_classes} classes")

    for epoch in range(1, config.max_epochs + 1):
        shuffled = batch_rng.permutation(train_idx)
        epoch_loss = 0.0
        grad_norm = 0.0
        for lo in range(0, len(shuffled), batch):
            idx = shuffled[lo:lo + batch]
            batch_loss, grads = loss_and_gradients(params.with_weights(weights), x[idx], classes[idx])
            grad_norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
            if not np.isfinite(batch_loss) or not np.isfinite(grad_norm):
                raise TrainingDivergedException(
                    f"training diverged in epoch {epoch}: loss={batch_loss}, gradient norm={grad_norm}",
                    {"epoch": epoch, "loss": batch_loss, "grad_norm": grad_norm, "step": state.step})
            weights = nx.adam_step(weights, grads, state)
            epoch_loss += batch_loss * len(idx)

        train_loss = epoch_loss / len(shuffled)
        candidate = params.with_weights(weights)
        val_loss = _standardized_loss(candidate, x[val_idx], classes[val_idx]) if n_val else train_loss
        if not np.isfinite(val_loss):
            raise TrainingDivergedException(f"validation loss is {val_loss} in epoch {epoch}",
                                            {"epoch": epoch, "loss": train_loss, "grad_norm": grad_norm})

        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.debug(f"epoch {epoch}: train loss {train_loss:.6f}, validation loss {val_loss:.6f}")
        if val_loss < best[0]:
            best = (val_loss, epoch, weights)
        elif epoch - best[1] >= config.patience:
            log.info(f"early stop after epoch {epoch}, best epoch {best[1]}")
            break

    log.info(f"training finished: best validation loss {best[0]:.6f} in epoch {best[1]}")
    trained = params.with_weights(best[2])
    trained.history = history
    return trained


def _standardized_loss(params, x, classes, chunk=256):
    total = 0.0
    for lo in range(0, len(x), chunk):
        ctx = nx.GradientContext()
        stacked, _, _ = _stack(x[lo:lo + chunk], params)
        value = nx.softmax_cross_entropy(build_forward(ctx, ctx.constant(stacked), params), classes[lo:lo + chunk])
        total += float(value.value[0, 0]) * len(x[lo:lo + chunk])
    return total / len(x)


def classify_batch(features, params, chunk=256):
    x = standardize(features, params)
    probabilities = []
    for lo in range(0, len(x), chunk):
        probabilities.append(nx.softmax(gcrl_forward(x[lo:lo + chunk], params)))
    probabilities = np.vstack(probabilities)
    predicted = np.argmax(probabilities, axis=1)
    return predicted, probabilities[np.arange(len(predicted)), predicted]


def classify(features, params):
    """Attack type id and its softmax confidence for one raw (nodes, window) payload."""
    predicted, confidence = classify_batch(np.asarray(features)[None], params)
    return int(predicted[0]), float(confidence[0])

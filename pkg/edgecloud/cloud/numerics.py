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

"""
Dense float64 matrices with a reverse-mode tape and the Adam optimizer.

Every primitive records its output on the tape of its first operand together
with a closure returning the vector-Jacobian products for its parents.
Matrices are always 2-D; the only broadcast supported is a (1, cols) row
added to every row of a matrix.
"""

from dataclasses import dataclass, field
import numpy as np
from scipy import special
from edgecloud.cloud.exceptions import ShapeException


class Tensor(object):
    __slots__ = ("value", "grad", "parents", "backward_fn", "context", "name")

    def __init__(self, context, value, parents=(), backward_fn=None, name=None):
        self.context = context
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(name={self.name}, shape={self.shape})"


class GradientContext(object):
    """Single-owner tape of one forward/backward pass plus its parameter registry."""

    def __init__(self):
        self.nodes = []
        self.params = {}

    def param(self, name, value):
        tensor = Tensor(self, _as_matrix(value), name=name)
        self.params[name] = tensor
        return tensor

    def constant(self, value):
        return Tensor(self, _as_matrix(value))

    def record(self, value, parents, backward_fn):
        tensor = Tensor(self, value, parents, backward_fn)
        self.nodes.append(tensor)
        return tensor

    def backward(self, loss):
        if loss.shape != (1, 1):
            raise ShapeException(f"backward needs a scalar (1, 1) loss, got {loss.shape}")

        loss.grad = np.ones((1, 1))
        for node in reversed(self.nodes):
            if node.grad is None or node.backward_fn is None:
                continue
            for parent, grad in zip(node.parents, node.backward_fn(node.grad)):
                if grad is None:
                    continue
                parent.grad = grad if parent.grad is None else parent.grad + grad

    def gradients(self):
        return {name: (t.grad if t.grad is not None else np.zeros_like(t.value)) for name, t in self.params.items()}


def _as_matrix(value):
    value = np.array(value, dtype=np.float64)
    if value.ndim == 0:
        return value.reshape(1, 1)
    if value.ndim == 1:
        return value.reshape(1, -1)
    if value.ndim != 2:
        raise ShapeException(f"matrices are 2-D, got shape {value.shape}")
    return value


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeException(f"matmul: cannot multiply {a.shape} by {b.shape}")

    av, bv = a.value, b.value
    return a.context.record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a, b):
    if a.shape == b.shape:
        return a.context.record(a.value + b.value, (a, b), lambda g: (g, g))
    if b.shape == (1, a.shape[1]):
        return a.context.record(a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))

    raise ShapeException(f"add: shapes {a.shape} and {b.shape} are incompatible")


def hadamard(a, b):
    if a.shape != b.shape:
        raise ShapeException(f"hadamard: shapes {a.shape} and {b.shape} differ")

    av, bv = a.value, b.value
    return a.context.record(av * bv, (a, b), lambda g: (g * bv, g * av))


def sigmoid(a):
    s = special.expit(a.value)
    return a.context.record(s, (a,), lambda g: (g * s * (1 - s),))


def tanh(a):
    t = np.tanh(a.value)
    return a.context.record(t, (a,), lambda g: (g * (1 - t * t),))


def relu(a):
    active = a.value > 0
    return a.context.record(np.where(active, a.value, 0.0), (a,), lambda g: (g * active,))


def slice_cols(a, start, stop):
    if not 0 <= start < stop <= a.shape[1]:
        raise ShapeException(f"slice_cols: [{start}, {stop}) outside {a.shape}")

    def backward(g):
        full = np.zeros_like(a.value)
        full[:, start:stop] = g
        return (full,)

    return a.context.record(a.value[:, start:stop].copy(), (a,), backward)


def concat_cols(tensors):
    rows = {t.shape[0] for t in tensors}
    if len(rows) != 1:
        raise ShapeException(f"concat_cols: row counts differ {[t.shape for t in tensors]}")

    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])
    return tensors[0].context.record(np.hstack([t.value for t in tensors]), tuple(tensors),
                                     lambda g: tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])))


def propagate(matrix, a, n_nodes):
    """Apply an (n_nodes, n_nodes) constant matrix to every n_nodes-row block of `a`."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (n_nodes, n_nodes) or a.shape[0] % n_nodes != 0:
        raise ShapeException(f"propagate: matrix {matrix.shape} does not fit rows of {a.shape} in blocks of {n_nodes}")

    samples, width = a.shape[0] // n_nodes, a.shape[1]
    out = np.matmul(matrix, a.value.reshape(samples, n_nodes, width)).reshape(a.shape)

    def backward(g):
        return (np.matmul(matrix.T, g.reshape(samples, n_nodes, width)).reshape(a.shape),)

    return a.context.record(out, (a,), backward)


def mean_pool_rows(a, n_nodes):
    if a.shape[0] % n_nodes != 0:
        raise ShapeException(f"mean_pool_rows: {a.shape[0]} rows are not blocks of {n_nodes}")

    samples, width = a.shape[0] // n_nodes, a.shape[1]
    out = a.value.reshape(samples, n_nodes, width).mean(axis=1)

    def backward(g):
        return (np.repeat(g[:, None, :] / n_nodes, n_nodes, axis=1).reshape(a.shape),)

    return a.context.record(out, (a,), backward)


def softmax_cross_entropy(logits, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (logits.shape[0],) or labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ShapeException(f"softmax_cross_entropy: labels {labels.shape} do not fit logits {logits.shape}")

    samples = logits.shape[0]
    log_probs = logits.value - special.logsumexp(logits.value, axis=1, keepdims=True)
    rows = np.arange(samples)
    loss = -log_probs[rows, labels].mean()

    def backward(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (grad * (g[0, 0] / samples),)

    return logits.context.record(np.array([[loss]]), (logits,), backward)


def softmax(logits):
    return np.exp(logits - special.logsumexp(logits, axis=1, keepdims=True))


def glorot_uniform(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass
class AdamState:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    state.step += 1
    updated = {}
    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ShapeException(f"adam_step: gradient {grad.shape} does not match parameter {name} {value.shape}")

        m = state.beta1 * state.first.get(name, np.zeros_like(value)) + (1 - state.beta1) * grad
        v = state.beta2 * state.second.get(name, np.zeros_like(value)) + (1 - state.beta2) * grad * grad
        state.first[name], state.second[name] = m, v
        m_hat = m / (1 - state.beta1 ** state.step)
        v_hat = v / (1 - state.beta2 ** state.step)
        updated[name] = value - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)

    return updated

"""Built-in stochastic objectives with per-component gradient oracles.

Every oracle exposes the same surface: n components f_i, grad_at for a
single index or an index batch (batch gradients are averaged), full_grad
as the exact mean over all components, and loss_at. Data is synthesised
from a seeded generator so a problem is reproducible from its spec alone.

Declared smoothness and gradient-norm bounds (L, V_bound) hold on the
declared feasible box and are deliberately conservative.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# max |d/dz sigmoid(z)| and max |d^2/dz^2 sigmoid(z)|
_SIGMOID_D1_MAX = 0.25
_SIGMOID_D2_MAX = 1.0 / (6.0 * np.sqrt(3.0))


def _check_index(i, n: int) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(i, dtype=np.int64))
    if idx.size == 0:
        raise ConfigurationError("empty component index batch")
    if (idx < 0).any() or (idx >= n).any():
        raise ConfigurationError(f"component index out of range [0, {n})")
    return idx


class QuadraticOracle:
    """Mean of squared distances to n random anchor points.

    f_i(x) = 0.5 * ||x - c_i||^2, so grad f_i = x - c_i and the full
    gradient is x - mean(c). Convex; the unique minimiser is the anchor
    mean, which makes it the ground truth for engine equivalence tests.
    """

    name = "quadratic"

    def __init__(self, n: int, dim: int, seed: int, box_radius: float = 10.0):
        if n < 1 or dim < 1:
            raise ConfigurationError("quadratic oracle needs n >= 1, dim >= 1")
        rng = np.random.default_rng(seed)
        self.n = n
        self.dim = dim
        self.centers = rng.normal(size=(n, dim))
        self.box = (-box_radius, box_radius)
        self.L = 1.0
        center_norms = np.linalg.norm(self.centers, axis=1)
        self.V_bound = float(
            box_radius * np.sqrt(dim) + center_norms.max()
        )

    def grad_at(self, i, x) -> np.ndarray:
        idx = _check_index(i, self.n)
        return np.asarray(x, dtype=float) - self.centers[idx].mean(axis=0)

    def full_grad(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) - self.centers.mean(axis=0)

    def loss_at(self, x) -> float:
        d = np.asarray(x, dtype=float)[None, :] - self.centers
        return float(0.5 * (d * d).sum(axis=1).mean())

    def minimiser(self) -> np.ndarray:
        return self.centers.mean(axis=0)


class SigmoidOracle:
    """Bounded non-convex loss: f_i(x) = 1 / (1 + exp(y_i <a_i, x>)).

    Labels follow a planted linear rule with flip noise, so minimising
    drives y_i <a_i, x> up for the consistent majority while the flipped
    examples keep the objective non-convex with vanishing tails.
    """

    name = "sigmoid"

    def __init__(
        self,
        n: int,
        dim: int,
        seed: int,
        label_noise: float = 0.1,
        box_radius: float = 10.0,
    ):
        if n < 1 or dim < 1:
            raise ConfigurationError("sigmoid oracle needs n >= 1, dim >= 1")
        rng = np.random.default_rng(seed)
        self.n = n
        self.dim = dim
        self.features = rng.normal(size=(n, dim)) / np.sqrt(dim)
        planted = rng.normal(size=dim)
        labels = np.sign(self.features @ planted)
        labels[labels == 0] = 1.0
        flips = rng.random(n) < label_noise
        labels[flips] *= -1.0
        self.labels = labels
        self.box = (-box_radius, box_radius)
        row_sq = (self.features * self.features).sum(axis=1)
        self.L = float(_SIGMOID_D2_MAX * row_sq.mean())
        self.V_bound = float(_SIGMOID_D1_MAX * np.sqrt(row_sq).max())

    def _margins(self, idx, x):
        return self.labels[idx] * (self.features[idx] @ np.asarray(x, dtype=float))

    def grad_at(self, i, x) -> np.ndarray:
        idx = _check_index(i, self.n)
        z = self._margins(idx, x)
        s = 1.0 / (1.0 + np.exp(-z))
        # d/dx sigmoid(y a.x) ... f_i = sigmoid(-y a.x), so the slope is
        # -y * s * (1 - s) with s = sigmoid(y a.x)
        coeff = -self.labels[idx] * s * (1.0 - s)
        return (coeff[:, None] * self.features[idx]).mean(axis=0)

    def full_grad(self, x) -> np.ndarray:
        return self.grad_at(np.arange(self.n), x)

    def loss_at(self, x) -> float:
        z = self._margins(np.arange(self.n), x)
        return float((1.0 / (1.0 + np.exp(z))).mean())


class MatrixFactorizationOracle:
    """Low-rank recovery on observed entries of a noisy rank-r matrix.

    Parameters are the stacked row and column factors; component s with
    observation (i, j, m) has f_s = 0.5 * (<u_i, v_j> - m)^2. Non-convex
    with saddle structure; bounds hold on the declared box.
    """

    name = "matrix_factorization"

    def __init__(
        self,
        n: int,
        seed: int,
        rows: int = 8,
        cols: int = 8,
        rank: int = 2,
        noise: float = 0.01,
        box_radius: float = 2.0,
    ):
        if n < 1 or rows < 1 or cols < 1 or rank < 1:
            raise ConfigurationError("matrix factorization oracle: bad shape")
        rng = np.random.default_rng(seed)
        self.rows, self.cols, self.rank = rows, cols, rank
        self.n = n
        self.dim = (rows + cols) * rank
        u_true = rng.normal(size=(rows, rank)) / np.sqrt(rank)
        v_true = rng.normal(size=(cols, rank)) / np.sqrt(rank)
        full = u_true @ v_true.T + noise * rng.normal(size=(rows, cols))
        flat = rng.choice(rows * cols, size=n, replace=n > rows * cols)
        self.obs_i = flat // cols
        self.obs_j = flat % cols
        self.obs_m = full[self.obs_i, self.obs_j]
        self.box = (-box_radius, box_radius)
        R = box_radius
        m_max = float(np.abs(self.obs_m).max())
        # Hessian blocks are bounded by factor norms and residuals on the
        # box: ||H|| <= 3 r R^2 + (r R^2 + m_max)
        self.L = float(4.0 * rank * R * R + m_max)
        self.V_bound = float(
            (rank * R * R + m_max) * 2.0 * np.sqrt(rank) * R
        )

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        u = x[: self.rows * self.rank].reshape(self.rows, self.rank)
        v = x[self.rows * self.rank :].reshape(self.cols, self.rank)
        return u, v

    def grad_at(self, i, x) -> np.ndarray:
        idx = _check_index(i, self.n)
        u, v = self._split(x)
        gu = np.zeros_like(u)
        gv = np.zeros_like(v)
        for s in idx:
            r, c = self.obs_i[s], self.obs_j[s]
            resid = float(u[r] @ v[c]) - self.obs_m[s]
            gu[r] += resid * v[c]
            gv[c] += resid * u[r]
        scale = 1.0 / idx.size
        return np.concatenate([gu.ravel(), gv.ravel()]) * scale

    def full_grad(self, x) -> np.ndarray:
        return self.grad_at(np.arange(self.n), x)

    def loss_at(self, x) -> float:
        u, v = self._split(x)
        pred = (u[self.obs_i] * v[self.obs_j]).sum(axis=1)
        resid = pred - self.obs_m
        return float(0.5 * (resid * resid).mean())


_REGISTRY = {
    "quadratic": QuadraticOracle,
    "sigmoid": SigmoidOracle,
    "matrix_factorization": MatrixFactorizationOracle,
}


def oracle_names() -> list[str]:
    return sorted(_REGISTRY)


def make_oracle(name: str, **params):
    """Build a registered oracle; params mirror the constructor arguments."""
    if name not in _REGISTRY:
        raise ConfigurationError(
            f"unknown problem {name!r}; available: {oracle_names()}"
        )
    try:
        return _REGISTRY[name](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for problem {name!r}: {exc}")

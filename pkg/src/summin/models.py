"""Concrete sub-function families and the dense kernels they rely on.

Families
--------
``QuadraticProblem``      f_i(x) = 1/2 ||x - y_i||^2                  (k-means)
``DiagQuadraticProblem``  f_i(x) = 1/2 sum_l h_il (x_l - c_il)^2
``RidgeProblem``          f_i(x) = 1/2 (a_i^T x - b_i)^2 + lam/2 ||x||^2
``GpcaProblem``           f_i(A) = 1/2 ||y_i^T A||^2,  A^T A = I_r
``MlpProblem``            f_i(th) = 1/2 (psi(a_i; th) - b_i)^2 + lam/2 ||th||^2

with ``psi(a; W, p, q, o) = p^T relu(W a + q) + o``.  The flat parameter
``theta`` is laid out as ``(W row-major, p, q, o)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adam import AdamConfig, AdamState, adam_step
from .core import (
    DegenerateInstanceError,
    InvalidInputError,
    Problem,
    UnsupportedOracleError,
)
from .rng import Rng

# ---------------------------------------------------------------------------
# symmetric eigensolver


@dataclass
class SymEigResult:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns
    sweeps: int


def sym_eig(M, tol: float = 1e-12, max_sweeps: int = 60) -> SymEigResult:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is at most
    ``tol * ||M||_F``.
    """
    A = np.array(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError("sym_eig needs a square matrix")
    scale = np.linalg.norm(A)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(1.0, scale):
        raise InvalidInputError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    d = A.shape[0]
    V = np.eye(d)
    sweeps = 0
    off_mask = ~np.eye(d, dtype=bool)
    while sweeps < max_sweeps:
        off = np.sqrt(np.sum(A[off_mask] ** 2))
        if off <= tol * scale:
            break
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0 else -1.0
                t = sgn / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return SymEigResult(w[order], V[:, order], sweeps)


def bottom_eigenvectors(M, r: int) -> np.ndarray:
    """Orthonormal eigenvectors for the ``r`` smallest eigenvalues of ``M``."""
    return sym_eig(M).eigenvectors[:, :r]


def is_orthonormal(A, tol: float = 1e-10) -> bool:
    A = np.asarray(A)
    return bool(np.max(np.abs(A.T @ A - np.eye(A.shape[1]))) <= tol)


# ---------------------------------------------------------------------------
# quadratic families


class DiagQuadraticProblem(Problem):
    """Axis-aligned quadratics ``1/2 sum_l h_il (x_l - c_il)^2`` with ``f_i^* = 0``."""

    def __init__(self, centers, curvatures=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if curvatures is None:
            curvatures = np.ones_like(self.centers)
        self.curvatures = np.broadcast_to(
            np.asarray(curvatures, dtype=np.float64), self.centers.shape).copy()
        if np.any(self.curvatures <= 0):
            raise InvalidInputError("curvatures must be positive")
        self.n, d = self.centers.shape
        self.param_shape = (d,)
        self.L = float(self.curvatures.max())
        self.mu = float(self.curvatures.min())
        self._check_constants()

    def _sel(self, idx):
        if idx is None:
            return self.centers, self.curvatures
        idx = np.asarray(idx, dtype=np.int64)
        return self.centers[idx], self.curvatures[idx]

    def values(self, x, idx=None):
        c, h = self._sel(idx)
        return 0.5 * np.sum(h * (x - c) ** 2, axis=1)

    def value_matrix(self, params, idx=None):
        params = self.check_params(params)
        c, h = self._sel(idx)
        diff = params[None, :, :] - c[:, None, :]
        return 0.5 * np.einsum("nkd,nd->nk", diff * diff, h)

    def gradients(self, x, idx=None):
        c, h = self._sel(idx)
        return h * (x - c)

    def minimizer(self, i):
        return self.centers[int(i)].copy()

    def minimizers(self, idx=None):
        return self._sel(idx)[0].copy()

    def opt_values(self):
        return np.zeros(self.n)

    def group_minimizer(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            raise InvalidInputError("group minimizer of an empty cluster")
        c, h = self._sel(idx)
        return np.sum(h * c, axis=0) / np.sum(h, axis=0)


class QuadraticProblem(DiagQuadraticProblem):
    """Classic k-means: ``f_i(x) = 1/2 ||x - y_i||^2`` (``L = mu = 1``)."""

    def __init__(self, points):
        super().__init__(points)

    @property
    def points(self):
        return self.centers


# ---------------------------------------------------------------------------
# ridge regression


def ridge_sub_minimizer(a, b: float, lam: float) -> np.ndarray:
    """Minimizer of ``1/2 (a^T x - b)^2 + lam/2 ||x||^2``: ``a b / (lam + ||a||^2)``."""
    if lam <= 0:
        raise InvalidInputError("ridge requires lam > 0")
    a = np.asarray(a, dtype=np.float64)
    return a * (b / (lam + a @ a))


def ridge_group_minimizer(A, b, lam: float) -> np.ndarray:
    """Minimizer of the average of ridge sub-functions over the rows of ``A``.

    Solves ``(sum a a^T + lam |C| I) x = sum b a``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if A.shape[0] == 0:
        raise InvalidInputError("group minimizer of an empty cluster")
    if lam <= 0:
        raise InvalidInputError("ridge requires lam > 0")
    G = A.T @ A + lam * A.shape[0] * np.eye(A.shape[1])
    return np.linalg.solve(G, A.T @ b)


class RidgeProblem(Problem):
    """Ridge-regularised linear regression sub-functions, one per sample."""

    def __init__(self, A, b, lam: float = 0.01):
        self.A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise InvalidInputError("A and b disagree on the number of samples")
        if lam <= 0:
            raise InvalidInputError("ridge requires lam > 0")
        self.lam = float(lam)
        self.n, d = self.A.shape
        self.param_shape = (d,)
        self._sq = np.einsum("nd,nd->n", self.A, self.A)
        self.L = float(self._sq.max() + self.lam)
        self.mu = self.lam
        self._check_constants()

    def _sel(self, idx):
        if idx is None:
            return self.A, self.b
        idx = np.asarray(idx, dtype=np.int64)
        return self.A[idx], self.b[idx]

    def values(self, x, idx=None):
        A, b = self._sel(idx)
        res = A @ x - b
        return 0.5 * res * res + 0.5 * self.lam * (x @ x)

    def value_matrix(self, params, idx=None):
        params = self.check_params(params)
        A, b = self._sel(idx)
        res = A @ params.T - b[:, None]
        return 0.5 * res * res + 0.5 * self.lam * np.sum(params * params, axis=1)[None, :]

    def gradients(self, x, idx=None):
        A, b = self._sel(idx)
        return A * (A @ x - b)[:, None] + self.lam * x

    def group_value_grad(self, x, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return 0.0, np.zeros(self.param_shape)
        A, b = self._sel(idx)
        res = A @ x - b
        val = 0.5 * np.mean(res * res) + 0.5 * self.lam * (x @ x)
        return float(val), A.T @ res / idx.size + self.lam * x

    def minimizer(self, i):
        i = int(i)
        return ridge_sub_minimizer(self.A[i], self.b[i], self.lam)

    def minimizers(self, idx=None):
        A, b = self._sel(idx)
        sq = np.einsum("nd,nd->n", A, A)
        return A * (b / (self.lam + sq))[:, None]

    def opt_values(self):
        return self.lam * self.b**2 / (2.0 * (self.lam + self._sq))

    def group_minimizer(self, idx):
        A, b = self._sel(idx)
        return ridge_group_minimizer(A, b, self.lam)


# ---------------------------------------------------------------------------
# GPCA


def gpca_sub_minimizer(y, r: int) -> np.ndarray:
    """An orthonormal ``d x r`` frame orthogonal to ``y``.

    A Householder reflector maps ``e_1`` onto ``+-y/||y||``; its remaining
    columns span the orthogonal complement and the first ``r`` are returned.
    """
    y = np.asarray(y, dtype=np.float64)
    d = y.size
    if not 1 <= r <= d - 1:
        raise InvalidInputError(f"need 1 <= r <= d-1, got r={r}, d={d}")
    norm = np.linalg.norm(y)
    if norm == 0:
        raise DegenerateInstanceError("zero data vector has no well-defined complement")
    u = y / norm
    w = u.copy()
    w[0] += 1.0 if u[0] >= 0 else -1.0
    H = np.eye(d) - 2.0 * np.outer(w, w) / (w @ w)
    return H[:, 1:r + 1].copy()


def gpca_group_minimizer(Y, r: int) -> np.ndarray:
    """Bottom-``r`` eigenvectors of ``(1/|C|) sum y y^T``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y.shape[0] == 0:
        raise InvalidInputError("group minimizer of an empty cluster")
    return bottom_eigenvectors(Y.T @ Y / Y.shape[0], r)


class GpcaProblem(Problem):
    """Subspace-clustering sub-functions over ``d x r`` orthonormal frames."""

    is_frame = True

    def __init__(self, Y, r: int):
        self.Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        self.n, d = self.Y.shape
        if not 1 <= r <= d - 1:
            raise InvalidInputError(f"need 1 <= r <= d-1, got r={r}, d={d}")
        self.r = int(r)
        self.param_shape = (d, self.r)
        self._check_constants()

    def _sel(self, idx):
        return self.Y if idx is None else self.Y[np.asarray(idx, dtype=np.int64)]

    def values(self, A, idx=None):
        P = self._sel(idx) @ A
        return 0.5 * np.sum(P * P, axis=1)

    def value_matrix(self, params, idx=None):
        params = self.check_params(params)
        P = np.einsum("nd,kdr->nkr", self._sel(idx), params)
        return 0.5 * np.sum(P * P, axis=2)

    def minimizer(self, i):
        return gpca_sub_minimizer(self.Y[int(i)], self.r)

    def opt_values(self):
        return np.zeros(self.n)

    def group_minimizer(self, idx):
        return gpca_group_minimizer(self._sel(idx), self.r)


# ---------------------------------------------------------------------------
# two-layer ReLU network


def mlp_size(d_in: int, d_hidden: int) -> int:
    return d_hidden * d_in + 2 * d_hidden + 1


def mlp_unpack(theta, d_in: int, d_hidden: int):
    """Views ``(W, p, q, o)`` into ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape[-1] != mlp_size(d_in, d_hidden):
        raise InvalidInputError(
            f"theta has {theta.shape[-1]} entries, expected {mlp_size(d_in, d_hidden)}")
    nw = d_hidden * d_in
    W = theta[..., :nw].reshape(*theta.shape[:-1], d_hidden, d_in)
    p = theta[..., nw:nw + d_hidden]
    q = theta[..., nw + d_hidden:nw + 2 * d_hidden]
    o = theta[..., -1]
    return W, p, q, o


def mlp_pack(W, p, q, o) -> np.ndarray:
    return np.concatenate([np.ravel(W), np.ravel(p), np.ravel(q), np.atleast_1d(o)])


def mlp_forward(theta, a, d_in: int, d_hidden: int):
    """``psi(a; theta)``; ``a`` may be one input or a batch of rows."""
    W, p, q, o = mlp_unpack(theta, d_in, d_hidden)
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != d_in:
        raise InvalidInputError(f"input dimension {a.shape[-1]} != {d_in}")
    hidden = np.maximum(a @ W.T + q, 0.0)
    return hidden @ p + o


def _mlp_backward(theta, A, b, d_in, d_hidden):
    """Residuals and per-sample gradients of ``1/2 (psi - b)^2`` (no regulariser)."""
    W, p, q, o = mlp_unpack(theta, d_in, d_hidden)
    pre = A @ W.T + q
    hidden = np.maximum(pre, 0.0)
    res = hidden @ p + o - b
    # relu'(0) := 0
    dpre = res[:, None] * p[None, :] * (pre > 0)
    return res, hidden, dpre


@dataclass(frozen=True)
class MlpSubFn:
    a: np.ndarray
    b: float
    lam: float
    d_in: int
    d_hidden: int


def mlp_value_grad(sub: MlpSubFn, theta):
    """Value and gradient of one regularised network sub-function."""
    theta = np.asarray(theta, dtype=np.float64)
    A = np.asarray(sub.a, dtype=np.float64)[None, :]
    res, hidden, dpre = _mlp_backward(theta, A, np.array([sub.b]), sub.d_in, sub.d_hidden)
    grad = mlp_pack(dpre[0][:, None] * A[0][None, :], res[0] * hidden[0], dpre[0], res[0])
    value = 0.5 * res[0] ** 2 + 0.5 * sub.lam * (theta @ theta)
    return float(value), grad + sub.lam * theta


class MlpProblem(Problem):
    """Mixed nonlinear regression with one two-layer network per cluster.

    ``f_i^*`` is unknown.  ``minimizer(i)`` is approximated by running ADAM on
    the single-sample loss from a Gaussian start drawn from a per-index
    substream of ``minimizer_seed``; results are cached.
    """

    def __init__(self, A, b, d_hidden: int, lam: float = 0.01, *,
                 minimizer_steps: int = 200, minimizer_lr: float = 1e-3,
                 minimizer_seed: int = 0):
        self.A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise InvalidInputError("A and b disagree on the number of samples")
        if lam < 0:
            raise InvalidInputError("lam must be non-negative")
        self.lam = float(lam)
        self.n, self.d_in = self.A.shape
        self.d_hidden = int(d_hidden)
        self.param_shape = (mlp_size(self.d_in, self.d_hidden),)
        self.minimizer_steps = int(minimizer_steps)
        self.minimizer_cfg = AdamConfig(lr=minimizer_lr)
        self._min_rng = Rng(minimizer_seed).substream("mlp-minimizer")
        self._min_cache: dict = {}
        self._check_constants()

    def _sel(self, idx):
        if idx is None:
            return self.A, self.b
        idx = np.asarray(idx, dtype=np.int64)
        return self.A[idx], self.b[idx]

    def sub(self, i) -> MlpSubFn:
        i = int(i)
        return MlpSubFn(self.A[i], float(self.b[i]), self.lam, self.d_in, self.d_hidden)

    def predict(self, theta, idx=None):
        return mlp_forward(theta, self._sel(idx)[0], self.d_in, self.d_hidden)

    def values(self, theta, idx=None):
        A, b = self._sel(idx)
        res = mlp_forward(theta, A, self.d_in, self.d_hidden) - b
        return 0.5 * res * res + 0.5 * self.lam * (theta @ theta)

    def value_matrix(self, params, idx=None):
        params = self.check_params(params)
        A, b = self._sel(idx)
        W, p, q, o = mlp_unpack(params, self.d_in, self.d_hidden)
        hidden = np.maximum(np.einsum("nd,khd->nkh", A, W) + q[None], 0.0)
        res = np.einsum("nkh,kh->nk", hidden, p) + o[None, :] - b[:, None]
        return 0.5 * res * res + 0.5 * self.lam * np.sum(params * params, axis=1)[None, :]

    def gradients(self, theta, idx=None):
        A, b = self._sel(idx)
        res, hidden, dpre = _mlp_backward(theta, A, b, self.d_in, self.d_hidden)
        n = A.shape[0]
        dW = (dpre[:, :, None] * A[:, None, :]).reshape(n, -1)
        g = np.concatenate([dW, res[:, None] * hidden, dpre, res[:, None]], axis=1)
        return g + self.lam * theta

    def group_value_grad(self, theta, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return 0.0, np.zeros(self.param_shape)
        A, b = self._sel(idx)
        res, hidden, dpre = _mlp_backward(theta, A, b, self.d_in, self.d_hidden)
        n = idx.size
        g = mlp_pack(dpre.T @ A / n, hidden.T @ res / n, dpre.mean(axis=0), res.mean())
        val = 0.5 * np.mean(res * res) + 0.5 * self.lam * (theta @ theta)
        return float(val), g + self.lam * theta

    def minimizer(self, i):
        i = int(i)
        if i not in self._min_cache:
            rng = self._min_rng.spawn(i)
            theta = rng.normal(self.param_shape[0])
            sub = self.sub(i)
            state = AdamState.zeros(theta.shape)
            for _ in range(self.minimizer_steps):
                _, g = mlp_value_grad(sub, theta)
                state, step = adam_step(state, g, self.minimizer_cfg)
                theta = theta + step
            self._min_cache[i] = theta
        return self._min_cache[i].copy()

"""Gaussian process regression with confidence bounds.

A fitted :class:`GpPosterior` is immutable.  Mean and variance follow the
standard zero-mean-prior formulas

    mu(x)    = k_R(x) (K_R + s2 I)^-1 y
    var(x)   = k(x, x) - k_R(x) (K_R + s2 I)^-1 k_R(x)^T

evaluated through a Cholesky factor ``L`` of ``K_R + s2 I``.  Bounds are
``mu -/+ beta * sqrt(var)``.  A constant ``prior_mean`` may be subtracted from
the outputs before fitting (and added back on prediction); it defaults to 0.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import GpNumericalError

KERNEL_FAMILIES = ("sqexp",)

# Jitter ladder, relative to the signal variance.
_JITTER_START = 1e-10
_JITTER_STOP = 1e-4
# A pivot this small relative to the largest diagonal entry is treated as a
# failed factorisation (catches exactly-duplicated noise-free inputs).
_PIVOT_RTOL = 1e-13


@dataclass(frozen=True)
class KernelSpec:
    lengthscales: tuple
    signal_variance: float = 1.0
    family: str = "sqexp"

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not ls or min(ls) <= 0 or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be positive and finite")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")

    @property
    def dim(self):
        return len(self.lengthscales)

    @property
    def inv_lengthscales(self):
        return 1.0 / np.asarray(self.lengthscales)

    def matrix(self, A, B):
        """Covariance matrix between the rows of ``A`` and ``B``."""
        A = _as_points(A, self.dim)
        B = _as_points(B, self.dim)
        return kernels.sqexp_cross(A, B, self.inv_lengthscales, self.signal_variance)

    def diag(self, A, B):
        """Row-wise covariances ``k(A[i], B[i])``."""
        d = (A - B) * self.inv_lengthscales
        return self.signal_variance * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))


def kernel_eval(spec, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (spec.dim,) or b.shape != (spec.dim,):
        raise ValueError(
            f"points must have dimension {spec.dim}, got {a.shape} and {b.shape}"
        )
    return float(spec.matrix(a[None], b[None])[0, 0])


def _as_points(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {X.shape}")
    return np.ascontiguousarray(X)


@dataclass(frozen=True, eq=False)
class GpData:
    inputs: np.ndarray
    outputs: np.ndarray
    noise_variance: float = 0.0
    prior_mean: float = 0.0

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float, ndmin=2)
        y = np.array(self.outputs, dtype=float).reshape(-1)
        if X.size == 0:
            X = X.reshape(0, X.shape[-1] if X.ndim == 2 else 0)
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"{X.shape[0]} inputs but {y.shape[0]} outputs"
            )
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "prior_mean", float(self.prior_mean))

    @classmethod
    def empty(cls, dim, noise_variance=0.0, prior_mean=0.0):
        return cls(np.zeros((0, dim)), np.zeros(0), noise_variance, prior_mean)

    def __len__(self):
        return self.outputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def appended(self, x, y):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return GpData(
            np.vstack([self.inputs, x]),
            np.append(self.outputs, float(y)),
            self.noise_variance,
            self.prior_mean,
        )


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    beta: float = 2.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def _cholesky(A, scale):
    """Lower Cholesky factor of ``A`` with jitter escalation.

    Returns ``(L, jitter)``.
    """
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    top = float(np.max(np.diag(A)))
    jitter = 0.0
    eye = np.eye(n)
    while True:
        try:
            L = np.linalg.cholesky(A + jitter * eye)
        except np.linalg.LinAlgError:
            L = None
        if L is not None and np.min(np.diag(L)) ** 2 >= _PIVOT_RTOL * top:
            return L, jitter
        if jitter >= _JITTER_STOP * scale:
            raise GpNumericalError("Cholesky factorisation failed", jitter)
        jitter = _JITTER_START * scale if jitter == 0.0 else jitter * 10.0


@dataclass(frozen=True, eq=False)
class GpPosterior:
    kernel: KernelSpec
    data: GpData
    factor: np.ndarray
    weights: np.ndarray
    jitter: float = 0.0
    # number of predictive variances clamped to zero so far
    stats: dict = field(default_factory=lambda: {"clamped": 0}, repr=False)

    @property
    def dim(self):
        return self.kernel.dim

    def system_matrix(self):
        """``K_R + s2 I`` (without jitter)."""
        X = self.data.inputs
        return self.kernel.matrix(X, X) + self.data.noise_variance * np.eye(len(X))

    def predict_full(self, X):
        """Batch prediction: ``(mean, clamped variance, V)`` with ``V = L^-1 k_R(X)^T``."""
        X = _as_points(X, self.dim)
        mean, var, V = kernels.posterior_predict(
            X,
            self.data.inputs,
            self.kernel.inv_lengthscales,
            self.kernel.signal_variance,
            self.factor,
            self.weights,
        )
        neg = var < 0
        if neg.any():
            self.stats["clamped"] += int(neg.sum())
            var = np.where(neg, 0.0, var)
        return mean + self.data.prior_mean, var, V

    def pair_predict(self, X_obs, X_query, beta):
        """One-pass ``(mean, clamped var)`` at ``[X_obs; X_query]`` and the
        virtual-observation lower bound at each ``X_query[i]`` given
        ``u(X_obs[i])`` (see :func:`virtual_lower_bounds`)."""
        X_obs = _as_points(X_obs, self.dim)
        X_query = _as_points(X_query, self.dim)
        mean, var, aux = kernels.pair_predict(
            X_obs, X_query, self.data.inputs, self.kernel.inv_lengthscales,
            self.kernel.signal_variance, self.factor, self.weights,
            self.data.noise_variance + self.jitter, float(beta),
        )
        neg = var < 0
        if neg.any():
            self.stats["clamped"] += int(neg.sum())
            var = np.where(neg, 0.0, var)
        pm = self.data.prior_mean
        return mean + pm, var, aux + pm

    def predict(self, x):
        single = np.ndim(x) == 1
        mean, var, _ = self.predict_full(x)
        if single:
            return float(mean[0]), float(var[0])
        return mean, var

    def bounds(self, x, band):
        beta = band.beta if isinstance(band, ConfidenceBand) else float(band)
        single = np.ndim(x) == 1
        mean, var, _ = self.predict_full(x)
        half = beta * np.sqrt(var)
        lo, hi = mean - half, mean + half
        if single:
            return float(lo[0]), float(hi[0])
        return lo, hi

    def with_observation(self, x, value):
        return fit(self.kernel, self.data.appended(x, value))


def fit(kernel, data):
    if len(data) and data.dim != kernel.dim:
        raise ValueError(f"data dimension {data.dim} != kernel dimension {kernel.dim}")
    X = data.inputs if len(data) else np.zeros((0, kernel.dim))
    data = GpData(X, data.outputs, data.noise_variance, data.prior_mean)
    K = kernel.matrix(X, X) if len(X) else np.zeros((0, 0))
    A = K + data.noise_variance * np.eye(len(X))
    L, jitter = _cholesky(A, kernel.signal_variance)
    y = data.outputs - data.prior_mean
    if len(X):
        z = solve_triangular(L, y, lower=True, check_finite=False)
        alpha = solve_triangular(L.T, z, lower=False, check_finite=False)
    else:
        alpha = np.zeros(0)
    return GpPosterior(kernel, data, np.ascontiguousarray(L), alpha, jitter)


def predict(post, x):
    return post.predict(x)


def bounds(post, x, band):
    return post.bounds(x, band)


def with_virtual_observation(post, xbar, value):
    """Posterior after appending ``(xbar, value)`` as an ordinary noisy datum."""
    return post.with_observation(xbar, value)


def virtual_lower_bounds(post, beta, X_obs, X_query, values=None):
    """Lower bounds at ``X_query[i]`` after a virtual observation at ``X_obs[i]``.

    The observed value defaults to the optimistic bound ``u(X_obs[i])``.  Uses
    sequential Gaussian conditioning, which is algebraically identical to
    refitting on the appended data with the same noise variance.
    """
    X_obs = _as_points(X_obs, post.dim)
    X_query = _as_points(X_query, post.dim)
    pred = post.predict_full(np.vstack([X_obs, X_query]))
    return _virtual_from(post, beta, pred, X_obs, X_query, values)


def _virtual_from(post, beta, pred, X_obs, X_query, values=None):
    """:func:`virtual_lower_bounds` given ``pred = predict_full(vstack(X_obs, X_query))``."""
    mean, var, V = pred
    m = X_obs.shape[0]
    mu_o, mu_q = mean[:m], mean[m:]
    var_o, var_q = var[:m], var[m:]
    cross = post.kernel.diag(X_query, X_obs) - np.einsum("ij,ij->j", V[:, :m], V[:, m:])
    if values is None:
        innovation = beta * np.sqrt(var_o)
    else:
        innovation = np.asarray(values, dtype=float) - mu_o
    denom = var_o + post.data.noise_variance + post.jitter
    gain = np.divide(cross, denom, out=np.zeros_like(cross), where=denom > 0)
    mu_aux = mu_q + gain * innovation
    var_aux = np.maximum(var_q - gain * cross, 0.0)
    return mu_aux - beta * np.sqrt(var_aux)

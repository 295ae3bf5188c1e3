"""The bundle of J+1 posteriors SafeOpt reasons about.

GP index 0 models the objective ``f``; indices ``1..J`` model the constraints
``g_j``, which are considered safe where their lower bound is ``>= j_min``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .gp import ConfidenceBand, GpData, KernelSpec, fit, virtual_lower_bounds


@dataclass(frozen=True)
class GpConfig:
    kernel: KernelSpec
    noise_variance: float = 1e-6
    prior_mean: float = 0.0


@dataclass(frozen=True)
class ModelConfig:
    gps: tuple
    beta: float = 2.0
    j_min: float = 0.0
    # None -> every GP index (objective included)
    width_indices: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "gps", tuple(self.gps))
        if len(self.gps) < 2:
            raise ValueError("need an objective GP and at least one constraint GP")
        dims = {g.kernel.dim for g in self.gps}
        if len(dims) != 1:
            raise ValueError("all GPs must share the input dimension")
        ConfidenceBand(self.beta)

    @property
    def dim(self):
        return self.gps[0].kernel.dim

    def build(self, X, Y):
        """Fit every GP on inputs ``X`` (R, n) and outputs ``Y`` (R, J+1)."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        Y = np.asarray(Y, dtype=float).reshape(len(X), len(self.gps))
        posts = tuple(
            fit(g.kernel, GpData(X, Y[:, i], g.noise_variance, g.prior_mean))
            for i, g in enumerate(self.gps)
        )
        return SafeOptModel(posts, ConfidenceBand(self.beta), self.j_min, self.width_indices)


@dataclass(frozen=True, eq=False)
class SafeOptModel:
    posteriors: tuple
    band: ConfidenceBand
    j_min: float
    width_indices: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "posteriors", tuple(self.posteriors))
        if len(self.posteriors) < 2:
            raise ValueError("need J >= 1 constraint posteriors")
        if len({p.dim for p in self.posteriors}) != 1:
            raise ValueError("all posteriors must share the input dimension")
        wi = self.width_indices
        wi = tuple(range(len(self.posteriors))) if wi is None else tuple(sorted(set(wi)))
        if not wi or min(wi) < 0 or max(wi) >= len(self.posteriors):
            raise ValueError(f"bad width_indices {wi}")
        object.__setattr__(self, "width_indices", wi)

    @property
    def n_constraints(self):
        return len(self.posteriors) - 1

    @property
    def dim(self):
        return self.posteriors[0].dim

    @property
    def beta(self):
        return self.band.beta

    @property
    def inputs(self):
        return self.posteriors[0].data.inputs

    def bounds(self, X, indices=None):
        """Lower and upper bounds, each shaped ``(len(indices), m)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = range(len(self.posteriors)) if indices is None else indices
        lo = np.empty((len(idx), len(X)))
        hi = np.empty_like(lo)
        for row, i in enumerate(idx):
            mean, var, _ = self.posteriors[i].predict_full(X)
            half = self.beta * np.sqrt(var)
            lo[row] = mean - half
            hi[row] = mean + half
        return lo, hi

    def constraint_lower(self, X):
        """``min_j l(x, j)`` over the constraints, shape ``(m,)``."""
        lo, _ = self.bounds(X, range(1, len(self.posteriors)))
        return lo.min(axis=0)

    def safe_mask(self, X):
        return self.constraint_lower(X) >= self.j_min

    def virtual_constraint_lower(self, X_obs, X_query):
        """``min_j`` of the auxiliary lower bound at ``X_query[i]`` after observing
        ``u(X_obs[i], j)`` at ``X_obs[i]``, for each constraint GP ``j``."""
        out = None
        for p in self.posteriors[1:]:
            lo = virtual_lower_bounds(p, self.beta, X_obs, X_query)
            out = lo if out is None else np.minimum(out, lo)
        return out

    def pair_bounds(self, X, Xp):
        """Bounds at the rows of ``X`` and ``Xp`` plus the virtual constraint bound.

        Returns ``(lo, hi, aux)``: ``lo``/``hi`` shaped ``(J+1, 2m)`` for the
        stacked points ``[X; Xp]`` and ``aux`` equal to
        ``virtual_constraint_lower(X, Xp)``, all from one prediction per GP.
        """
        n_gp = len(self.posteriors)
        lo = np.empty((n_gp, 2 * len(np.atleast_2d(X))))
        hi = np.empty_like(lo)
        aux = None
        for i, p in enumerate(self.posteriors):
            mean, var, a = p.pair_predict(X, Xp, self.beta)
            half = self.beta * np.sqrt(var)
            lo[i] = mean - half
            hi[i] = mean + half
            if i:
                aux = a if aux is None else np.minimum(aux, a)
        return lo, hi, aux

    def observe(self, x, values):
        """Model refit with one more real observation of all J+1 outputs."""
        values = np.asarray(values, dtype=float).reshape(len(self.posteriors))
        posts = tuple(p.with_observation(x, v) for p, v in zip(self.posteriors, values))
        return SafeOptModel(posts, self.band, self.j_min, self.width_indices)


class Source(enum.Enum):
    MAXIMIZER = "Maximizer"
    EXPANDER = "Expander"


@dataclass(frozen=True, eq=False)
class Recommendation:
    point: np.ndarray
    source: Source
    driving_index: int
    width: float
    # lower and upper bounds of every GP at ``point``, each of length J+1
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if not self.width >= 0:
            raise ValueError("width must be nonnegative")

    @property
    def bounds_at_point(self):
        return tuple(zip(self.lower.tolist(), self.upper.tolist()))


def recommendation_at(model, x, source):
    """Recommendation for ``x`` with the driving width over ``model.width_indices``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    lo, hi = model.bounds(x[None])
    lo, hi = lo[:, 0], hi[:, 0]
    w = (hi - lo)[list(model.width_indices)]
    j = int(np.argmax(w))
    return Recommendation(
        x, source, model.width_indices[j], float(max(w[j], 0.0)), lo, hi
    )

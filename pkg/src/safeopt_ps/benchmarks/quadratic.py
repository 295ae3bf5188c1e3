"""Concave quadratic objective on a non-convex feasible set.

    maximise  -(x + 1)^2 - (y + 0.5)^2
    s.t.      g1 = 2 - (x + 0.5)^2 - (y - 0.3)^2 >= 0     (inside a disc)
              g2 = (x + 1)^2 + (y + 0.5)^2 - 0.2  >= 0     (outside a disc)

The unconstrained maximiser (-1, -0.5) is cut out by ``g2``, so every
constrained maximiser sits on the circle of radius sqrt(0.2) around it, where
the objective equals -0.2.
"""

from dataclasses import dataclass

import numpy as np

LOWER = np.array([-2.0, -1.2])
UPPER = np.array([1.0, 1.8])

# Hand-picked points well inside the feasible set, up and to the right of
# the excluded disc.
DEFAULT_SAFE_SET = np.array([
    [-0.3, 0.2],
    [0.0, 0.3],
    [-0.2, 0.6],
])


def quad_objective(x):
    x = np.asarray(x, dtype=float)
    return -(x[..., 0] + 1.0) ** 2 - (x[..., 1] + 0.5) ** 2


def quad_constraints(x):
    x = np.asarray(x, dtype=float)
    g1 = 2.0 - (x[..., 0] + 0.5) ** 2 - (x[..., 1] - 0.3) ** 2
    g2 = (x[..., 0] + 1.0) ** 2 + (x[..., 1] + 0.5) ** 2 - 0.2
    return g1, g2


def is_feasible(x):
    g1, g2 = quad_constraints(x)
    return (g1 >= 0) & (g2 >= 0)


@dataclass
class FeasibilityReport:
    checked: int
    violations: int
    worst_margin: float
    violating_points: list


def true_feasibility_audit(points):
    """Noise-free constraint check of recommended points.

    ``points`` is an ``(m, 2)`` array or anything with a ``points`` attribute
    (a run trace).  ``worst_margin`` is the smallest ``min(g1, g2)`` seen
    (``inf`` for an empty input).
    """
    P = getattr(points, "points", points)
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    if len(P) == 0:
        return FeasibilityReport(0, 0, float("inf"), [])
    g1, g2 = quad_constraints(P)
    margin = np.minimum(g1, g2)
    bad = margin < 0
    return FeasibilityReport(
        len(P), int(bad.sum()), float(margin.min()), P[bad].tolist()
    )


@dataclass
class QuadraticProblem:
    """Oracle returning ``[f, g1, g2]``, optionally with Gaussian noise."""

    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        self._rng = np.random.default_rng(self.seed)

    lower = LOWER
    upper = UPPER

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        g1, g2 = quad_constraints(x)
        out = np.array([quad_objective(x), g1, g2], dtype=float)
        if self.noise_std > 0:
            out = out + self._rng.normal(0.0, self.noise_std, size=3)
        return out

    __call__ = evaluate


def initial_safe_set(seed=None, jitter=0.05, margin=0.2):
    """The default safe points, optionally jittered with a seeded RNG.

    Jittered points are redrawn until both constraints hold with ``margin``.
    """
    if seed is None:
        return DEFAULT_SAFE_SET.copy()
    rng = np.random.default_rng(seed)
    out = []
    for p in DEFAULT_SAFE_SET:
        while True:
            q = p + rng.uniform(-jitter, jitter, size=2)
            g1, g2 = quad_constraints(q)
            if min(g1, g2) >= margin:
                out.append(q)
                break
    return np.array(out)

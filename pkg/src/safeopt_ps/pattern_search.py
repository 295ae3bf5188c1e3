"""Generalized pattern search (maximisation) with an extreme barrier.

Each iteration polls every mesh neighbour ``x + delta * d`` of the incumbent,
in pattern order.  Candidates outside the box or violating a hard constraint
(``c(x) < 0``) get the barrier value ``-inf`` and are never accepted.  If the
best candidate strictly beats the incumbent the search moves there and doubles
the mesh; otherwise it halves the mesh.  It stops once ``delta <= tolerance``
or the evaluation budget is spent.

Because the poll is complete and ties go to the lowest pattern index, results
do not depend on the order in which candidates are evaluated.
"""

import enum
import functools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

EXPANSION = 2.0
CONTRACTION = 0.5


class Status(enum.Enum):
    MESH_CONVERGED = "MeshConverged"
    EVAL_BUDGET = "EvalBudget"
    INFEASIBLE_START = "InfeasibleStart"


@dataclass(frozen=True, eq=False)
class Pattern:
    """Ordered poll directions, one per row.  Order fixes the poll order."""

    directions: np.ndarray

    def __post_init__(self):
        D = np.array(self.directions, dtype=float, ndmin=2)
        if not np.array_equal(D, np.round(D)):
            raise ValueError("pattern directions must have integer coordinates")
        if not positively_spans(D):
            raise ValueError("pattern directions do not positively span R^n")
        D.setflags(write=False)
        object.__setattr__(self, "directions", D)

    @property
    def dim(self):
        return self.directions.shape[1]

    def __len__(self):
        return self.directions.shape[0]

    @classmethod
    def coordinate(cls, n):
        """``+e_1, -e_1, +e_2, -e_2, ...`` (2n directions)."""
        eye = np.eye(n)
        return cls(np.stack([eye, -eye], axis=1).reshape(2 * n, n))

    @classmethod
    def minimal(cls, n):
        """``e_1, ..., e_n, -(e_1 + ... + e_n)`` (n + 1 directions)."""
        return cls(np.vstack([np.eye(n), -np.ones((1, n))]))

    @classmethod
    def three_direction(cls):
        """The 2-D pattern ``[0, 1], [1, 0], [-1, -1]``."""
        return cls(np.array([[0, 1], [1, 0], [-1, -1]]))

    @classmethod
    @functools.lru_cache(maxsize=64)
    def named(cls, name, n):
        if name == "coordinate":
            return cls.coordinate(n)
        if name == "minimal":
            return cls.minimal(n)
        if name == "three_direction":
            if n != 2:
                raise ValueError("the three-direction pattern is two-dimensional")
            return cls.three_direction()
        raise ValueError(f"unknown pattern {name!r}")


def positively_spans(D):
    """True iff the rows of ``D`` positively span R^n.

    Equivalent to: rank n, and ``sum_i lam_i d_i = 0`` has a solution with
    every ``lam_i >= 1``.
    """
    D = np.asarray(D, dtype=float)
    p, n = D.shape
    if p <= n or np.linalg.matrix_rank(D) < n:
        return False
    res = linprog(
        np.zeros(p), A_eq=D.T, b_eq=np.zeros(n), bounds=[(1, None)] * p,
        method="highs",
    )
    return res.status == 0


@dataclass(frozen=True)
class MeshState:
    incumbent: np.ndarray
    mesh_size: float
    incumbent_value: float
    # mesh_size == initial_mesh * 2**exponent
    exponent: int = 0

    def __post_init__(self):
        if not self.mesh_size > 0:
            raise ValueError("mesh_size must be positive")


@dataclass(frozen=True)
class PsConfig:
    initial_mesh: float = 1.0
    mesh_tolerance: float = 1e-6
    max_evaluations: int = 20_000
    multistart_count: int = 0

    def __post_init__(self):
        if not self.initial_mesh > 0:
            raise ValueError("initial_mesh must be positive")
        if not 0 < self.mesh_tolerance < self.initial_mesh:
            raise ValueError("need 0 < mesh_tolerance < initial_mesh")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")
        if self.multistart_count < 0:
            raise ValueError("multistart_count must be nonnegative")

    @property
    def expansion_factor(self):
        return EXPANSION

    @property
    def contraction_factor(self):
        return CONTRACTION


@dataclass(eq=False)
class PsProblem:
    """Maximise ``objective`` subject to ``c(x) >= 0`` for each hard constraint.

    With ``vectorized=True`` every oracle receives an ``(m, n)`` array and
    returns ``m`` values; otherwise one point at a time.

    ``joint``, if given, replaces both: it maps an ``(m, n)`` array to
    ``(values, C)`` with ``C`` of shape ``(m, c)`` holding every constraint,
    so callers can share work between objective and constraints.  Entries of
    ``values`` at infeasible rows are ignored.
    """

    objective: Callable = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    hard_constraints: Sequence[Callable] = ()
    vectorized: bool = False
    joint: Callable = None
    evaluations: int = field(default=0, init=False)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or not np.all(self.lower < self.upper):
            raise ValueError("box needs lower < upper componentwise")
        if (self.objective is None) == (self.joint is None):
            raise ValueError("give exactly one of objective and joint")

    @property
    def dim(self):
        return self.lower.shape[0]

    def _call(self, fn, X):
        if self.vectorized:
            return np.asarray(fn(X), dtype=float).reshape(len(X))
        return np.array([float(fn(x)) for x in X])

    def _in_box(self, X):
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def feasible(self, X):
        X = np.atleast_2d(X)
        ok = self._in_box(X)
        if self.joint is not None:
            if ok.any():
                _, C = self.joint(X[ok])
                ok[ok] = np.all(np.asarray(C).reshape(ok.sum(), -1) >= 0, axis=1)
            return ok
        for c in self.hard_constraints:
            if not ok.any():
                break
            vals = np.full(len(X), -np.inf)
            vals[ok] = self._call(c, X[ok])
            ok &= vals >= 0
        return ok

    def evaluate(self, X):
        """Barrier values: objective where feasible, ``-inf`` elsewhere."""
        X = np.atleast_2d(X)
        out = np.full(len(X), -np.inf)
        if self.joint is not None:
            box = self._in_box(X)
            if box.any():
                vals, C = self.joint(X[box])
                C = np.asarray(C).reshape(box.sum(), -1)
                good = np.all(C >= 0, axis=1)
                vals = np.asarray(vals, dtype=float).reshape(-1)
                vals = np.where(good & ~np.isnan(vals), vals, -np.inf)
                out[box] = vals
                self.evaluations += int(box.sum())
            return out
        ok = self.feasible(X)
        if ok.any():
            vals = self._call(self.objective, X[ok])
            out[ok] = np.where(np.isnan(vals), -np.inf, vals)
            self.evaluations += int(ok.sum())
        return out


@dataclass
class PsResult:
    best_point: np.ndarray
    best_value: float
    final_mesh: float
    evaluations: int
    status: Status
    iterations: int = 0
    # accepted objective values and the mesh size after each poll
    value_history: list = field(default_factory=list, repr=False)
    mesh_history: list = field(default_factory=list, repr=False)
    start_index: int = 0


def poll_points(state, pattern):
    return state.incumbent[None, :] + state.mesh_size * pattern.directions


def poll_step(problem, state, pattern):
    """One complete poll.  Returns ``(new_state, moved)``."""
    cand = poll_points(state, pattern)
    vals = problem.evaluate(cand)
    best = int(np.argmax(vals))  # first index among ties
    if vals[best] > state.incumbent_value:
        new = MeshState(
            cand[best], state.mesh_size * EXPANSION, float(vals[best]),
            state.exponent + 1,
        )
        return new, True
    new = MeshState(
        state.incumbent, state.mesh_size * CONTRACTION, state.incumbent_value,
        state.exponent - 1,
    )
    return new, False


def _single(problem, start, config, pattern):
    start = np.asarray(start, dtype=float).copy()
    used0 = problem.evaluations
    v0 = problem.evaluate(start)[0]
    if v0 == -np.inf:
        return PsResult(start, -np.inf, config.initial_mesh,
                        problem.evaluations - used0, Status.INFEASIBLE_START)
    state = MeshState(start, config.initial_mesh, float(v0))
    res = PsResult(start, float(v0), config.initial_mesh, 0, Status.MESH_CONVERGED)
    res.value_history.append(float(v0))
    res.mesh_history.append(config.initial_mesh)
    while state.mesh_size > config.mesh_tolerance:
        if problem.evaluations - used0 >= config.max_evaluations:
            res.status = Status.EVAL_BUDGET
            break
        state, moved = poll_step(problem, state, pattern)
        res.iterations += 1
        res.value_history.append(state.incumbent_value)
        res.mesh_history.append(state.mesh_size)
    res.best_point = state.incumbent
    res.best_value = state.incumbent_value
    res.final_mesh = state.mesh_size
    res.evaluations = problem.evaluations - used0
    return res


def maximize(problem, start, config, pattern, starts=()):
    """Pattern search from ``start`` and up to ``multistart_count`` of ``starts``.

    Returns the best feasible run (earliest on ties).  The status is
    ``INFEASIBLE_START`` only when every start is infeasible.
    """
    if pattern.dim != problem.dim:
        raise ValueError("pattern and problem dimensions differ")
    runs = [start] + list(starts)[: config.multistart_count]
    best = None
    total = 0
    for i, s in enumerate(runs):
        r = _single(problem, s, config, pattern)
        r.start_index = i
        total += r.evaluations
        if best is None or (
            r.status is not Status.INFEASIBLE_START
            and (best.status is Status.INFEASIBLE_START or r.best_value > best.best_value)
        ):
            best = r
    best.evaluations = total
    return best

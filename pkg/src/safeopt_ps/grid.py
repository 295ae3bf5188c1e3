"""Classic SafeOpt on a finite grid.

Every set is computed exhaustively, which makes this module the reference the
continuous reformulation is checked against.  Index sets are sorted ``int``
arrays into ``Grid.points``; ties are broken by grid order, then GP index.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCandidates, SafeSetEmpty
from .gp import with_virtual_observation
from .model import Recommendation, Source
from .trace import IterationRecord, RunTrace

# x' candidates evaluated per batch in the expander scan
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray
    per_axis_counts: tuple = ()

    def __post_init__(self):
        P = np.array(self.points, dtype=float, ndmin=2)
        P.setflags(write=False)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "per_axis_counts", tuple(int(c) for c in self.per_axis_counts))

    @classmethod
    def from_box(cls, lower, upper, counts):
        """Lattice with ``counts[i]`` evenly spaced values on axis ``i``, ends included.

        Points are generated in row-major order: the last axis varies fastest.
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        counts = np.broadcast_to(np.asarray(counts, dtype=int), lower.shape)
        if np.any(counts < 1) or not np.all(lower <= upper):
            raise ValueError("need counts >= 1 and lower <= upper")
        axes = [
            np.linspace(lo, hi, c) if c > 1 else np.array([lo])
            for lo, hi, c in zip(lower, upper, counts)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return cls(pts, tuple(counts.tolist()))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class IterationSets:
    safe: np.ndarray
    maximizers: np.ndarray
    expanders: np.ndarray

    @property
    def candidates(self):
        return np.union1d(self.maximizers, self.expanders)


@dataclass
class ExpanderStats:
    """Instrumentation of the expander scan."""

    aux_fits: int = 0
    bound_evals: int = 0
    certified: dict = field(default_factory=dict)


def safe_set(model, grid):
    idx = np.flatnonzero(model.safe_mask(grid.points))
    if idx.size == 0:
        raise SafeSetEmpty("no grid point satisfies every constraint lower bound")
    return idx


def maximizers(model, grid, safe):
    lo, hi = model.bounds(grid.points[safe], [0])
    return safe[hi[0] >= lo[0].max()]


def expanders(model, grid, safe, stats=None, short_circuit=True):
    """Safe points whose optimistic virtual observation certifies an unsafe grid point.

    For every ``xbar`` in ``safe`` each constraint GP is refit with the extra
    datum ``(xbar, u(xbar, j))``; ``xbar`` is an expander iff some grid point
    outside ``safe`` then has every auxiliary lower bound ``>= j_min``.
    """
    stats = ExpanderStats() if stats is None else stats
    outside = np.setdiff1d(np.arange(len(grid)), safe)
    if outside.size == 0 or safe.size == 0:
        return np.zeros(0, dtype=int)
    X_out = grid.points[outside]
    X_safe = grid.points[safe]
    lo, hi = model.bounds(X_safe)
    order = np.argsort(-(hi - lo).max(axis=0), kind="stable")
    found = []
    for pos in order:
        xbar = X_safe[pos]
        aux = [
            with_virtual_observation(p, xbar, float(hi[j + 1, pos]))
            for j, p in enumerate(model.posteriors[1:])
        ]
        stats.aux_fits += 1
        step = _CHUNK if short_circuit else len(X_out)
        for start in range(0, len(X_out), step):
            chunk = X_out[start:start + step]
            ok = np.ones(len(chunk), dtype=bool)
            for a in aux:
                ok &= a.bounds(chunk, model.band)[0] >= model.j_min
            stats.bound_evals += len(chunk)
            if ok.any():
                found.append(safe[pos])
                stats.certified[int(safe[pos])] = int(outside[start + np.argmax(ok)])
                break
    return np.array(sorted(found), dtype=int)


def iteration_sets(model, grid, stats=None):
    s = safe_set(model, grid)
    return IterationSets(s, maximizers(model, grid, s), expanders(model, grid, s, stats))


def recommend(model, grid, sets):
    cand = sets.candidates
    if cand.size == 0:
        raise NoCandidates("maximizer and expander sets are both empty")
    lo, hi = model.bounds(grid.points[cand])
    wi = list(model.width_indices)
    w = (hi - lo)[wi]
    # flat argmax over (point, index) in point-major order gives the tie rule
    flat = int(np.argmax(w.T.reshape(-1)))
    p, j = divmod(flat, len(wi))
    g = cand[p]
    source = Source.MAXIMIZER if g in set(sets.maximizers.tolist()) else Source.EXPANDER
    return Recommendation(
        grid.points[g].copy(), source, wi[j], float(max(w[j, p], 0.0)),
        lo[:, p].copy(), hi[:, p].copy(),
    )


def best_estimate(model, grid, safe):
    lo, _ = model.bounds(grid.points[safe], [0])
    i = int(np.argmax(lo[0]))
    return grid.points[safe[i]].copy(), float(lo[0, i])


def grid_step(model, grid, oracles, stats=None):
    """One SafeOpt iteration: recommend, query all J+1 oracles, refit."""
    sets = iteration_sets(model, grid, stats)
    rec = recommend(model, grid, sets)
    values = np.asarray(oracles(rec.point), dtype=float)
    return rec, model.observe(rec.point, values)


@dataclass
class GridRunResult:
    best_point: np.ndarray
    best_lower: float
    trace: RunTrace
    model: object
    stats: ExpanderStats


def run_grid(oracle, X0, model_config, grid, iterations, Y0=None, on_iteration=None,
             trace=None):
    """Grid SafeOpt for a fixed number of iterations.

    The trace uses the same schema as the reformulated run; ``l_star`` holds
    the grid best-estimate bound and only ``ms_select`` is timed.
    """
    X0 = np.asarray(X0, dtype=float).reshape(-1, grid.dim)
    if Y0 is None:
        Y0 = np.array([np.asarray(oracle(x), dtype=float) for x in X0])
    model = model_config.build(X0, Y0)
    if trace is None:
        trace = RunTrace(grid.dim, len(model.posteriors))
    stats = ExpanderStats()
    prev = None
    for n in range(1, iterations + 1):
        t0 = time.perf_counter()
        sets = iteration_sets(model, grid, stats)
        rec = recommend(model, grid, sets)
        _, l_best = best_estimate(model, grid, sets.safe)
        ms = 1e3 * (time.perf_counter() - t0)
        y = np.asarray(oracle(rec.point), dtype=float).reshape(len(model.posteriors))
        r = IterationRecord(
            n, rec.point, rec.source.value, rec.driving_index, rec.width, l_best, y,
            ms_select=ms, safety_margin=float(rec.lower[1:].min() - model.j_min),
        )
        if prev is not None:
            r.dx = float(np.linalg.norm(rec.point - prev.point))
            r.df = float(abs(y[0] - prev.observation[0]))
        r.stop = n == iterations
        model = model.observe(rec.point, y)
        trace.append(r)
        if on_iteration is not None:
            on_iteration(r)
        prev = r
    safe = safe_set(model, grid)
    x, l_best = best_estimate(model, grid, safe)
    return GridRunResult(x, l_best, trace, model, stats)

"""SafeOpt point selection as continuous constrained problems.

Per iteration:

* ``l*``: maximise the objective lower bound ``l(x, 0)`` over the model safe
  set ``{x : l(x, j) >= j_min for all constraints j}``.
* ``P1^k`` (maximizers): maximise the width ``w(x, k)`` over safe ``x`` with
  ``u(x, 0) >= l*``.
* ``P2^k`` (expanders): maximise over pairs ``(x, x')`` with ``x`` safe and
  ``x'`` outside the safe set the penalised width
  ``w(x, k) - sigma * max(0, j_min - min_s l_aux(x', s))``, where ``l_aux`` is
  the lower bound after a virtual observation of ``u(x, s)`` at ``x``.

By default the subproblems are solved by :mod:`pattern_search` in
coordinates scaled to the unit cube, so a single initial mesh suits boxes with
unequal side lengths; ``unit_scaling=False`` searches in raw coordinates.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NoOutsideStart, SafeSetEmpty
from .model import Recommendation, Source
from .pattern_search import Pattern, PsConfig, PsProblem, Status, maximize
from .trace import IterationRecord, RunTrace

STOP_RULES = ("or", "and")
PENALTY_SIGNS = ("corrected", "printed")


@dataclass(frozen=True)
class ReformConfig:
    eps_x: float = 1e-3
    eps_f: float = 1e-3
    max_iterations: int = 30
    penalty_weight: float = 1.0
    expander_validity_tol: float = 1e-6
    subproblem: PsConfig = field(
        default_factory=lambda: PsConfig(
            initial_mesh=0.25, mesh_tolerance=1e-4, max_evaluations=4000,
            multistart_count=4,
        )
    )
    pattern: str = "coordinate"
    strict_margin: float = 1e-9
    stop_rule: str = "or"
    penalty_sign: str = "corrected"
    probes_per_face: int = 16
    # random box samples screened for extra safe starts (0 disables)
    screen_samples: int = 256
    seed: int = 0
    # with the literal "and" stop rule, give up after this many times M
    hard_cap_factor: int = 10
    unit_scaling: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if self.eps_x < 0 or self.eps_f < 0 or self.expander_validity_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.strict_margin < 0:
            raise ValueError("strict_margin must be nonnegative")
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"stop_rule must be one of {STOP_RULES}")
        if self.penalty_sign not in PENALTY_SIGNS:
            raise ValueError(f"penalty_sign must be one of {PENALTY_SIGNS}")
        if self.probes_per_face < 1 or self.screen_samples < 0:
            raise ValueError("probes_per_face >= 1 and screen_samples >= 0 required")


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def span(self):
        return self.upper - self.lower

    def to_unit(self, X):
        return (np.asarray(X, dtype=float) - self.lower) / self.span

    def from_unit(self, U):
        # clip guards against round-off pushing a unit-cube corner past the box
        return np.clip(self.lower + np.asarray(U, dtype=float) * self.span, self.lower, self.upper)


class _Frame:
    """Coordinates the pattern search works in: the unit cube or the raw box."""

    def __init__(self, box, unit):
        self.box = box
        self.unit = unit
        self.dim = box.dim
        self.lower = np.zeros(box.dim) if unit else box.lower
        self.upper = np.ones(box.dim) if unit else box.upper

    def to_search(self, X):
        return self.box.to_unit(X) if self.unit else np.asarray(X, dtype=float)

    def from_search(self, U):
        return self.box.from_unit(U) if self.unit else np.asarray(U, dtype=float)


@dataclass(frozen=True, eq=False)
class SubproblemSolution:
    point: np.ndarray
    gp_index: int
    value: float
    width: float
    lower: np.ndarray
    upper: np.ndarray
    violation: float = 0.0
    x_prime: np.ndarray = None
    status: Status = Status.MESH_CONVERGED
    evaluations: int = 0

    def __post_init__(self):
        if not self.violation >= 0:
            raise ValueError("violation must be nonnegative")


def _safety(model, lo):
    """``min_j l(x, j) - j_min`` from a stacked lower-bound array."""
    return lo[1:].min(axis=0) - model.j_min


def _pattern(cfg, n):
    return Pattern.named(cfg.pattern, n)


def _solution(model, x, k, value, **kw):
    lo, hi = model.bounds(x[None])
    w = float(max(hi[k, 0] - lo[k, 0], 0.0))
    return SubproblemSolution(x, k, float(value), w, lo[:, 0], hi[:, 0], **kw)


def solve_lstar(model, box, cfg, start, starts=()):
    """``(point, l*)``: best objective lower bound over the model safe set."""
    fr = _Frame(box, cfg.unit_scaling)

    def joint(U):
        lo, _ = model.bounds(fr.from_search(U))
        return lo[0], _safety(model, lo)[:, None]

    problem = PsProblem(lower=fr.lower, upper=fr.upper, joint=joint)
    res = maximize(
        problem, fr.to_search(start), cfg.subproblem, _pattern(cfg, box.dim),
        [fr.to_search(s) for s in starts],
    )
    if res.status is Status.INFEASIBLE_START:
        raise SafeSetEmpty("no start point lies in the model safe set")
    return fr.from_search(res.best_point), float(res.best_value)


def solve_p1k(model, k, l_star, box, cfg, start, starts=()):
    """Widest point of GP ``k`` among safe points that may still beat ``l*``."""
    fr = _Frame(box, cfg.unit_scaling)
    slack = 1e-9 * (1.0 + abs(l_star))

    def joint(U):
        lo, hi = model.bounds(fr.from_search(U))
        C = np.stack([_safety(model, lo), hi[0] - l_star + slack], axis=1)
        return hi[k] - lo[k], C

    problem = PsProblem(lower=fr.lower, upper=fr.upper, joint=joint)
    res = maximize(
        problem, fr.to_search(start), cfg.subproblem, _pattern(cfg, box.dim),
        [fr.to_search(s) for s in starts],
    )
    if res.status is Status.INFEASIBLE_START:
        x = np.asarray(start, dtype=float)
        sol = _solution(model, x, k, 0.0, status=res.status)
        return SubproblemSolution(
            x, k, sol.width, sol.width, sol.lower, sol.upper, status=res.status,
        )
    x = fr.from_search(res.best_point)
    return _solution(model, x, k, res.best_value, status=res.status, evaluations=res.evaluations)


def select_x1(solutions):
    """Largest subproblem value; the earliest solution wins ties."""
    if not solutions:
        raise ValueError("no subproblem solutions")
    best = solutions[0]
    for s in solutions[1:]:
        if s.value > best.value:
            best = s
    return best


def _violation(model, X, Xp):
    return np.maximum(0.0, model.j_min - model.virtual_constraint_lower(X, Xp))


def _q(width, violation, cfg):
    if cfg.penalty_sign == "printed":
        return width + cfg.penalty_weight * violation
    return width - cfg.penalty_weight * violation


def expander_penalty(model, k, x, x_prime, cfg):
    """``(q_k, violation)`` for one pair of points."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    xp = np.asarray(x_prime, dtype=float).reshape(1, -1)
    lo, hi = model.bounds(x, [k])
    v = float(_violation(model, x, xp)[0])
    return float(_q(hi[0, 0] - lo[0, 0], v, cfg)), v


def outside_probe(model, x, box, cfg):
    """First point outside the model safe set along axis rays from ``x``.

    Rays run from ``x`` toward each of the 2n box faces (lower face of axis 0,
    upper face of axis 0, lower face of axis 1, ...).  Probes are ordered by
    increasing fraction of the distance to the face, then by face, so the
    nearest unsafe probe is returned.  ``None`` if every probe is safe.
    """
    x = np.asarray(x, dtype=float)
    n = box.dim
    P = cfg.probes_per_face
    fr = np.arange(1, P + 1) / P
    probes = []
    for f in fr:
        for i in range(n):
            for face in (box.lower[i], box.upper[i]):
                p = x.copy()
                p[i] = x[i] + f * (face - x[i])
                probes.append(p)
    probes = np.array(probes)
    bad = _safety(model, model.bounds(probes)[0]) <= -cfg.strict_margin
    if not bad.any():
        return None
    return probes[int(np.argmax(bad))]


def solve_p2k(model, k, box, cfg, starts):
    """Penalised expander problem over the joint variable ``(x, x')``.

    ``starts`` are safe points for ``x``; each is paired with the nearest
    outside probe.  Raises :class:`NoOutsideStart` if no start has one.
    """
    fr = _Frame(box, cfg.unit_scaling)
    n = box.dim
    pairs = []
    for s in starts:
        xp = outside_probe(model, s, box, cfg)
        if xp is not None:
            pairs.append(np.concatenate([fr.to_search(s), fr.to_search(xp)]))
    if not pairs:
        raise NoOutsideStart("no probe outside the model safe set")

    def joint(U):
        m = len(U)
        X = fr.from_search(U[:, :n])
        Xp = fr.from_search(U[:, n:])
        lo, hi, aux = model.pair_bounds(X, Xp)
        safe = _safety(model, lo)
        C = np.stack([safe[:m], -cfg.strict_margin - safe[m:]], axis=1)
        v = np.maximum(0.0, model.j_min - aux)
        return _q(hi[k, :m] - lo[k, :m], v, cfg), C

    problem = PsProblem(
        lower=np.tile(fr.lower, 2), upper=np.tile(fr.upper, 2), joint=joint,
    )
    res = maximize(problem, pairs[0], cfg.subproblem, _pattern(cfg, 2 * n), pairs[1:])
    X, Xp = fr.from_search(res.best_point[:n]), fr.from_search(res.best_point[n:])
    v = float(_violation(model, X[None], Xp[None])[0])
    return _solution(
        model, X, k, res.best_value, violation=v, x_prime=Xp,
        status=res.status, evaluations=res.evaluations,
    )


def select_x2(solutions, cfg):
    """Widest certified expander; if none is certified, the best penalised value."""
    if not solutions:
        return None
    valid = [s for s in solutions if s.violation <= cfg.expander_validity_tol]
    if valid:
        best = valid[0]
        for s in valid[1:]:
            if s.width > best.width:
                best = s
        return best
    return select_x1(solutions)


def _as_rec(sol, source):
    return Recommendation(
        sol.point.copy(), source, sol.gp_index, sol.width, sol.lower.copy(), sol.upper.copy()
    )


def select_next(x1, x2, cfg):
    if x2 is None or x2.violation > cfg.expander_validity_tol:
        return _as_rec(x1, Source.MAXIMIZER)
    if x2.width > x1.width:
        return _as_rec(x2, Source.EXPANDER)
    return _as_rec(x1, Source.MAXIMIZER)


# --------------------------------------------------------------------------
# outer loop
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    best_point: np.ndarray
    best_lower: float
    trace: RunTrace
    model: object
    stopped_by: str = ""


@dataclass
class SelectionDetail:
    recommendation: Recommendation
    lstar_point: np.ndarray
    l_star: float
    maximizers: list
    expanders: list
    ms_lstar: float
    ms_p1: float
    ms_p2: float


def _ranked_starts(cands, width_row, first, limit):
    """``first`` followed by ``cands`` sorted by decreasing width (stable)."""
    order = np.argsort(-width_row, kind="stable")
    out = [first]
    for i in order[:limit]:
        if not np.array_equal(cands[i], first):
            out.append(cands[i])
    return out


def select(model, box, cfg, rng=None, recent=()):
    """One full selection step on a fitted model (no oracle query)."""
    X = np.asarray(model.inputs)
    cand = [X]
    if cfg.screen_samples and rng is not None:
        cand.append(box.lower + rng.random((cfg.screen_samples, box.dim)) * box.span)
    if len(recent):
        cand.append(np.asarray(recent, dtype=float).reshape(-1, box.dim))
    cand = np.vstack(cand)
    lo, hi = model.bounds(cand)
    safe = lo[1:].min(axis=0) >= model.j_min
    if not safe.any():
        raise SafeSetEmpty("no observed or screened point lies in the model safe set")
    cand, lo, hi = cand[safe], lo[:, safe], hi[:, safe]
    limit = cfg.subproblem.multistart_count

    t0 = time.perf_counter()
    seed_pt = cand[int(np.argmax(lo[0]))]
    ls_starts = _ranked_starts(cand, lo[0], seed_pt, limit)
    xs, l_star = solve_lstar(model, box, cfg, ls_starts[0], ls_starts[1:])
    t1 = time.perf_counter()

    width = hi - lo
    # only candidates that can still beat l* are feasible P1 starts
    live = hi[0] >= l_star - 1e-9 * (1.0 + abs(l_star))
    p1 = []
    for k in model.width_indices:
        starts = _ranked_starts(cand[live], width[k][live], xs, limit)
        p1.append(solve_p1k(model, k, l_star, box, cfg, starts[0], starts[1:]))
    t2 = time.perf_counter()

    p2 = []
    for k in model.width_indices:
        starts = _ranked_starts(cand, width[k], xs, limit)
        try:
            p2.append(solve_p2k(model, k, box, cfg, starts))
        except NoOutsideStart:
            continue
    t3 = time.perf_counter()

    rec = select_next(select_x1(p1), select_x2(p2, cfg), cfg)
    return SelectionDetail(
        rec, xs, l_star, p1, p2,
        1e3 * (t1 - t0), 1e3 * (t2 - t1), 1e3 * (t3 - t2),
    )


def run(oracle, X0, model_config, box, cfg, Y0=None, on_iteration=None, trace=None):
    """Reformulated SafeOpt from the initial safe points ``X0``.

    ``oracle(x)`` returns the J+1 values ``[f(x), g_1(x), ..., g_J(x)]``.
    Stops once ``n >= M`` or, from the second iteration on, when both the
    step ``||x_n - x_{n-1}||`` and the objective change are within tolerance
    (``stop_rule="and"`` requires both conditions, capped at
    ``hard_cap_factor * M`` iterations).  Records go into ``trace`` when
    one is passed, so a caller keeps them if the run raises.
    """
    X0 = np.asarray(X0, dtype=float).reshape(-1, box.dim)
    if len(X0) == 0:
        raise SafeSetEmpty("the initial safe set is empty")
    if Y0 is None:
        Y0 = np.array([np.asarray(oracle(x), dtype=float) for x in X0])
    model = model_config.build(X0, Y0)
    if trace is None:
        trace = RunTrace(box.dim, len(model.posteriors))
    recent = []
    prev = None
    M = cfg.max_iterations
    cap = M if cfg.stop_rule == "or" else cfg.hard_cap_factor * M
    stopped_by = "max_iterations"
    for n in range(1, cap + 1):
        rng = np.random.default_rng([cfg.seed, n])
        keep = cfg.subproblem.multistart_count
        t0 = time.perf_counter()
        sel = select(model, box, cfg, rng, recent[-keep:] if keep else ())
        ms_select = 1e3 * (time.perf_counter() - t0)
        rec = sel.recommendation
        margin = float(rec.lower[1:].min() - model.j_min)
        y = np.asarray(oracle(rec.point), dtype=float).reshape(len(model.posteriors))
        if rec.source is Source.EXPANDER:
            recent.append(rec.point)
        viol = min((s.violation for s in sel.expanders), default=float("nan"))
        r = IterationRecord(
            n, rec.point, rec.source.value, rec.driving_index, rec.width, sel.l_star, y,
            ms_select, sel.ms_lstar, sel.ms_p1, sel.ms_p2, margin, viol,
        )
        if prev is not None:
            r.dx = float(np.linalg.norm(rec.point - prev.point))
            r.df = float(abs(y[0] - prev.observation[0]))
            r.tolerances_met = r.dx <= cfg.eps_x and r.df <= cfg.eps_f
        if cfg.stop_rule == "or":
            r.stop = n >= M or r.tolerances_met
        else:
            r.stop = (n >= M and r.tolerances_met) or n >= cap
        model = model.observe(rec.point, y)
        trace.append(r)
        if on_iteration is not None:
            on_iteration(r)
        prev = r
        if r.stop:
            stopped_by = "tolerances" if r.tolerances_met else "max_iterations"
            break
    # final answer on the model including the last observation
    lo, _ = model.bounds(model.inputs)
    safe = model.safe_mask(model.inputs)
    if not safe.any():
        raise SafeSetEmpty("no observed point lies in the final model safe set")
    Xs = model.inputs[safe]
    order = np.argsort(-lo[0][safe], kind="stable")
    starts = [Xs[i] for i in order[: 1 + cfg.subproblem.multistart_count]]
    best, l_best = solve_lstar(model, box, cfg, starts[0], starts[1:])
    return RunResult(best, l_best, trace, model, stopped_by)

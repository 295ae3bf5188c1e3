"""Cascade position/speed controller tuning on a surrogate ball-screw plant.

The plant maps the control signal to the speed ``S`` through an actuator lag
followed by a damped second-order mode,

    G(s) = b / (s + a) * omega^2 / (s^2 + 2 zeta omega s + omega^2),

and the position ``P`` integrates the speed.  A proportional position loop
``S_s = K_p (P_s - P)`` commands a PI speed loop
``u = K_v e_s + K_vi * integral(e_s)``.  Plant and position integrator are
discretised exactly with a zero-order hold; the controller runs at the same
sample time.

Stability is judged from the least-squares slope ``p1`` of the speed peaks:
growing oscillations give ``p1 > 0``.  With the default parameters the four
reference safe gain sets are stable and the reference unsafe set is not.
"""

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .. import kernels
from ..errors import UnstableBlowUp

LOWER = np.array([0.0, 0.0, 0.0])
UPPER = np.array([110.0, 50.0, 50.0])

# (K_p, K_v, K_vi)
SAFE_GAINS = np.array([
    [10.0, 0.0, 5.0],
    [20.0, 0.4, 50.0],
    [42.0, 0.3, 12.0],
    [90.0, 0.5, 1.0],
])
UNSAFE_GAINS = np.array([30.0, 0.0, 5.0])
# no speed damping, strong position gain and integral action
WITNESS_GAINS = np.array([110.0, 0.0, 50.0])

SATURATION = 1e6


def _reference_ramp_hold(t):
    return np.interp(t, [0.0, 0.1, 0.5, 2.0], [0.0, 0.0, 1.0, 1.0])


def _reference_trapezoid(t):
    return np.interp(t, [0.0, 0.1, 0.6, 1.2, 1.7, 2.0], [0.0, 0.0, 1.0, 1.0, 0.0, 0.0])


def _reference_truncated_sine(t):
    return np.clip(np.sin(2.0 * np.pi * t), 0.0, 0.9)


def _reference_constant_zero(t):
    return np.zeros_like(t)


REFERENCES = {
    "ramp_hold": _reference_ramp_hold,
    "trapezoid": _reference_trapezoid,
    "truncated_sine": _reference_truncated_sine,
    "zero": _reference_constant_zero,
}


@functools.lru_cache(maxsize=32)
def _discretise(a, b, omega, zeta, dt):
    A = np.array([
        [-a, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [omega ** 2, -omega ** 2, -2.0 * zeta * omega],
    ])
    B = np.array([b, 0.0, 0.0])
    C = np.array([0.0, 1.0, 0.0])
    # append the position integrator P' = S, then the input as a constant
    n = A.shape[0]
    M = np.zeros((n + 2, n + 2))
    M[:n, :n] = A
    M[n, :n] = C
    M[:n, n + 1] = B
    E = expm(M * dt)
    Ad = np.ascontiguousarray(E[: n + 1, : n + 1])
    Bd = np.ascontiguousarray(E[: n + 1, n + 1])
    return A, B, C, Ad, Bd


@dataclass(frozen=True)
class PlantModel:
    a: float = 20.0
    b: float = 10.0
    omega: float = 1000.0
    zeta: float = 0.3
    sample_time: float = 1e-3
    t_f: float = 2.0

    def __post_init__(self):
        if not self.sample_time > 0:
            raise ValueError("sample_time must be positive")
        if not self.t_f >= 10 * self.sample_time:
            raise ValueError("t_f must cover at least 10 samples")
        if not (self.a > 0 and self.omega > 0 and self.zeta > 0):
            raise ValueError("plant poles must be stable (a, omega, zeta > 0)")

    def continuous(self):
        """``(A, B, C)`` of the speed plant (states: actuator, speed, speed rate)."""
        return _discretise(self.a, self.b, self.omega, self.zeta, self.sample_time)[:3]

    def discrete(self):
        """ZOH ``(Ad, Bd)`` of plant plus position integrator (position last)."""
        return _discretise(self.a, self.b, self.omega, self.zeta, self.sample_time)[3:]

    @property
    def n_samples(self):
        return int(round(self.t_f / self.sample_time)) + 1

    def time(self):
        return np.arange(self.n_samples) * self.sample_time


@dataclass(frozen=True)
class CascadeController:
    kp: float
    kv: float
    kvi: float

    def __post_init__(self):
        g = self.as_array()
        if np.any(g < LOWER) or np.any(g > UPPER):
            raise ValueError(f"gains {g.tolist()} outside the search box")

    def as_array(self):
        return np.array([self.kp, self.kv, self.kvi], dtype=float)

    @classmethod
    def from_array(cls, g):
        g = np.asarray(g, dtype=float).reshape(3)
        return cls(*g.tolist())


@dataclass(frozen=True)
class TuningSpec:
    gamma: float = 1000.0
    reference: str = "ramp_hold"
    stability_margin: float = 0.005

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.stability_margin > 0:
            raise ValueError("stability_margin must be positive")
        if self.reference not in REFERENCES:
            raise ValueError(f"unknown reference {self.reference!r}")


@dataclass(frozen=True, eq=False)
class SimResult:
    time: np.ndarray
    speed: np.ndarray
    position: np.ndarray
    speed_setpoint: np.ndarray
    position_setpoint: np.ndarray
    diverged: bool = False

    def __len__(self):
        return self.time.shape[0]


def simulate(plant, ctrl, spec, strict=False):
    """Closed-loop run over ``[0, t_f]`` starting at rest.

    A run whose speed leaves ``|S| <= 1e6`` (or turns non-finite) is cut at
    that sample and flagged ``diverged``.  With ``strict=True`` that case
    raises :class:`UnstableBlowUp` carrying the finite prefix instead.
    """
    Ad, Bd = plant.discrete()
    t = plant.time()
    ref = REFERENCES[spec.reference](t)
    N = len(t)
    S = np.zeros(N)
    P = np.zeros(N)
    Ss = np.zeros(N)
    c = np.array([0.0, 1.0, 0.0])
    n = kernels.cascade_loop(
        Ad, Bd, c, ref, float(ctrl.kp), float(ctrl.kv), float(ctrl.kvi),
        plant.sample_time, SATURATION, S, P, Ss,
    )
    res = SimResult(t[:n], S[:n], P[:n], Ss[:n], ref[:n], diverged=n < N)
    if res.diverged and strict:
        raise UnstableBlowUp(res)
    return res


def peak_slope(result):
    """Least-squares slope of the speed peaks (0 with fewer than two peaks)."""
    return float(kernels.peak_slope(result.time, result.speed))


def tuning_objective(result, spec):
    """``gamma * integral |P - P_s| + max S`` (trapezoidal rule)."""
    err = np.abs(result.position - result.position_setpoint)
    if len(result) < 2:
        integral = 0.0
    else:
        integral = float(np.trapezoid(err, result.time))
    peak = float(result.speed.max()) if len(result) else 0.0
    return spec.gamma * integral + peak


def stability_oracle(result, spec):
    """``stability_margin - p1``; nonnegative iff the trajectory counts as stable."""
    return spec.stability_margin - peak_slope(result)


def stability_value(p1, spec):
    return spec.stability_margin - p1


@dataclass
class PidProblem:
    """Oracle returning ``[-J, stability_margin - p1]`` for a gain triple."""

    plant: PlantModel = field(default_factory=PlantModel)
    spec: TuningSpec = field(default_factory=TuningSpec)
    noise_std: float = 0.0
    seed: int = 0

    lower = LOWER
    upper = UPPER

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        self._rng = np.random.default_rng(self.seed)

    def run(self, gains):
        return simulate(self.plant, CascadeController.from_array(gains), self.spec)

    def evaluate(self, gains):
        r = self.run(gains)
        out = np.array([-tuning_objective(r, self.spec), stability_oracle(r, self.spec)])
        if self.noise_std > 0:
            out = out + self._rng.normal(0.0, self.noise_std, size=2)
        return out

    __call__ = evaluate


def initial_safe_set(name):
    """Initial safe points of a named benchmark: ``"pid"`` or ``"quadratic"``."""
    if name == "pid":
        return SAFE_GAINS.copy()
    if name in ("quad", "quadratic"):
        from .quadratic import initial_safe_set as quad_set
        return quad_set()
    raise KeyError(f"unknown benchmark {name!r}")

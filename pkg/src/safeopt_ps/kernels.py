"""Hot numeric kernels, in a numba loop flavour and a numpy flavour.

Everything the optimisers call in their inner loops lives here:

``sqexp_cross``
    squared-exponential cross-covariance between two point sets.
``posterior_predict``
    GP predictive mean / (unclamped) variance for a batch of query points,
    plus the whitened cross-covariances ``V = L^-1 k_R(x)`` which the
    virtual-observation update reuses.
``pair_predict``
    predictions at paired points ``(x, x')`` plus the lower bound at ``x'``
    after a virtual observation of the upper bound at ``x`` (the expander
    subproblem's inner loop).
``cascade_loop``
    fixed-step simulation of the cascade position/speed loop around a
    discretised plant.
``peak_slope``
    least-squares slope through the local maxima of a trajectory.

The public names are bound to the numba versions when :data:`ENABLED`, else to
the numpy versions.  Both sets stay importable as :data:`NUMPY` and
:data:`NUMBA` for the benchmark and the cross-check tests.
"""

from types import SimpleNamespace

import numpy as np
from scipy.linalg import solve_triangular

from ._accel import ENABLED, HAVE_NUMBA, njit

# --------------------------------------------------------------------------
# numpy flavour
# --------------------------------------------------------------------------


def _sqexp_cross_np(A, B, inv_ls, sf2):
    d = (A[:, None, :] - B[None, :, :]) * inv_ls
    return sf2 * np.exp(-0.5 * np.einsum("ijk,ijk->ij", d, d))


def _predict_np(Xq, X, inv_ls, sf2, L, alpha):
    m = Xq.shape[0]
    R = X.shape[0]
    if R == 0:
        return np.zeros(m), np.full(m, sf2), np.zeros((0, m))
    Ks = _sqexp_cross_np(Xq, X, inv_ls, sf2)
    mean = Ks @ alpha
    V = solve_triangular(L, Ks.T, lower=True, check_finite=False)
    var = sf2 - np.einsum("ij,ij->j", V, V)
    return mean, var, V


def _pair_np(Xo, Xq, X, inv_ls, sf2, L, alpha, extra_noise, beta):
    m = Xo.shape[0]
    mean, var, V = _predict_np(np.vstack((Xo, Xq)), X, inv_ls, sf2, L, alpha)
    mo, mq = mean[:m], mean[m:]
    vo = np.maximum(var[:m], 0.0)
    vq = np.maximum(var[m:], 0.0)
    d = (Xq - Xo) * inv_ls
    cross = sf2 * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))
    cross = cross - np.einsum("ij,ij->j", V[:, :m], V[:, m:])
    denom = vo + extra_noise
    gain = np.divide(cross, denom, out=np.zeros_like(cross), where=denom > 0)
    aux = mq + gain * beta * np.sqrt(vo) - beta * np.sqrt(np.maximum(vq - gain * cross, 0.0))
    return mean, var, aux


def _cascade_np(Ad, Bd, c, ref, kp, kv, kvi, dt, sat, speed, pos, speed_sp):
    m = Ad.shape[0]
    x = np.zeros(m)
    integ = 0.0
    for k in range(ref.shape[0]):
        s = float(c @ x[: m - 1])
        p = float(x[m - 1])
        if not np.isfinite(s) or abs(s) > sat:
            return k
        speed[k] = s
        pos[k] = p
        s_sp = kp * (ref[k] - p)
        speed_sp[k] = s_sp
        es = s_sp - s
        integ += dt * es
        u = kv * es + kvi * integ
        x = Ad @ x + Bd * u
    return ref.shape[0]


def _peak_slope_np(t, s):
    if s.shape[0] < 3:
        return 0.0
    mid = s[1:-1]
    idx = np.flatnonzero((mid > s[:-2]) & (mid >= s[2:])) + 1
    if idx.shape[0] < 2:
        return 0.0
    tp = t[idx]
    sp = s[idx]
    tc = tp - tp.mean()
    return float(np.dot(tc, sp - sp.mean()) / np.dot(tc, tc))


# --------------------------------------------------------------------------
# loop flavour (compiled by numba when available)
# --------------------------------------------------------------------------


@njit
def _sqexp_cross_nb(A, B, inv_ls, sf2):
    m, n = A.shape
    R = B.shape[0]
    out = np.empty((m, R))
    for i in range(m):
        for r in range(R):
            acc = 0.0
            for d in range(n):
                z = (A[i, d] - B[r, d]) * inv_ls[d]
                acc += z * z
            out[i, r] = sf2 * np.exp(-0.5 * acc)
    return out


@njit
def _predict_nb(Xq, X, inv_ls, sf2, L, alpha):
    m, n = Xq.shape
    R = X.shape[0]
    mean = np.zeros(m)
    var = np.empty(m)
    V = np.zeros((R, m))
    k = np.empty(R)
    for i in range(m):
        mu = 0.0
        for r in range(R):
            acc = 0.0
            for d in range(n):
                z = (Xq[i, d] - X[r, d]) * inv_ls[d]
                acc += z * z
            k[r] = sf2 * np.exp(-0.5 * acc)
            mu += k[r] * alpha[r]
        mean[i] = mu
        ss = 0.0
        for r in range(R):
            acc = k[r]
            for j in range(r):
                acc -= L[r, j] * V[j, i]
            v = acc / L[r, r]
            V[r, i] = v
            ss += v * v
        var[i] = sf2 - ss
    return mean, var, V


@njit
def _pair_nb(Xo, Xq, X, inv_ls, sf2, L, alpha, extra_noise, beta):
    m, n = Xo.shape
    R = X.shape[0]
    mean = np.empty(2 * m)
    var = np.empty(2 * m)
    aux = np.empty(m)
    vo_w = np.empty(R)
    vq_w = np.empty(R)
    k = np.empty(R)
    for i in range(m):
        for side in range(2):
            x = Xo[i] if side == 0 else Xq[i]
            w = vo_w if side == 0 else vq_w
            mu = 0.0
            for r in range(R):
                acc = 0.0
                for d in range(n):
                    z = (x[d] - X[r, d]) * inv_ls[d]
                    acc += z * z
                k[r] = sf2 * np.exp(-0.5 * acc)
                mu += k[r] * alpha[r]
            ss = 0.0
            for r in range(R):
                acc = k[r]
                for j in range(r):
                    acc -= L[r, j] * w[j]
                v = acc / L[r, r]
                w[r] = v
                ss += v * v
            mean[i + side * m] = mu
            var[i + side * m] = sf2 - ss
        acc = 0.0
        for d in range(n):
            z = (Xq[i, d] - Xo[i, d]) * inv_ls[d]
            acc += z * z
        cross = sf2 * np.exp(-0.5 * acc)
        for r in range(R):
            cross -= vo_w[r] * vq_w[r]
        vo = max(var[i], 0.0)
        vq = max(var[i + m], 0.0)
        denom = vo + extra_noise
        gain = cross / denom if denom > 0 else 0.0
        aux[i] = (mean[i + m] + gain * beta * np.sqrt(vo)
                  - beta * np.sqrt(max(vq - gain * cross, 0.0)))
    return mean, var, aux


@njit
def _cascade_nb(Ad, Bd, c, ref, kp, kv, kvi, dt, sat, speed, pos, speed_sp):
    m = Ad.shape[0]
    x = np.zeros(m)
    xn = np.zeros(m)
    integ = 0.0
    for k in range(ref.shape[0]):
        s = 0.0
        for i in range(m - 1):
            s += c[i] * x[i]
        p = x[m - 1]
        if not np.isfinite(s) or abs(s) > sat:
            return k
        speed[k] = s
        pos[k] = p
        s_sp = kp * (ref[k] - p)
        speed_sp[k] = s_sp
        es = s_sp - s
        integ += dt * es
        u = kv * es + kvi * integ
        for i in range(m):
            acc = Bd[i] * u
            for j in range(m):
                acc += Ad[i, j] * x[j]
            xn[i] = acc
        for i in range(m):
            x[i] = xn[i]
    return ref.shape[0]


@njit
def _peak_slope_nb(t, s):
    N = s.shape[0]
    cnt = 0
    st = 0.0
    ss = 0.0
    for i in range(1, N - 1):
        if s[i] > s[i - 1] and s[i] >= s[i + 1]:
            cnt += 1
            st += t[i]
            ss += s[i]
    if cnt < 2:
        return 0.0
    tm = st / cnt
    sm = ss / cnt
    num = 0.0
    den = 0.0
    for i in range(1, N - 1):
        if s[i] > s[i - 1] and s[i] >= s[i + 1]:
            num += (t[i] - tm) * (s[i] - sm)
            den += (t[i] - tm) * (t[i] - tm)
    return num / den


# --------------------------------------------------------------------------
# binding
# --------------------------------------------------------------------------

NUMPY = SimpleNamespace(
    sqexp_cross=_sqexp_cross_np,
    posterior_predict=_predict_np,
    pair_predict=_pair_np,
    cascade_loop=_cascade_np,
    peak_slope=_peak_slope_np,
)

NUMBA = None
if HAVE_NUMBA:
    NUMBA = SimpleNamespace(
        sqexp_cross=_sqexp_cross_nb,
        posterior_predict=_predict_nb,
        pair_predict=_pair_nb,
        cascade_loop=_cascade_nb,
        peak_slope=_peak_slope_nb,
    )

_active = NUMBA if ENABLED else NUMPY

sqexp_cross = _active.sqexp_cross
posterior_predict = _active.posterior_predict
pair_predict = _active.pair_predict
cascade_loop = _active.cascade_loop
peak_slope = _active.peak_slope

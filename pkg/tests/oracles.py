"""Independent reference implementations used by the tests.

Nothing here imports the package's numeric code: the GP is a dense
direct-inversion posterior and the set definitions are straight loops.
"""

import numpy as np


def sqexp(a, b, lengthscales, sf2):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r2 = 0.0
    for ai, bi, li in zip(a, b, lengthscales):
        r2 += ((ai - bi) / li) ** 2
    return sf2 * np.exp(-0.5 * r2)


class DenseGp:
    """GP posterior from an explicit inverse of ``K + s2 I``."""

    def __init__(self, X, y, lengthscales, sf2, noise, prior_mean=0.0):
        self.X = np.asarray(X, dtype=float).reshape(len(y), len(lengthscales))
        self.y = np.asarray(y, dtype=float)
        self.ls = tuple(lengthscales)
        self.sf2 = sf2
        self.noise = noise
        self.pm = prior_mean
        R = len(self.y)
        K = np.empty((R, R))
        for i in range(R):
            for j in range(R):
                K[i, j] = sqexp(self.X[i], self.X[j], self.ls, sf2)
        self.Kinv = np.linalg.inv(K + noise * np.eye(R)) if R else np.zeros((0, 0))

    def predict(self, x):
        k = np.array([sqexp(x, xi, self.ls, self.sf2) for xi in self.X])
        if len(k) == 0:
            return self.pm, self.sf2
        mean = self.pm + k @ self.Kinv @ (self.y - self.pm)
        var = self.sf2 - k @ self.Kinv @ k
        return float(mean), float(max(var, 0.0))

    def bounds(self, x, beta):
        m, v = self.predict(x)
        return m - beta * np.sqrt(v), m + beta * np.sqrt(v)

    def appended(self, x, value):
        return DenseGp(np.vstack([self.X, np.reshape(x, (1, -1))]), np.append(self.y, value),
                       self.ls, self.sf2, self.noise, self.pm)


def dense_from_posterior(post):
    d = post.data
    return DenseGp(d.inputs, d.outputs, post.kernel.lengthscales,
                   post.kernel.signal_variance, d.noise_variance + post.jitter, d.prior_mean)


def loop_safe_set(gps, beta, j_min, points):
    out = []
    for i, x in enumerate(points):
        if all(g.bounds(x, beta)[0] >= j_min for g in gps[1:]):
            out.append(i)
    return out


def loop_maximizers(gps, beta, points, safe):
    best = max(gps[0].bounds(points[i], beta)[0] for i in safe)
    return [i for i in safe if gps[0].bounds(points[i], beta)[1] >= best]


def loop_expanders(gps, beta, j_min, points, safe):
    outside = [i for i in range(len(points)) if i not in set(safe)]
    found = []
    for i in safe:
        aux = [g.appended(points[i], g.bounds(points[i], beta)[1]) for g in gps[1:]]
        for o in outside:
            if all(a.bounds(points[o], beta)[0] >= j_min for a in aux):
                found.append(i)
                break
    return found


def peak_slope_ls(t, s):
    """Slope of the least-squares line through the strict interior local maxima."""
    tp, sp = [], []
    for i in range(1, len(s) - 1):
        if s[i] > s[i - 1] and s[i] >= s[i + 1]:
            tp.append(t[i])
            sp.append(s[i])
    if len(tp) < 2:
        return 0.0
    n = len(tp)
    mt = sum(tp) / n
    ms = sum(sp) / n
    num = sum((a - mt) * (b - ms) for a, b in zip(tp, sp))
    den = sum((a - mt) ** 2 for a in tp)
    return num / den

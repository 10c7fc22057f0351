"""Moran's I reference values on flat100.csv, both flavours.

Raw (normality): I = (n/S0) z'Wz / z'z on the centred variable, E = -1/(n-1),
variance from the standard S0/S1/S2 moments.
Residual-adjusted: for residuals of a design X with M = I - X(X'X)^-1 X',
  E[I]  = (n/S0) tr(MW) / (n-p)
  E[I2] = (n/S0)^2 [tr(MWMW') + tr((MW)^2) + (tr MW)^2] / ((n-p)(n-p+2))
Weights: 8 nearest neighbours (ties by index, self excluded), row-standardised.
"""

import math
import numpy as np
from scipy import stats


def knn_w(coords, k=8, row_standardize=True):
    n = len(coords)
    d = np.sqrt(((coords[:, None] - coords[None, :]) ** 2).sum(axis=2))
    w = np.zeros((n, n))
    for i in range(n):
        order = sorted(range(n), key=lambda j: (d[i, j], j))
        picked = [j for j in order if j != i][:k]
        w[i, picked] = 1.0
    if row_standardize:
        w = w / w.sum(axis=1, keepdims=True)
    return w


def raw_moran(x, w):
    n = len(x)
    z = x - x.mean()
    s0 = w.sum()
    i_stat = (n / s0) * (z @ w @ z) / (z @ z)
    e = -1.0 / (n - 1)
    s1 = 0.5 * ((w + w.T) ** 2).sum()
    s2 = ((w.sum(axis=1) + w.sum(axis=0)) ** 2).sum()
    var = (n * n * s1 - n * s2 + 3.0 * s0 * s0) / ((n * n - 1.0) * s0 * s0) - e * e
    z_score = (i_stat - e) / math.sqrt(var)
    p = 2.0 * stats.norm.sf(abs(z_score))
    return i_stat, e, var, z_score, p


def adjusted_moran(resid, x, w):
    n, p = x.shape
    m = np.eye(n) - x @ np.linalg.solve(x.T @ x, x.T)
    s0 = w.sum()
    i_stat = (n / s0) * (resid @ w @ resid) / (resid @ resid)
    mw = m @ w
    e = (n / s0) * np.trace(mw) / (n - p)
    e2 = (n / s0) ** 2 * (np.trace(mw @ mw.T) + np.trace(mw @ mw)
                          + np.trace(mw) ** 2) / ((n - p) * (n - p + 2.0))
    var = e2 - e * e
    z_score = (i_stat - e) / math.sqrt(var)
    pv = 2.0 * stats.norm.sf(abs(z_score))
    return i_stat, e, var, z_score, pv


def main():
    d = np.genfromtxt("../fixtures/flat100.csv", delimiter=",", names=True)
    coords = np.column_stack([d["x"], d["y"]])
    y = d["response"]
    x = np.column_stack([np.ones(len(y)), d["a"], d["b"]])
    w = knn_w(coords)

    i_stat, e, var, z_score, p = raw_moran(y, w)
    print("// raw Moran, flat100 response, knn(8) row-standardised")
    print("I:", repr(float(i_stat)), "E:", repr(e))
    print("var:", repr(float(var)), "z:", repr(float(z_score)), "p:", repr(float(p)))

    resid = y - x @ np.linalg.solve(x.T @ x, x.T @ y)
    i2, e2, v2, z2, p2 = adjusted_moran(resid, x, w)
    print("// residual-adjusted Moran, OLS response ~ a + b residuals")
    print("I:", repr(float(i2)), "E:", repr(float(e2)))
    print("var:", repr(float(v2)), "z:", repr(float(z2)), "p:", repr(float(p2)))

    wb = knn_w(coords, row_standardize=False)
    i3, e3, v3, z3, p3 = raw_moran(y, wb)
    print("// raw Moran, binary knn(8)")
    print("I:", repr(float(i3)), "var:", repr(float(v3)), "p:", repr(float(p3)))


if __name__ == "__main__":
    main()

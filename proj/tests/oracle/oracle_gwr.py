"""Brute-force geographically weighted regression reference for svc64.csv.

Everything is dense numpy, one explicit weighted least squares per location,
with the full hat matrix materialised.  Two calibrations are frozen:

  fixed bisquare, bandwidth 400
  adaptive bisquare, 20 neighbours (bandwidth nextafter(d_(20)) per site,
  the site itself counting as rank 1)

plus a leave-one-out CV score (w_ii = 0) for each.
"""

import math
import numpy as np


def load(path):
    raw = np.genfromtxt(path, delimiter=",", names=True)
    return raw


def bisquare(d, b):
    w = np.zeros_like(d)
    inside = d < b
    w[inside] = (1.0 - (d[inside] / b) ** 2) ** 2
    return w


def aicc(rss, n, tr_s):
    return n * math.log(rss / n) + n * math.log(2 * math.pi) \
        + n * (n + tr_s) / (n - 2.0 - tr_s)


def gwr(x, y, dist, bandwidths):
    n, p = x.shape
    beta = np.zeros((n, p))
    se_raw = np.zeros((n, p))  # sqrt(diag(C C')), sigma-free part
    s = np.zeros((n, n))
    for i in range(n):
        w = bisquare(dist[i], bandwidths[i])
        xtw = x.T * w
        a = xtw @ x
        c = np.linalg.solve(a, xtw)
        beta[i] = c @ y
        s[i] = x[i] @ c
        se_raw[i] = np.sqrt(np.diag(c @ c.T))
    tr_s = float(np.trace(s))
    tr_sts = float((s * s).sum())
    fitted = (x * beta).sum(axis=1)
    resid = y - fitted
    rss = float(resid @ resid)
    enp = 2.0 * tr_s - tr_sts
    sigma2 = rss / (n - enp)
    return dict(beta=beta, se=np.sqrt(sigma2) * se_raw, s=s, tr_s=tr_s,
                tr_sts=tr_sts, rss=rss, sigma2=sigma2,
                aicc=aicc(rss, n, tr_s))


def cv_press(x, y, dist, bandwidths):
    n = len(y)
    press = 0.0
    for i in range(n):
        w = bisquare(dist[i], bandwidths[i])
        w[i] = 0.0
        xtw = x.T * w
        b = np.linalg.solve(xtw @ x, xtw @ y)
        press += (y[i] - x[i] @ b) ** 2
    return press


def report(tag, fit, cv):
    print(f"// {tag}")
    for i in (0, 27, 63):
        print(f"beta[{i}]:", ", ".join(repr(float(v)) for v in fit["beta"][i]))
    print("se[0]:", ", ".join(repr(float(v)) for v in fit["se"][0]))
    print("hat[0,0]:", repr(float(fit["s"][0, 0])))
    print("tr_s:", repr(fit["tr_s"]), "tr_sts:", repr(fit["tr_sts"]))
    print("rss:", repr(fit["rss"]), "sigma2:", repr(fit["sigma2"]))
    print("aicc:", repr(fit["aicc"]))
    print("cv:", repr(float(cv)))


def main():
    d = load("../fixtures/svc64.csv")
    coords = np.column_stack([d["x"], d["y"]])
    xmat = np.column_stack([np.ones(len(d)), d["a"], d["b"]])
    yvec = d["response"]
    dist = np.sqrt(((coords[:, None] - coords[None, :]) ** 2).sum(axis=2))

    n = len(yvec)
    fixed_bw = np.full(n, 400.0)
    report("fixed bisquare 400", gwr(xmat, yvec, dist, fixed_bw),
           cv_press(xmat, yvec, dist, fixed_bw))

    k = 20
    adapt_bw = np.array([np.nextafter(np.sort(dist[i])[k - 1], np.inf)
                         for i in range(n)])
    report("adaptive bisquare 20", gwr(xmat, yvec, dist, adapt_bw),
           cv_press(xmat, yvec, dist, adapt_bw))
    print("adaptive bw[0]:", repr(float(adapt_bw[0])))


if __name__ == "__main__":
    main()

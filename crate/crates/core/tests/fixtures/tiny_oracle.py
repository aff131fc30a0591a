"""Dense reference values for tiny.csv, written to tiny_expected.json.

Every estimator is evaluated from explicit matrices: the sandwich forms build
the full n x n meat, and 2SLS uses the projection onto the instruments.
"""
import json

import numpy as np

raw = np.genfromtxt("tiny.csv", delimiter=",", names=True, dtype=None, encoding="utf-8")
y = raw["y"].astype(float)
d = raw["d"].astype(float)
W = np.column_stack([raw["w1"], raw["w2"]]).astype(float)
groups = list(raw["group"])
v = raw["v"].astype(float)
n = len(y)

X = np.column_stack([d, W])
k = X.shape[1]
bread = np.linalg.inv(X.T @ X)
theta = bread @ X.T @ y
e = y - X @ theta


def sandwich(omega):
    return (bread @ X.T @ omega @ X @ bread)[0, 0]


out = {"n": n, "beta_ols": theta[0]}
out["classic"] = (e @ e / n) * bread[0, 0]
out["hc0"] = sandwich(np.diag(e**2))
out["hc1"] = out["hc0"] * n / (n - k)
same = np.array([[gi == gj for gj in groups] for gi in groups], dtype=float)
out["cluster"] = sandwich(same * np.outer(e, e))
G = len(set(groups))
out["cluster_adj"] = out["cluster"] * G / (G - 1) * (n - 1) / (n - k)
lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
for L in (0, 1, 2):
    weights = np.where(lag <= L, 1 - lag / (L + 1), 0.0)
    out[f"hac_{L}"] = sandwich(weights * np.outer(e, e))

Z = np.column_stack([v, W])
P = Z @ np.linalg.inv(Z.T @ Z) @ Z.T
Xh = P @ X
theta_iv = np.linalg.solve(Xh.T @ X, Xh.T @ y)
u = y - X @ theta_iv
first = np.linalg.lstsq(Z, d, rcond=None)[0]
rho = first[0]
s2_v = np.mean((v - v.mean()) ** 2)
out["beta_2sls"] = theta_iv[0]
out["tsls"] = (u @ u / n) / (rho**2 * s2_v * n)

with open("tiny_expected.json", "w") as f:
    json.dump({key: float(val) for key, val in out.items()}, f, indent=2)
    f.write("\n")

"""Inputs and dense reference values for the small fixed instances, written
to small_cases.json. Normal equations are solved directly; every variance
comes from an explicit meat matrix or scalar formula."""
import json

import numpy as np

cases = {}

# n = 5, one control besides the intercept
y = np.array([1.2, -0.3, 2.8, 0.9, 1.7])
d = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
w2 = np.array([0.4, -1.1, 0.8, 0.2, -0.5])
X = np.column_stack([d, np.ones(5), w2])
theta = np.linalg.solve(X.T @ X, X.T @ y)
e = y - X @ theta
bread = np.linalg.inv(X.T @ X)
lag = np.abs(np.subtract.outer(np.arange(5), np.arange(5)))
meat = np.where(lag <= 1, 1 - lag / 2, 0.0) * np.outer(e, e)
cases["ols_n5"] = {
    "y": y.tolist(), "d": d.tolist(), "w2": w2.tolist(),
    "theta": theta.tolist(),
    "s2": float(e @ e / 5),
    "hac_1": float((bread @ X.T @ meat @ X @ bread)[0, 0]),
}

# n = 6, two clusters
y = np.array([0.5, 1.9, -0.4, 2.2, 1.1, 0.3])
d = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
w2 = np.array([0.3, -0.7, 1.4, 0.1, -1.0, 0.6])
ids = np.array([0, 0, 0, 1, 1, 1])
X = np.column_stack([d, np.ones(6), w2])
bread = np.linalg.inv(X.T @ X)
e = y - X @ (bread @ X.T @ y)
meat = (ids[:, None] == ids[None, :]) * np.outer(e, e)
cases["cluster_n6"] = {
    "y": y.tolist(), "d": d.tolist(), "w2": w2.tolist(), "ids": ids.tolist(),
    "cluster": float((bread @ X.T @ meat @ X @ bread)[0, 0]),
}

# n = 6 first stage: d on (v, 1, w2)
v = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0])
d = np.array([1.3, 0.2, 0.9, 1.6, -0.1, 0.4])
w2 = np.array([0.5, 0.1, -0.8, 1.2, 0.0, -0.3])
Z = np.column_stack([v, np.ones(6), w2])
coef = np.linalg.solve(Z.T @ Z, Z.T @ d)
cases["first_stage_n6"] = {
    "v": v.tolist(), "d": d.tolist(), "w2": w2.tolist(),
    "rho": float(coef[0]), "alpha": coef[1:].tolist(),
}

# n = 8 2SLS: explicit annihilators M_W and M_(V,W)
v = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0])
d = np.array([1.4, 0.3, 0.8, -0.2, 1.1, 1.6, 0.5, 0.1])
w2 = np.array([0.2, -0.6, 1.0, 0.4, -1.3, 0.7, 0.0, 0.9])
y = np.array([2.1, 0.4, 1.9, -0.3, 1.2, 2.8, 0.6, 0.9])
W = np.column_stack([np.ones(8), w2])
I = np.eye(8)
M_W = I - W @ np.linalg.inv(W.T @ W) @ W.T
VW = np.column_stack([v, W])
M_VW = I - VW @ np.linalg.inv(VW.T @ VW) @ VW.T
A = M_W - M_VW
beta = (d @ A @ y) / (d @ A @ d)
gamma = np.linalg.solve(W.T @ W, W.T @ (y - d * beta))
u = y - d * beta - W @ gamma
rho = np.linalg.solve(VW.T @ VW, VW.T @ d)[0]
s2 = u @ u / 8
s2_v = np.mean((v - v.mean()) ** 2)
cases["tsls_n8"] = {
    "v": v.tolist(), "d": d.tolist(), "w2": w2.tolist(), "y": y.tolist(),
    "beta": float(beta), "gamma": gamma.tolist(), "rho": float(rho),
    "s2": float(s2), "sigma2_v": float(s2_v),
    "var": float(s2 / (rho**2 * s2_v * 8)),
}

with open("small_cases.json", "w") as f:
    json.dump(cases, f, indent=2)
    f.write("\n")

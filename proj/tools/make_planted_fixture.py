"""Writes tests/fixtures/planted_panel.csv and the LSDV reference fit.

The reference is computed by brute-force least squares with explicit unit and
time dummies, so it shares nothing with the alternating-projection estimator.
"""
import json
import pathlib

import numpy as np

rng = np.random.default_rng(20240601)
n_units, n_periods, beta, sigma = 60, 20, -0.162, 0.01
adoption = [6, 9, 12]
n_treated = 45

unit_effect = rng.normal(size=n_units)
time_effect = 0.05 * np.arange(n_periods) + 0.1 * rng.normal(size=n_periods)

rows = []
for u in range(n_units):
    a = adoption[u % len(adoption)] if u < n_treated else -1
    for t in range(n_periods):
        d = 1.0 if a >= 0 and t >= a else 0.0
        x = 0.3 * unit_effect[u] + rng.normal()
        y = 2 + 0.5 * unit_effect[u] + time_effect[t] + beta * d + 0.02 * x + sigma * rng.normal()
        rows.append((u, t, d, a, x, y))
# Drop a few cells so the panel is unbalanced.
rows = [r for k, r in enumerate(rows) if k % 97 != 5]
data = np.array(rows)

unit, time, d, x, y = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2], data[:, 4], data[:, 5]
n = len(y)
dummies_u = np.eye(n_units)[unit]
dummies_t = np.eye(n_periods)[time][:, 1:]
X = np.column_stack([d, x, dummies_u, dummies_t])
coef, *_ = np.linalg.lstsq(X, y, rcond=None)
resid = y - X @ coef
bread = np.linalg.inv(X.T @ X)
meat = np.zeros_like(bread)
for g in np.unique(unit):
    s = X[unit == g].T @ resid[unit == g]
    meat += np.outer(s, s)
k = 2  # slopes only; the absorbed effects are not counted
G = n_units
cov = (G / (G - 1)) * ((n - 1) / (n - k)) * bread @ meat @ bread

out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
with open(out / "planted_panel.csv", "w") as f:
    f.write("unit,time,treated,adoption_period,x,y\n")
    for u, t, dd, a, xx, yy in rows:
        f.write(f"{int(u)},{int(t)},{int(dd)},{int(a)},{float(xx)!r},{float(yy)!r}\n")
with open(out / "planted_expected.json", "w") as f:
    json.dump({"beta_treated": coef[0], "beta_x": coef[1],
               "se_treated": float(np.sqrt(cov[0, 0])), "se_x": float(np.sqrt(cov[1, 1])),
               "n_obs": n, "n_clusters": G}, f, indent=2)
    f.write("\n")

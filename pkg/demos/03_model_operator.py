"""The discretized model operator at fixed scale.

Build the model operator for two random inputs, confirm it against the
nested-loop reference at a few points, then estimate its norm at scales
2, 3, 4 with a small ascent and fit the decay rate.

    python demos/03_model_operator.py
"""
import numpy as np

from strichartz.model import ModelTruncation, model_norm, model_operator, model_operator_bruteforce
from strichartz.search import SearchConfig, TrigBasis, ascend_ratio, decay_fit, model_norm_objective, random_function

tr = ModelTruncation(N=6, X=12, T=2, nx=64, nt=16)
f = random_function(1, "indicator-smooth", 2, 128)
g = random_function(2, "band-limited", 2, 128)
F = model_operator(f, g, 2, 2, trunc=tr)
print(f"model field: {len(F.m_values)} time cells on a {tr.nx + 1}^2 grid, norm {model_norm(F, 10 / 3):.5f}")

pts = np.array([[tr.x[10], tr.x[40], -1.5], [tr.x[33], tr.x[33], 0.25]])
slow = model_operator_bruteforce(f, g, 2, 2, pts, tr)
rows = [list(F.m_values).index(int(np.floor(t))) for t in pts[:, 2]]
fast = [F.values[rows[0], 10, 40], F.values[rows[1], 33, 33]]
print("fast vs nested loops:", np.max(np.abs(np.array(fast) - slow)))

cfg = SearchConfig(seed=0, restarts=1, iterations=10, probes=3)
basis = TrigBasis(2, 1, 64)
norms = []
for k in (2, 3, 4):
    obj = model_norm_objective(k, k, cfg.q, ModelTruncation(N=6, X=12, T=2, nx=64, nt=16), basis)
    norms.append((k, ascend_ratio(obj, cfg).value))
    print(f"  k={k}: estimated norm {norms[-1][1]:.5f}")
fit = decay_fit(norms)
print(f"fitted log2 slope {fit.slope:.3f}")

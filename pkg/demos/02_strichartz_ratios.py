"""Space-time norms of extended functions.

Evaluate the extension of a few random functions on a co-moving box, check
that the ratio of space-time norm to L2 norm is stable when the box and the
grid are doubled, then push the ratio up with a short gradient ascent.

    python demos/02_strichartz_ratios.py
"""
from strichartz.experiments import scan_box
from strichartz.extension import min_resolution, strichartz_ratio
from strichartz.search import FUNCTION_CLASSES, SearchConfig, TrigBasis, ascend_ratio, random_function, strichartz_objective

d, q = 2, 4.5
box = scan_box(d)
res = min_resolution(box)
print(f"d={d}, q={q}: box X={box.X} T={box.T} on a {box.nx}x{box.nt} grid, input grid {res}")

for seed, kind in enumerate(FUNCTION_CLASSES):
    g = random_function(seed, kind, d, res)
    r = strichartz_ratio(g, q, box)
    big = box.doubled()
    r_big = strichartz_ratio(random_function(seed, kind, d, min_resolution(big)), q, big)
    print(f"  {kind:17s} ratio {r:.4f}   doubled box {r_big:.4f}   change {abs(r_big - r) / r:.2%}")

basis = TrigBasis(d, 1, res)
obj = strichartz_objective(q, box, basis)
best = ascend_ratio(obj, SearchConfig(seed=0, restarts=2, iterations=15, probes=4))
print(f"ascent over {len(basis)}-term trigonometric span: {best.value:.4f} "
      f"(best starting probe {max(max(p) for p in best.probe_values):.4f}, argmax {best.argmax_hash})")

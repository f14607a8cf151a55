"""Walk through the frequency-side geometry.

Cover the off-diagonal part of the unit square by Whitney rectangles, then
expand a smooth function on one dyadic interval into wave packets and watch
the reconstruction converge as more modulations are kept.

    python demos/01_whitney_and_packets.py
"""
import numpy as np

from strichartz.bumps import bessel_sum, packet_freq, reconstruct
from strichartz.dyadic import close_pairs, diagonal_split, interval, whitney_cover
from strichartz.sampling import SampledFunction

# Whitney rectangles: one close pair (I, J) of dyadic intervals per rectangle
cover = whitney_cover(6)
print(f"scale 6 cover: {len(cover)} rectangles")
for k in range(2, 5):
    pairs = close_pairs(k)
    print(f"  k={k}: {len(pairs)} close pairs, e.g. {pairs[0].first} ~ {pairs[0].second}")
print(f"diagonal split into {len(diagonal_split(cover))} classes")

# a packet on [1/4, 1/2] with modulation 3
pk = packet_freq((0.25, 0.5), 3)
xi = np.linspace(0.2, 0.55, 8)
print("packet samples:", np.round(np.abs(pk(xi)), 4))

# Bessel: the packet coefficients never carry more than the function's mass
h = SampledFunction.from_callable(lambda x: np.cos(6 * x) + 1j * x**2, ((0, 1),), 1024)
lhs, rhs = bessel_sum(h, 2, interval(2, 1), 32)
print(f"Bessel: sum of squared coefficients {lhs:.6f} <= {rhs:.6f}")

# reconstruction of a 2-d function on one box as N grows
g = SampledFunction.from_callable(lambda x, y: np.exp(2j * np.pi * (x - y)) + x * y, ((0, 1), (0, 1)), 512)
box = ((0.25, 0.5), (0.5, 0.75))
for N in (4, 8, 16, 32):
    r = reconstruct(g, 0, box, N)
    X, Y = np.meshgrid(*r.axes, indexing="ij")
    exact = g.fn(X, Y)
    err = np.sqrt(np.sum(r.weights * np.abs(r.values - exact) ** 2) / np.sum(r.weights * np.abs(exact) ** 2))
    print(f"  N={N:3d}: relative L2 error {err:.2e}")

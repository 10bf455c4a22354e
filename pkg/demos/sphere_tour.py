"""Two motions as points on the SRVF sphere: distance, geodesic blend and mean.

Run: python demos/sphere_tour.py
"""

import numpy as np

from motionsphere import geodesic_distance, geodesic_interpolate, karcher_mean, srvf_decode, srvf_encode
from motionsphere.dataio import synthetic_motions
from motionsphere.metrics import mpjs
from motionsphere.srvf import ScaledSrvf, curve_to_sequence, sequence_to_curve

walk, loop = synthetic_motions("pendulum_walk", 1, 50, seed=0) + synthetic_motions("figure8", 1, 50, seed=0)
a = srvf_encode(sequence_to_curve(walk))
b = srvf_encode(sequence_to_curve(loop))
print(f"geodesic distance walk -> figure8: {geodesic_distance(a.point, b.point):.4f} rad")

# Halfway along the great circle is a motion that is part walk, part loop.
mid = geodesic_interpolate(a.point, b.point, 0.5)
blend = ScaledSrvf(mid, 0.5 * (a.scale + b.scale), a.anchor)
frames = curve_to_sequence(srvf_decode(blend), walk.fps)
print(f"blend distances: {geodesic_distance(mid, a.point):.4f} / {geodesic_distance(mid, b.point):.4f}")
print(f"mean speed (mm/frame): walk {mpjs([walk]).mean():.1f}, blend {mpjs([frames]).mean():.1f}, "
      f"figure8 {mpjs([loop]).mean():.1f}")

walks = synthetic_motions("pendulum_walk", 12, 50, seed=3)
res = karcher_mean([srvf_encode(sequence_to_curve(w)).point for w in walks])
spread = np.mean([geodesic_distance(res.mean, srvf_encode(sequence_to_curve(w)).point) for w in walks])
print(f"Karcher mean of 12 walks: {res.iterations} steps, |v| {res.final_norm:.1e}, mean spread {spread:.4f} rad")

"""A short Cartan flow from a random small deformation; prints mu and sup|E|."""
import numpy as np

from crgeom.flows import SliceBasis, cartan_state, run_flow
from crgeom.manifold import HopfGrid, sphere

basis = SliceBasis(sphere(HopfGrid(8, 16, 16)), 2)
state = cartan_state(basis, basis.random(np.random.default_rng(3), 0.1), dt=0.02)
result = run_flow(state, 60, basis)
for row in result.rows[:: 10]:
    print(f"t = {row['t']:.3f}   mu = {row['mu']:+.12f}   sup|E| = {row['supE']:.5f}")
print(f"accepted {result.accepted} steps, stalled: {result.stalled}")

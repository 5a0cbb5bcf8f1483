"""mu on the standard sphere, a deformation, a contact rescaling and lens quotients."""
from crgeom.cartan import solve_cartan, transgression_mu
from crgeom.fields import from_terms
from crgeom.invariants import mu_lens, mu_pseudohermitian, rigidity_certificate
from crgeom.manifold import HopfGrid, lens, sphere
from crgeom.pseudohermitian import structure

poly = sphere()
grid = sphere(HopfGrid(16, 32, 32))

_, ph = structure(manifold=poly)
print(f"standard sphere      mu = {mu_pseudohermitian(ph).mu:+.12f}")
print(f"rigidity margin      {rigidity_certificate(ph).margin:.6f}")

E = from_terms(grid, {(1, 0, 1, 0): 0.05, (0, 0, 2, 0): 0.03j})
for label, u in (("deformed", None), ("deformed, u*theta", from_terms(grid, {(0, 0, 0, 0): 1.0, (1, 1, 0, 0): 0.2}, real=True))):
    _, ph = structure(u, E, grid)
    rep = mu_pseudohermitian(ph)
    cs = transgression_mu(solve_cartan(ph))
    print(f"{label:20s} mu = {rep.mu:+.12f}   via Cartan connection {cs.mu:+.12f}")

for p in (2, 3, 5):
    print(f"lens L({p},1)          mu = {mu_lens(p, 1, structure(manifold=lens(p, 1))[1]).mu:+.12f}")

"""Residuals of the monopole equations at zero and under a gauge change."""
import numpy as np

from crgeom.exterior import FormField
from crgeom.fields import constant, from_terms
from crgeom.manifold import HopfGrid, sphere
from crgeom.monopole import MonopoleFields, gauge_transform, obstruction_report, residuals
from crgeom.pseudohermitian import structure

m = sphere(HopfGrid(24, 48, 48))
_, ph = structure(manifold=m)
cf = ph.cf.coframe
zero = constant(m, 0.0)
alpha = from_terms(m, {(0, 0, 0, 0): 0.3, (0, 0, 0, 1): 0.1j})
beta = from_terms(m, {(0, 1, 0, 0): 0.05})
a = FormField(cf, 1, [from_terms(m, {(1, 1, 0, 0): 0.1j}), from_terms(m, {(0, 1, 1, 0): 0.05}), zero])
mf = MonopoleFields(ph, alpha, beta, a)

gamma = from_terms(m, {(1, 0, 0, 0): 1.0, (0, 1, 0, 0): 1.0}, real=True)
r0, r1 = residuals(mf), residuals(gauge_transform(mf, gamma))
before, after = r0.report(), r1.report()
for name in before:
    print(f"{name:12s} L2 before {before[name]['l2']:.10e}   after gauge {after[name]['l2']:.10e}")
print(obstruction_report(ph)["verdict"])

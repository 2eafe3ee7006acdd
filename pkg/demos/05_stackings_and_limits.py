"""Stacked normed spaces: cross-space distances and convergence probes.

Three instances (coordinate subspaces, matrix inner products, weighted L^p
spaces over refining grids) plus lower-bound and compactness evidence for an
energy family, with the negative controls that keep the probes honest.
"""

import numpy as np

from gfstack import (
    EnergySequence,
    IndexedSequence,
    MatrixHilbertStacking,
    TLpStacking,
    check_stacking_axioms,
    equicoercivity_probe,
    gamma_liminf_check,
    quadratic_functional,
    stacking_distance,
    uniform_measure,
)
from gfstack.stacking import LIMIT, circle_minimizer_fixture, escaping_sequence_fixture

sizes = [4, 8, 16, 32, 64]
mats = {n: (1 + 1 / n) * np.eye(2) for n in sizes}
mats[LIMIT] = np.eye(2)
mh = MatrixHilbertStacking(mats)
x = np.array([1.0, -2.0])
print("matrix stacking: fixed vector seen through A_n = (1 + 1/n) I:")
for n in sizes:
    print(f"  n={n:3d}: distance to the limit copy {stacking_distance(mh, n, x, LIMIT, x):.5f}")

seq = IndexedSequence(indices=sizes, points=[x] * len(sizes), limit_point=x)
rep = check_stacking_axioms(mh, [seq, seq], decay_tol=0.2)
print("axiom probe passed:", rep.ok, "| norm gaps:", np.round(rep.norm_gaps[0], 5))

print("\ntransport stacking over refining grids:")
meas = {n: uniform_measure(((np.arange(n) + 0.5) / n)[:, None]) for n in sizes}
meas[LIMIT] = uniform_measure(((np.arange(256) + 0.5) / 256)[:, None])
tl = TLpStacking(meas, p=2.0)
uinf = np.cos(np.pi * meas[LIMIT].atoms[:, 0])
pts = [tl.approximating_point(n, LIMIT, uinf) for n in sizes]
for n, u in zip(sizes, pts):
    print(f"  n={n:3d}: recovery distance {stacking_distance(tl, n, u, LIMIT, uinf):.5f}")

print("\nlower-bound evidence for a constant quadratic family:")
q = quadratic_functional(lam=1.0, dim=2)
e = EnergySequence(functionals={**{n: q for n in sizes}, LIMIT: q})
seqq = IndexedSequence(indices=sizes, points=[x + 1 / n**2 for n in sizes], limit_point=x)
rep = gamma_liminf_check(e, mh, seqq, tol=1e-2)
print(f"  tail minimum {rep.liminf_estimate:.6f} >= limit {rep.limit_value:.6f} - tol: {rep.ok}")

print("\nnegative controls:")
s_esc, e_esc, cands = escaping_sequence_fixture(sizes)
esc = equicoercivity_probe(e_esc, s_esc, 1.0, cands, tol=1.0)
print(f"  escaping points stay non-Cauchy: {not esc.tail_cauchy} "
      f"(max tail distance {esc.max_tail_distance:.1f})")
s_c, e_c, mins = circle_minimizer_fixture(sizes)
circ = equicoercivity_probe(e_c, s_c, 0.0, mins, tol=0.05, limit_candidate=np.array([0.0]))
print(f"  wrapped-line minimizers bunch up (Cauchy: {circ.tail_cauchy}) yet miss the "
      f"limit minimizer (distance {circ.limit_distances[-1]:.3f})")

"""Stationary states at fixed mass, found by multi-start Newton.

The stationary problem does not involve L, so one set of solutions serves
every relaxation time.  Here: the constant state and the two mirror-image
interface states on a rectangle.
"""
import numpy as np

from chdbc import ModelParams, PotentialPair, assemble, double_well, generate_rectangle, make_system, step
from chdbc.stationary import multi_start

ops = assemble(generate_rectangle(4.0, 2.0, 32, 16))
sys_ = make_system(ops, PotentialPair.same(double_well()), ModelParams(beta=1.0, L=1.0, tau=0.1))
x = ops.mesh.nodes[:, 0]
kink = np.tanh((x - 2.0) / np.sqrt(2))
guesses = [np.zeros(ops.n_nodes), kink, -kink, kink + 0.05 * np.sin(ops.mesh.nodes[:, 1])]

for p in multi_start(sys_, guesses, m=0.0):
    moved = max(np.max(np.abs(step(sys_.with_params(L=L), p.field).u - p.field)) for L in (0.0, 1e-2, 1.0))
    print("energy %.6f  lambda %+.2e  range [%.3f, %.3f]  moved by one step: %.1e" % (
        p.energy, p.lam, p.field.min(), p.field.max(), moved))

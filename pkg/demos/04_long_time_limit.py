"""Long-time behaviour: a trajectory settles on one stationary point.

On a 4 x 2 rectangle the double-well flow separates into two phases with a
straight interface.  The run stops once the velocity norm falls below the
threshold, and Newton then polishes the end state.
"""
import numpy as np

from chdbc import ModelParams, PotentialPair, assemble, double_well, generate_rectangle, make_system, omega_limit

ops = assemble(generate_rectangle(4.0, 2.0, 32, 16))
sys_ = make_system(ops, PotentialPair.same(double_well()), ModelParams(beta=1.0, L=1.0, tau=0.1))

for seed in range(3):
    u0 = 0.3 * np.random.default_rng(seed).uniform(-1, 1, ops.n_nodes)
    res = omega_limit(sys_, u0, stop_threshold=1e-9, t_max=200.0)
    st = res.matched_stationary
    print("seed %d: stopped at t = %.1f (converged: %s), distance to refined point %.1e, "
          "u in [%.3f, %.3f], lambda %.2e" % (seed, res.t_final, res.converged, res.distance_L2,
                                               st.field.min(), st.field.max(), st.lam))

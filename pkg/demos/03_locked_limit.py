"""How fast do trajectories with a finite relaxation time L approach the locked model?

Every trajectory starts from the same datum; the error is the largest
sampled distance to the L = 0 trajectory over [0, T*].
"""
import numpy as np

from chdbc import ModelParams, PotentialPair, assemble, double_well, generate_disk, limit_study, make_system

ops = assemble(generate_disk(1.0, 32, 1))
sys_ = make_system(ops, PotentialPair.same(double_well()), ModelParams(beta=1.0, L=1.0, tau=2e-3))
u0 = 0.3 * np.random.default_rng(4).uniform(-1, 1, ops.n_nodes)

res = limit_study(sys_, u0, [1e-1, 1e-2, 1e-3, 1e-4], T_star=0.5, sample_every=5, threads=2)
for L, e2, e1 in zip(res.L_grid, res.errors_L2, res.errors_H1):
    print("L = %-6g  L2 error %.3e   H1 error %.3e" % (L, e2, e1))
print("fitted orders: L2 %.3f, H1 %.3f (error ~ L^order)" % (res.fitted_order_L2, res.fitted_order_H1))

"""
Closed-form interpolation error against Monte Carlo
===================================================

The mean-squared error of a Gram entry interpolated from nearby base points
depends only on the base-point distance through a Fejer kernel, plus terms
for BS-antenna correlation and channel-estimation error.  Here the formulas
are compared with simulation for one geometry and a few array sizes.
"""
import numpy as np

import gramterp as gt

W, L = 256, 8
p_left, p_right, target = 100, 112, 103

# %%
# The kernel starts at 1 for neighbouring tones and falls to 0 once the
# distance reaches W / L subcarriers.
for d in (0, 4, 8, 16, 32):
    print(f"f_L at distance {d:2d}: {gt.fejer(L, 2 * np.pi * d / W):.4f}")

# %%
# Ideal conditions and a non-ideal case with correlation 0.1 and channel
# estimates at 25 dB.  Errors fall like 1/B; correlation adds a floor.
print()
for B in (16, 32, 64):
    sigma = gt.sigma_from_snr(10 ** 2.5, B, 4)
    for name, delta, s in (("ideal", 0.0, 0.0), ("non-ideal", 0.1, sigma)):
        mp = gt.MseParams(B, L, W, delta, s)
        t0 = gt.mse_0th(mp, p_left, target)
        t1 = gt.mse_1st(mp, p_left, p_right, target)
        r0, r1 = gt.oracle_sweep(B, L, W, [(delta, s)], (p_left, p_right), target,
                                 trials=20_000, seed=B)[0]
        print(f"B={B:3d} {name:9s}  0th: theory {t0:.3e} sim {r0.mse:.3e}   "
              f"1st: theory {t1:.3e} sim {r1.mse:.3e}")

# %%
# Worst case over a whole uniform plan is bounded by the largest distance
# to a base point.
mp = gt.MseParams(32, L, W)
for P in (8, 16, 32):
    plan = gt.plan_uniform_base_points(range(W), P)
    worst = gt.predict_plan_mse(mp, plan, 0).mse.max()
    print(f"|P| = {P:2d}: worst 0th-order MSE {worst:.4f} <= bound "
          f"{gt.mse_0th_max_bound(mp, plan.d_max):.4f}")

"""
Why Gram matrices can be interpolated
=====================================

A channel with ``L`` taps has a frequency response that is a trigonometric
polynomial of degree ``L - 1`` in the subcarrier index.  Each Gram matrix
entry is a product of two such responses, so it is a polynomial of degree
``2L - 2``.  Knowing it on ``2L - 1`` subcarriers therefore pins it down
everywhere.  This script checks that numerically and shows what happens
with fewer base points.
"""
import warnings

import numpy as np

import gramterp as gt

# a small system: 32 antennas, 4 users, 256-point FFT, 200 active tones, 16 taps
cfg = gt.SystemConfig(32, 4, 256, 16, gt.centered_active_set(256, 200))
rng = np.random.default_rng(1)
fd = gt.td_to_fd(gt.gen_td_channel(cfg, rng), cfg)
reference = gt.gram_brute_force(fd).grams


def rel_error(G):
    err = np.linalg.norm(G - reference, axis=(-2, -1))
    return float((err / np.linalg.norm(reference, axis=(-2, -1))).max())


# %%
# Exact interpolation from 2L - 1 = 31 base points reproduces every Gram
# matrix up to rounding; with fewer points the system is underdetermined.
for P in (8, 16, 31, 48):
    plan = gt.plan_uniform_base_points(cfg.active_set, P)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        G = gt.gram_exact_interp(fd, plan, cfg.L, cfg.W).grams
    op = gt.exact_interp_operator(plan, cfg.L, cfg.W) if P >= 31 else None
    cond = f"cond {op.condition_number:.1e}" if op is not None else "underdetermined"
    print(f"|P| = {P:3d}: max relative error {rel_error(G):.2e}  ({cond}, "
          f"{len(caught)} warning(s))")

# %%
# The cheap schemes are approximations.  Their error shrinks as the base
# points get denser, and linear interpolation beats nearest-neighbour.
print()
for P in (16, 31, 64, 100):
    plan = gt.plan_uniform_base_points(cfg.active_set, P)
    e0 = rel_error(gt.gram_interp_0th(fd, plan).grams)
    e1 = rel_error(gt.gram_interp_1st(fd, plan).grams)
    print(f"|P| = {P:3d}: 0th order {e0:.3f}, 1st order {e1:.3f}  (d_max = {plan.d_max})")

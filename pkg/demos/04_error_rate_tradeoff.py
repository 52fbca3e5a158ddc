"""
Error rate against complexity
=============================

A small uplink with 16-QAM and linear MMSE detection.  Channel estimates
come from orthogonal pilots, so every Gram method sees the same noisy
channel.  Sweeping the number of base points shows how much SNR the cheap
schemes give up for their savings.  The full-size runs are available
through ``gramterp tradeoff --scale paper``.
"""
import numpy as np

import gramterp as gt
from gramterp.experiments import required_snr

cfg = gt.SystemConfig(32, 4, 256, 16, gt.centered_active_set(256, 200))
snr = [14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 30.0]
N, B, U = cfg.num_active, cfg.B, cfg.U

specs = [gt.GramSpec(gt.GramMethod.BRUTE_FORCE)]
for P in (24, 48, 85):
    plan = gt.plan_uniform_base_points(cfg.active_set, P)
    specs += [gt.GramSpec(gt.GramMethod.ORDER0, plan), gt.GramSpec(gt.GramMethod.ORDER1, plan)]

res = gt.simulate_uplink_ber(cfg, specs, snr, trials=60, seed=3, csi="estimated")

# %%
# Required SNR for an uncoded BER of 1e-3, relative to brute force.
bits = res.curves["bf"][0].bits
ref = required_snr(snr, res.ber("bf"), 1e-3, bits)
print(f"brute force needs {ref:.2f} dB")
for s in specs[1:]:
    P = s.plan.num_base
    frac = gt.cost_gram(s.method, N, P, B, U) / gt.cost_bf(N, B, U)
    need = required_snr(snr, res.ber(s.name), 1e-3, bits)
    gap = "never reaches 1e-3" if np.isnan(need) else f"{need - ref:+.2f} dB"
    print(f"{s.name:10s} at {frac:5.1%} of brute-force cost: {gap}")

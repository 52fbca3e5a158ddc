"""
Counting multiplications
========================

Every Gram method is instrumented: the kernels report the real
multiplications they perform, and these counts match the analytical cost
formulas.  This script prints the comparison for the full-size system
(128 antennas, 8 users, 1200 active tones) and shows where exact
interpolation stops paying off.
"""
import gramterp as gt

N, B, U = 1200, 128, 8
bf = gt.cost_bf(N, B, U)
print(f"brute force: {bf:,} real multiplications per OFDM symbol")

# %%
# Approximate schemes scale with |P|; exact interpolation adds an
# interpolation matrix multiply that is only cheaper than brute force for
# very few base points.
print(f"\n{'|P|':>6} {'exact':>12} {'0th':>12} {'1st':>12}   share of brute force")
for P in (300, 600, 900, 1200):
    ex, c0, c1 = (gt.cost_gram(m, N, P, B, U) for m in ("exact", "order0", "order1"))
    print(f"{P:6d} {ex:12,d} {c0:12,d} {c1:12,d}   {c0 / bf:.2f} / {c1 / bf:.3f}")
print(f"\nexact interpolation beats brute force only for |P| < {gt.exact_break_even(B, U)}")

# %%
# Detection adds a matched filter and a U x U inversion per tone.  With a
# quarter of the tones as base points the whole detector costs less than
# half of the brute-force one.
total_bf = gt.cost_detection("bf", N, N, B, U)
for m in ("order0", "order1"):
    tot = gt.cost_detection(m, N, 300, B, U)
    print(f"{m}: detection at |P| = 300 costs {tot / total_bf:.1%} of the brute-force detector")

"""Closed-form MSE of approximate Gram interpolation and a Monte-Carlo check.

All expressions hold for i.i.d. Rayleigh taps with per-entry variance
``1/(B L)``, BS correlation ``delta`` and per-subcarrier estimation error
``sigma E_w``.  They are entry independent, so a single number describes
every entry ``(m, n)`` of the interpolated Gram matrix.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import (SystemConfig, apply_bs_correlation, gen_td_channel,
                      perturb_csi, td_to_fd)
from .grammat import (BasePointPlan, gram_brute_force, gram_interp_0th,
                      gram_interp_1st, plan_from_base_points)

__all__ = [
    "MseParams",
    "MsePrediction",
    "fejer",
    "mse_0th",
    "mse_1st",
    "mse_0th_limit",
    "mse_0th_max_bound",
    "dominance_condition",
    "predict_plan_mse",
    "OracleResult",
    "oracle_sweep",
    "mse_empirical_oracle",
]

_SMALL_SIN = 1e-8


def fejer(L: int, phi):
    """Scaled Fejer kernel ``sin^2(L phi / 2) / (L^2 sin^2(phi / 2))``.

    Evaluates to its limit 1 wherever ``phi`` is a multiple of ``2 pi``.
    Accepts scalars or arrays.
    """
    phi = np.asarray(phi, dtype=float)
    den = np.sin(phi / 2.0)
    small = np.abs(den) < _SMALL_SIN
    safe = np.where(small, 1.0, den)
    val = (np.sin(L * phi / 2.0) / safe) ** 2 / L ** 2
    val = np.where(small, 1.0, val)
    # guard against rounding just above 1
    val = np.clip(val, 0.0, 1.0)
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class MseParams:
    num_bs_antennas: int
    delay_spread: int
    fft_size: int
    correlation: float = 0.0
    csi_error_std: float = 0.0

    def __post_init__(self):
        if self.num_bs_antennas < 1 or self.delay_spread < 1 or self.fft_size < 1:
            raise ValueError("B, L and W must be positive")
        if self.csi_error_std < 0:
            raise ValueError("csi_error_std must be non-negative")

    @property
    def eps_csi(self) -> float:
        s2 = self.csi_error_std ** 2
        return 2.0 * s2 * (2.0 + self.num_bs_antennas * s2)

    @property
    def eps_cor(self) -> float:
        return self.correlation ** 2 * (self.num_bs_antennas - 1)

    @property
    def kernel_scale(self) -> float:
        """``(2/B)(1 + eps_cor)``, the weight of the channel-variation term."""
        return 2.0 / self.num_bs_antennas * (1.0 + self.eps_cor)


def mse_0th(params: MseParams, p, omega):
    """MSE of nearest-base-point interpolation from ``p`` to ``omega``.

    Valid for ``p != omega``; at a base point the interpolation is exact and
    the empirical error is zero, while this expression returns ``eps_csi``.
    """
    d = np.asarray(p) - np.asarray(omega)
    f = fejer(params.delay_spread, 2 * np.pi * d / params.fft_size)
    return params.eps_csi + params.kernel_scale * (1.0 - f)


def mse_1st(params: MseParams, p_left, p_right, omega):
    """MSE of linear interpolation between ``p_left`` and ``p_right``."""
    p_left, p_right, omega = (np.asarray(a, dtype=float) for a in (p_left, p_right, omega))
    if np.any(p_right <= p_left):
        raise ValueError("bracketing base points must satisfy p_left < p_right")
    if np.any((omega < p_left) | (omega > p_right)):
        raise ValueError("target must lie between the bracketing base points")
    L = params.delay_spread
    lam = (p_right - omega) / (p_right - p_left)
    theta = 2 * np.pi * (p_right - p_left) / params.fft_size
    mix = lam * (1.0 - lam)
    kernel = (1.0 - mix + mix * fejer(L, theta)
              - (1.0 - lam) * fejer(L, lam * theta)
              - lam * fejer(L, (1.0 - lam) * theta))
    out = params.eps_csi * (1.0 - mix) + params.kernel_scale * kernel
    return out if np.ndim(out) else float(out)


def mse_0th_limit(delta: float, delay_spread: int, fft_size: int, p, omega):
    """Large-array limit of :func:`mse_0th` when the CSI error vanishes."""
    d = np.asarray(p) - np.asarray(omega)
    return 2.0 * delta ** 2 * (1.0 - fejer(delay_spread, 2 * np.pi * d / fft_size))


def mse_0th_max_bound(params: MseParams, d_max: int) -> float:
    """Upper bound on the worst-case 0th-order MSE given ``d_max``."""
    if d_max < 0:
        raise ValueError("d_max must be non-negative")
    L, W = params.delay_spread, params.fft_size
    if d_max * L >= W:
        return params.eps_csi + params.kernel_scale
    return params.eps_csi + params.kernel_scale * (1.0 - fejer(L, 2 * np.pi * d_max / W))


def dominance_condition(spacing: int, fft_size: int, delay_spread: int) -> bool:
    """True when ``spacing <= W/(3L)``, which guarantees 1st order beats 0th order."""
    if spacing < 1:
        raise ValueError("spacing must be at least 1")
    return 3 * delay_spread * spacing <= fft_size


@dataclass(frozen=True)
class MsePrediction:
    order: int
    targets: np.ndarray
    mse: np.ndarray
    nearest: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        if np.any(self.mse < 0):
            raise ValueError("negative MSE prediction")


def predict_plan_mse(params: MseParams, plan: BasePointPlan, order: int) -> MsePrediction:
    """Closed-form MSE at every target of ``plan``.

    Unbracketed edge targets use the 0th-order expression for both orders,
    mirroring what :func:`gram_interp_1st` does with them.
    """
    t = ~plan.is_base
    targets = plan.active[t]
    if order == 0:
        mse = mse_0th(params, plan.nearest[t], targets)
    elif order == 1:
        mse = np.asarray(mse_0th(params, plan.nearest[t], targets), dtype=float)
        br = plan.bracketed[t]
        if br.any():
            mse[br] = mse_1st(params, plan.left[t][br], plan.right[t][br], targets[br])
    else:
        raise ValueError("order must be 0 or 1")
    return MsePrediction(order, targets, np.atleast_1d(np.asarray(mse, dtype=float)),
                         plan.nearest[t], plan.left[t], plan.right[t], plan.weight[t])


@dataclass(frozen=True)
class OracleResult:
    """Monte-Carlo MSE estimate with its standard error."""

    mse: float
    stderr: float
    trials: int
    entry: tuple = (0, 1)

    def rel_gap(self, reference: float) -> float:
        return abs(self.mse - reference) / reference


# complex entries drawn per chunk; bounds memory, fixed so results never
# depend on thread count
_CHUNK_ENTRIES = 1 << 21


def _oracle_chunk(cfg, scenarios, plans, target_pos, entry, seed_seq, n):
    """Squared entry errors for ``n`` realizations, shape (scenarios, orders, n)."""
    rng = np.random.default_rng(seed_seq)
    m, k = entry
    td = gen_td_channel(cfg, rng, batch=n)
    out = np.empty((len(scenarios), len(plans), n))
    for s, (delta, sigma) in enumerate(scenarios):
        td_s = apply_bs_correlation(td, delta) if delta != 0 else td
        fd = perturb_csi(td_to_fd(td_s, cfg), sigma, rng)
        g_ref = gram_brute_force(fd).grams[:, target_pos, m, k]
        for o, (interp, plan) in enumerate(plans):
            g_hat = interp(fd, plan).grams[:, target_pos, m, k]
            out[s, o] = np.abs(g_hat - g_ref) ** 2
    return out


def oracle_sweep(num_bs_antennas: int, delay_spread: int, fft_size: int,
                 scenarios: Sequence, base_points: Sequence[int], target: int,
                 orders=(0, 1), trials: int = 100_000, seed: int = 0,
                 entry=(0, 1), threads: int = 1):
    """Monte-Carlo MSE for several ``(delta, sigma)`` scenarios and orders at once.

    All scenarios reuse the same uncorrelated tap draws (each then gets its
    own correlation and independent estimation error), and all orders are
    evaluated on the same realizations.  ``seed`` is an int or a
    :class:`numpy.random.SeedSequence`; draws are split into fixed-size
    chunks with spawned child streams, so the result does not depend on
    ``threads``.  Returns a nested list
    ``result[scenario][order_index]`` of :class:`OracleResult`.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    base = tuple(int(p) for p in base_points)
    subcarriers = tuple(sorted(set(base) | {int(target)}))
    ncols = max(entry) + 1
    cfg = SystemConfig(num_bs_antennas, ncols, fft_size, delay_spread,
                       active_set=subcarriers)
    plan = plan_from_base_points(subcarriers, base)
    interps = {0: gram_interp_0th, 1: gram_interp_1st}
    plans = [(interps[o], plan) for o in orders]
    target_pos = subcarriers.index(int(target))

    chunk = max(1, _CHUNK_ENTRIES // (delay_spread * num_bs_antennas * ncols))
    sizes = [min(chunk, trials - s) for s in range(0, trials, chunk)]
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy so spawning never depends on the caller's spawn history
        root = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        root = np.random.SeedSequence(seed)
    seeds = root.spawn(len(sizes))
    args = [(cfg, tuple(scenarios), plans, target_pos, tuple(entry), ss, n)
            for ss, n in zip(seeds, sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _oracle_chunk(*a), args))
    else:
        parts = [_oracle_chunk(*a) for a in args]
    errs = np.concatenate(parts, axis=-1)
    mean = errs.mean(axis=-1)
    se = errs.std(axis=-1, ddof=1) / np.sqrt(trials) if trials > 1 else np.full(mean.shape, np.nan)
    return [[OracleResult(float(mean[s, o]), float(se[s, o]), trials, tuple(entry))
             for o in range(len(orders))] for s in range(len(scenarios))]


def mse_empirical_oracle(params: MseParams, geometry: Sequence[int], order: int,
                         trials: int, seed: int = 0, entry=(0, 1),
                         threads: int = 1) -> OracleResult:
    """Estimate the interpolation MSE by simulating the full pipeline.

    ``geometry`` is ``(p, omega)`` for order 0 and ``(p_left, p_right, omega)``
    for order 1.  Every trial draws fresh taps, applies BS correlation, maps
    them to the frequency domain on the base points and the target, adds
    estimation error, and compares the interpolated entry with brute force.
    Only the user columns that ``entry`` touches are simulated.
    """
    if order == 0:
        p, omega = geometry
        base = (p,)
    elif order == 1:
        pl, pr, omega = geometry
        base = (pl, pr)
    else:
        raise ValueError("order must be 0 or 1")
    res = oracle_sweep(params.num_bs_antennas, params.delay_spread, params.fft_size,
                       [(params.correlation, params.csi_error_std)], base, omega,
                       orders=(order,), trials=trials, seed=seed, entry=entry,
                       threads=threads)
    return res[0][0]

"""Wideband MU-MIMO channel synthesis.

Time-domain channels are stored as an ``(L, B, U)`` stack of tap matrices
and mapped to the frequency domain with the unnormalized kernel
``exp(-j 2 pi w l / W)``.  Channel-estimation error is an additive
circularly-symmetric Gaussian term drawn independently per subcarrier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SystemConfig",
    "TdChannel",
    "FdChannel",
    "CorrSqrtCoeffs",
    "centered_active_set",
    "crandn",
    "gen_td_channel",
    "gen_exp_pdp_channel",
    "corr_sqrt_coeffs",
    "apply_bs_correlation",
    "td_to_fd",
    "dft_twiddles",
    "perturb_csi",
    "sigma_from_snr",
    "snr_from_sigma",
]


def centered_active_set(fft_size: int, num_active: int) -> tuple:
    """Contiguous block of ``num_active`` subcarriers centred in ``[0, W)``."""
    if not 1 <= num_active <= fft_size:
        raise ValueError(f"num_active must lie in [1, {fft_size}], got {num_active}")
    start = (fft_size - num_active) // 2
    return tuple(range(start, start + num_active))


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters shared by every stage of the simulator.

    Parameters
    ----------
    num_bs_antennas : int
        B, number of base-station antennas.
    num_users : int
        U, number of single-antenna users (``U <= B``).
    fft_size : int
        W, number of subcarriers.
    active_set : sequence of int
        Strictly increasing active subcarrier indices in ``[0, W)``.
        Defaults to :func:`centered_active_set` with ``W`` tones.
    delay_spread : int
        L, number of non-zero channel taps (``L <= W``).
    correlation : float
        delta, off-diagonal of the BS receive correlation matrix.
    csi_error_std : float
        sigma, standard deviation scale of the channel-estimation error.
    symbol_energy : float
        Es, average energy per transmit symbol.
    noise_variance : float
        N0, per-entry receive noise variance.
    """

    num_bs_antennas: int
    num_users: int
    fft_size: int
    delay_spread: int
    active_set: Optional[Sequence[int]] = None
    correlation: float = 0.0
    csi_error_std: float = 0.0
    symbol_energy: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        B, U, W, L = self.num_bs_antennas, self.num_users, self.fft_size, self.delay_spread
        for name, val in (("num_bs_antennas", B), ("num_users", U),
                          ("fft_size", W), ("delay_spread", L)):
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")
        if U > B:
            raise ValueError(f"num_users ({U}) must not exceed num_bs_antennas ({B})")
        if L > W:
            raise ValueError(f"delay_spread ({L}) must not exceed fft_size ({W})")
        if self.correlation ** 2 > 1:
            raise ValueError(f"correlation must satisfy delta^2 <= 1, got {self.correlation}")
        if self.csi_error_std < 0:
            raise ValueError("csi_error_std must be non-negative")
        if self.symbol_energy <= 0:
            raise ValueError("symbol_energy must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")

        active = range(W) if self.active_set is None else self.active_set
        active = tuple(int(w) for w in active)
        if not active:
            raise ValueError("active_set must not be empty")
        if any(b <= a for a, b in zip(active, active[1:])):
            raise ValueError("active_set must be strictly increasing")
        if active[0] < 0 or active[-1] >= W:
            raise ValueError(f"active subcarriers must lie in [0, {W})")
        object.__setattr__(self, "active_set", active)

    # short aliases used throughout the numerics
    @property
    def B(self) -> int:
        return self.num_bs_antennas

    @property
    def U(self) -> int:
        return self.num_users

    @property
    def W(self) -> int:
        return self.fft_size

    @property
    def L(self) -> int:
        return self.delay_spread

    @property
    def num_active(self) -> int:
        return len(self.active_set)


@dataclass(frozen=True)
class TdChannel:
    """Time-domain taps, ``taps[..., l, :, :]`` is the ``B x U`` matrix of tap ``l``.

    Leading axes, when present, index independent realizations.
    """

    taps: np.ndarray
    correlated: bool = False

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        if taps.ndim < 3:
            raise ValueError("taps must have shape (..., L, B, U)")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def delay_spread(self) -> int:
        return self.taps.shape[-3]


@dataclass(frozen=True)
class FdChannel:
    """Frequency-domain channel matrices on a set of subcarriers.

    ``matrices[..., k, :, :]`` is the ``B x U`` channel at subcarrier
    ``subcarriers[k]``; leading axes index independent realizations.
    """

    subcarriers: np.ndarray
    matrices: np.ndarray
    csi_sigma: float = 0.0

    def __post_init__(self):
        sc = np.asarray(self.subcarriers, dtype=np.int64)
        mats = np.asarray(self.matrices, dtype=complex)
        if mats.ndim < 3 or mats.shape[-3] != sc.shape[0]:
            raise ValueError("matrices must have shape (..., len(subcarriers), B, U)")
        sc.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "subcarriers", sc)
        object.__setattr__(self, "matrices", mats)

    @property
    def shape(self):
        return self.matrices.shape

    def index_of(self, subcarriers) -> np.ndarray:
        """Row positions of the given subcarrier indices."""
        pos = np.searchsorted(self.subcarriers, subcarriers)
        pos = np.clip(pos, 0, len(self.subcarriers) - 1)
        if not np.array_equal(self.subcarriers[pos], np.asarray(subcarriers)):
            raise KeyError("requested subcarrier is not stored in this channel")
        return pos


@dataclass(frozen=True)
class CorrSqrtCoeffs:
    """Coefficients of the symmetric square root ``alpha*I + beta*1`` of R."""

    alpha: float
    beta: float
    num_bs_antennas: int = field(default=1)

    def matrix(self) -> np.ndarray:
        B = self.num_bs_antennas
        return self.alpha * np.eye(B) + self.beta * np.ones((B, B))


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    z = rng.standard_normal(tuple(shape) + (2,))
    # (re, im) pairs reinterpreted in place as complex128
    z *= np.sqrt(0.5)
    return z.view(np.complex128)[..., 0]


def _lead(batch) -> tuple:
    if batch is None:
        return ()
    return (int(batch),) if np.isscalar(batch) else tuple(batch)


def gen_td_channel(cfg: SystemConfig, rng: np.random.Generator, batch=None) -> TdChannel:
    """i.i.d. Rayleigh taps with per-entry variance ``1/(B L)``.

    ``batch`` (int or shape) prepends axes of independent realizations.
    """
    B, U, L = cfg.B, cfg.U, cfg.L
    taps = crandn(rng, _lead(batch) + (L, B, U))
    taps *= np.sqrt(1.0 / (B * L))
    return TdChannel(taps, correlated=False)


def gen_exp_pdp_channel(cfg: SystemConfig, decay_rate: float,
                        rng: np.random.Generator, batch=None) -> TdChannel:
    """Taps with an exponential power-delay profile.

    Tap ``l`` has per-entry variance ``c * exp(-l * decay_rate) / B`` where
    ``c`` normalizes the profile to unit sum, so the total per-entry power is
    ``1/B`` as for :func:`gen_td_channel`.
    """
    if not decay_rate > 0:
        raise ValueError("decay_rate must be positive")
    B, U, L = cfg.B, cfg.U, cfg.L
    profile = np.exp(-decay_rate * np.arange(L))
    profile /= profile.sum()
    taps = crandn(rng, _lead(batch) + (L, B, U)) * np.sqrt(profile / B)[:, None, None]
    return TdChannel(taps, correlated=False)


def corr_sqrt_coeffs(delta: float, num_bs_antennas: int) -> CorrSqrtCoeffs:
    """Closed-form square root of ``R = (1 - delta) I + delta 1``.

    ``alpha = sqrt(1 - delta)`` and
    ``beta = (sqrt(1 + (B - 1) delta) - alpha) / B``.
    """
    B = int(num_bs_antennas)
    if B < 1:
        raise ValueError("num_bs_antennas must be positive")
    if delta ** 2 > 1:
        raise ValueError(f"correlation must satisfy delta^2 <= 1, got {delta}")
    radicand = 1.0 + (B - 1) * delta
    if radicand < 0:
        raise ValueError(
            f"correlation {delta} is below -1/(B-1) = {-1.0 / (B - 1):.6g}; "
            "the correlation matrix is not positive semidefinite")
    alpha = math.sqrt(1.0 - delta)
    beta = (math.sqrt(radicand) - alpha) / B
    return CorrSqrtCoeffs(alpha, beta, B)


def apply_bs_correlation(td: TdChannel, delta: float) -> TdChannel:
    """Left-multiply every tap by ``alpha I + beta 1``."""
    if td.correlated:
        raise ValueError("BS correlation has already been applied to this channel")
    coeffs = corr_sqrt_coeffs(delta, td.taps.shape[-2])
    taps = td.taps * coeffs.alpha
    # einsum reduces the strided antenna axis far faster than ndarray.sum
    taps += coeffs.beta * np.einsum("...bu->...u", td.taps)[..., None, :]
    return TdChannel(taps, correlated=True)


def dft_twiddles(subcarriers, num_taps: int, fft_size: int) -> np.ndarray:
    """``exp(-j 2 pi w l / W)`` for every (subcarrier, tap) pair."""
    w = np.asarray(subcarriers, dtype=np.int64)[:, None]
    l = np.arange(num_taps, dtype=np.int64)[None, :]
    # reduce the exponent modulo W first so large index products stay exact
    return np.exp(-2j * np.pi * ((w * l) % fft_size) / fft_size)


def td_to_fd(td: TdChannel, cfg: SystemConfig, subcarriers=None) -> FdChannel:
    """DFT of the tap sequence evaluated on ``cfg.active_set``.

    Pass ``subcarriers=range(W)`` for the full-band response.
    """
    sc = cfg.active_set if subcarriers is None else subcarriers
    sc = np.asarray(tuple(sc), dtype=np.int64)
    *lead, L, B, U = td.taps.shape
    tw = dft_twiddles(sc, L, cfg.W)
    mats = (tw @ td.taps.reshape(*lead, L, B * U)).reshape(*lead, len(sc), B, U)
    return FdChannel(sc, mats, csi_sigma=0.0)


def perturb_csi(fd: FdChannel, sigma: float, rng: np.random.Generator) -> FdChannel:
    """Add ``sigma * E_w`` with fresh unit-variance Gaussian ``E_w`` per tone."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if fd.csi_sigma != 0:
        raise ValueError("channel already carries estimation error")
    if sigma == 0:
        return fd
    noisy = fd.matrices + sigma * crandn(rng, fd.matrices.shape)
    return FdChannel(fd.subcarriers, noisy, csi_sigma=float(sigma))


def sigma_from_snr(snr_linear: float, num_bs_antennas: int, num_users: int) -> float:
    """Invert ``SNR = U / (B sigma^2)``."""
    if not snr_linear > 0:
        raise ValueError("snr_linear must be positive")
    return math.sqrt(num_users / (num_bs_antennas * snr_linear))


def snr_from_sigma(sigma: float, num_bs_antennas: int, num_users: int) -> float:
    return num_users / (num_bs_antennas * sigma ** 2)
